#pragma once

#include <functional>

namespace cvxsim {

/// Runs fn(0..n_tasks-1) on up to `threads` worker threads (serial when
/// threads <= 1). The first exception thrown by any task is rethrown after
/// all workers join.
void parallel_for(int n_tasks, int threads, const std::function<void(int)>& fn);

/// Hardware thread count, at least 1.
int hardware_threads();

}  // namespace cvxsim
