#include "cli.hpp"

int main(int argc, char** argv) {
    return cvxsim::cli::run_cli(argc, argv);
}
