#pragma once

#include "cvxsim/types.hpp"

#include <string>
#include <vector>

namespace cvxsim::cli {

/// Raised for any malformed CSV input (missing header, ragged rows,
/// unparseable numbers).
class CsvError : public Error {
public:
    using Error::Error;
};

/// Numeric table: header names plus a row-major value matrix (possibly with
/// zero rows). Expects a comma-separated file with a header line; quoted
/// fields with doubled quotes are accepted, '.' is the decimal separator.
struct CsvTable {
    std::vector<std::string> header;
    Matrix values;
};

CsvTable read_csv(const std::string& path);

/// Writes a numeric table with the given header. Doubles are rendered with
/// the shortest representation that round-trips.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& values);

std::string format_double(double v);

}  // namespace cvxsim::cli
