#include "csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace cvxsim::cli {

namespace {

std::vector<std::string> split_record(const std::string& line, const std::string& path) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted) {
        throw CsvError(path + ": unterminated quoted field");
    }
    fields.push_back(std::move(field));
    return fields;
}

double parse_number(const std::string& field, const std::string& path, std::size_t line_no) {
    std::size_t begin = field.find_first_not_of(" \t");
    std::size_t end = field.find_last_not_of(" \t\r");
    if (begin == std::string::npos) {
        throw CsvError(path + ": empty numeric field at line " + std::to_string(line_no));
    }
    double value = 0.0;
    const char* first = field.data() + begin;
    const char* last = field.data() + end + 1;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw CsvError(path + ": cannot parse '" + field + "' at line " +
                       std::to_string(line_no));
    }
    return value;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw CsvError(path + ": cannot open file");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw CsvError(path + ": missing header row");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    CsvTable table;
    table.header = split_record(line, path);
    const std::size_t ncol = table.header.size();
    if (ncol == 0) {
        throw CsvError(path + ": empty header");
    }

    std::vector<double> buffer;
    std::size_t nrow = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split_record(line, path);
        if (fields.size() != ncol) {
            throw CsvError(path + ": row with " + std::to_string(fields.size()) +
                           " fields, expected " + std::to_string(ncol) + " at line " +
                           std::to_string(line_no));
        }
        for (const auto& f : fields) {
            buffer.push_back(parse_number(f, path, line_no));
        }
        ++nrow;
    }

    table.values.resize(static_cast<Eigen::Index>(nrow), static_cast<Eigen::Index>(ncol));
    for (std::size_t i = 0; i < nrow; ++i) {
        for (std::size_t j = 0; j < ncol; ++j) {
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                buffer[i * ncol + j];
        }
    }
    return table;
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) {
        return "nan";
    }
    return std::string(buf, ptr);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& values) {
    std::ofstream out(path);
    if (!out) {
        throw CsvError(path + ": cannot open file for writing");
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j > 0) out << ',';
        out << header[j];
    }
    out << '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (j > 0) out << ',';
            out << format_double(values(i, j));
        }
        out << '\n';
    }
    if (!out) {
        throw CsvError(path + ": write failed");
    }
}

}  // namespace cvxsim::cli
