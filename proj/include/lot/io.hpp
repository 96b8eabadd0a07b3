#pragma once

#include "lot/types.hpp"

#include <iosfwd>
#include <string>

namespace lot {

// Point-cloud CSV: one point per row.  A header row is detected when its first
// field is not a number; a final header column named "label" holds integer labels.
PointCloud read_csv(const std::string& path);
PointCloud parse_csv(std::istream& in, const std::string& source_name = "<stream>");
void write_csv(const std::string& path, const PointCloud& cloud);
void write_csv(std::ostream& out, const PointCloud& cloud);

// Binary plan file: "LOTP", u32 rows, u32 cols, u32 zero, then row-major
// little-endian float64 values.
void write_matrix_binary(const std::string& path, const Matrix& m);
Matrix read_matrix_binary(const std::string& path);

// Shortest decimal text that round-trips a double.
std::string format_double(double v);

}  // namespace lot
