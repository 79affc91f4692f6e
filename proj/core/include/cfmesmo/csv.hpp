#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cfmesmo {

/// Shortest decimal text that parses back to exactly `v` ("nan", "inf", "-inf" for non-finite values).
std::string format_double(double v);

/// Writes comma-separated rows with LF endings. Fields containing a comma,
/// quote or newline are quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  void comment(const std::string& text);
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

/// Numeric table from CSV text. '#' comment lines and a leading non-numeric
/// header row are skipped; errors name the source and line.
Eigen::MatrixXd read_numeric_csv(std::istream& in, const std::string& source);

/// Comma-separated list of numbers, e.g. "0,-1.5,2".
std::vector<double> parse_number_list(const std::string& text);

}  // namespace cfmesmo
