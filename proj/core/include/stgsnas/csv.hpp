// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace stgsnas {

/// Shortest "%.17g" rendering; round-trips every finite double.
std::string format_double(double v);

/// Accumulates RFC 4180 rows; fields containing ',', '"' or newlines are
/// quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(const std::vector<std::string>& fields);
  const std::string& str() const noexcept { return text_; }
  std::size_t rows() const noexcept { return rows_; }

 private:
  void append(const std::vector<std::string>& fields);
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

/// Splits CSV text into rows of fields (quoted fields supported).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace stgsnas
