#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opdist::detail {

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
// Fields that span lines are supported; line() reports the line where the row started.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  std::optional<std::vector<std::string>> next_row();
  std::size_t line() const noexcept { return row_line_; }

 private:
  std::istream& in_;
  std::size_t next_line_ = 1;
  std::size_t row_line_ = 0;
};

// Quotes a field when it contains a separator, quote or line break.
std::string csv_escape(std::string_view field);

}  // namespace opdist::detail
