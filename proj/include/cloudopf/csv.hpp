#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cloudopf {

// RFC 4180: comma separated, CRLF line endings, quotes only where needed.
std::string csv_escape(const std::string& field);
void csv_write_row(std::ostream& out, const std::vector<std::string>& fields);
std::vector<std::vector<std::string>> csv_read(std::istream& in);

// 12 significant digits
std::string csv_number(double v);

}  // namespace cloudopf
