#include "binary.hpp"

#include <charconv>
#include <cstdio>

namespace iconik::io {

void Header::set(std::string const &key, double value)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  set(key, std::string(buf));
}

std::string const &Header::str(std::string const &key) const
{
  auto it = values_.find(key);
  if (it == values_.end()) { throw FormatError("header is missing field '" + key + "'"); }
  return it->second;
}

double Header::real(std::string const &key) const
{
  auto const &s = str(key);
  char *end = nullptr;
  double const v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') { throw FormatError("header field '" + key + "' is not a number: " + s); }
  return v;
}

long long Header::integer(std::string const &key) const
{
  auto const &s = str(key);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError("header field '" + key + "' is not an integer: " + s);
  }
  return v;
}

std::uint64_t Header::u64(std::string const &key) const
{
  auto const &s = str(key);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError("header field '" + key + "' is not an unsigned integer: " + s);
  }
  return v;
}

void Header::write(std::ostream &os, std::string const &magic_line) const
{
  os << magic_line << '\n';
  for (auto const &k : order_) { os << k << '=' << values_.at(k) << '\n'; }
  os << "END\n";
}

Header Header::read(std::istream &is, std::string const &magic, int max_version, int &version)
{
  std::string line;
  if (!std::getline(is, line) || line.rfind(magic + " ", 0) != 0) {
    throw FormatError("bad magic: expected '" + magic + "'");
  }
  try {
    version = std::stoi(line.substr(magic.size() + 1));
  } catch (std::exception const &) {
    throw FormatError("bad version field in '" + line + "'");
  }
  if (version < 1 || version > max_version) {
    throw FormatError("unsupported " + magic + " version " + std::to_string(version));
  }
  Header h;
  int lines = 0;
  while (std::getline(is, line)) {
    if (line == "END") { return h; }
    if (++lines > 10000) { break; }
    auto const eq = line.find('=');
    if (eq == std::string::npos || eq == 0) { throw FormatError("malformed header line: '" + line + "'"); }
    h.set(line.substr(0, eq), line.substr(eq + 1));
  }
  throw FormatError("header is not terminated by END");
}

} // namespace iconik::io
