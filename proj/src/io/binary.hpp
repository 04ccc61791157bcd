#pragma once

// Little-endian section helpers shared by the file formats.

#include "iconik/error.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace iconik::io {

template <class T>
void write_le(std::ostream &os, T const *data, std::size_t n)
{
  static_assert(std::is_arithmetic_v<T>);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<char const *>(data), static_cast<std::streamsize>(n * sizeof(T)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      char b[sizeof(T)];
      std::memcpy(b, data + i, sizeof(T));
      for (std::size_t j = 0; j < sizeof(T); ++j) { os.put(b[sizeof(T) - 1 - j]); }
    }
  }
}

template <class T>
void read_le(std::istream &is, T *data, std::size_t n, char const *section)
{
  static_assert(std::is_arithmetic_v<T>);
  is.read(reinterpret_cast<char *>(data), static_cast<std::streamsize>(n * sizeof(T)));
  if (static_cast<std::size_t>(is.gcount()) != n * sizeof(T)) {
    throw FormatError(std::string("truncated section: ") + section);
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < n; ++i) {
      char b[sizeof(T)];
      std::memcpy(b, data + i, sizeof(T));
      std::reverse(b, b + sizeof(T));
      std::memcpy(data + i, b, sizeof(T));
    }
  }
}

/// key=value header terminated by a line "END".
class Header
{
public:
  void set(std::string const &key, std::string const &value) { order_.push_back(key), values_[key] = value; }
  void set(std::string const &key, double value);
  void set(std::string const &key, long long value) { set(key, std::to_string(value)); }
  void set(std::string const &key, int value) { set(key, std::to_string(value)); }
  void set(std::string const &key, std::uint64_t value) { set(key, std::to_string(value)); }

  bool has(std::string const &key) const { return values_.count(key) != 0; }
  std::string const &str(std::string const &key) const;
  double real(std::string const &key) const;
  long long integer(std::string const &key) const;
  std::uint64_t u64(std::string const &key) const;

  void write(std::ostream &os, std::string const &magic_line) const;
  /// Reads the magic line and key=value lines up to END.
  static Header read(std::istream &is, std::string const &magic, int max_version, int &version);

private:
  std::vector<std::string> order_;
  std::map<std::string, std::string> values_;
};

} // namespace iconik::io
