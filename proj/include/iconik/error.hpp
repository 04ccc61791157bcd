#pragma once

#include <stdexcept>
#include <string>

namespace iconik {

enum class ErrorKind
{
  Config,
  Data,
  Numeric,
  Format,
  Io,
};

char const *to_string(ErrorKind kind);

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, std::string const &what)
    : std::runtime_error(what)
    , kind_(kind)
  {
  }
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

struct ConfigError : Error
{
  explicit ConfigError(std::string const &what) : Error(ErrorKind::Config, what) {}
};

struct DataError : Error
{
  explicit DataError(std::string const &what) : Error(ErrorKind::Data, what) {}
};

/// Divergence, non-finite losses, degenerate signals.
struct NumericError : Error
{
  explicit NumericError(std::string const &what) : Error(ErrorKind::Numeric, what) {}
};

struct FormatError : Error
{
  explicit FormatError(std::string const &what) : Error(ErrorKind::Format, what) {}
};

struct IoError : Error
{
  explicit IoError(std::string const &what) : Error(ErrorKind::Io, what) {}
};

} // namespace iconik
