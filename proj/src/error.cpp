#include "iconik/error.hpp"
#include "iconik/types.hpp"

namespace iconik {

char const *to_string(ErrorKind kind)
{
  switch (kind) {
  case ErrorKind::Config: return "config";
  case ErrorKind::Data: return "data";
  case ErrorKind::Numeric: return "numeric";
  case ErrorKind::Format: return "format";
  case ErrorKind::Io: return "io";
  }
  return "unknown";
}

RealImage magnitude(ComplexImage const &img)
{
  RealImage out(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = std::abs(img[i]);
  }
  return out;
}

} // namespace iconik
