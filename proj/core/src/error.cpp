#include "fm/error.hpp"

#include <cerrno>
#include <cstring>

namespace fm {

void throw_io(const std::string& what, const std::string& path) {
  std::string msg = what + " '" + path + "'";
  if (errno != 0) {
    msg += ": ";
    msg += std::strerror(errno);
  }
  throw IoError(msg);
}

}  // namespace fm
