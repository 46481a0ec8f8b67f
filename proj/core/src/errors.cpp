#include "bovw/errors.hpp"

namespace bovw {

IoError::IoError(const std::string& path, const std::string& what)
    : std::runtime_error(what + ": " + path), path_(path) {}

} // namespace bovw
