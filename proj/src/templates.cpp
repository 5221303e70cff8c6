#include "volmo/templates.hpp"

#include <string>

#include "volmo/error.hpp"

namespace volmo::templates {

std::string_view get(std::string_view name) {
  for (const auto& [key, body] : embedded_files()) {
    if (key == name) return body;
  }
  throw Error(ErrorCode::Io, "no embedded template named " + std::string(name));
}

}  // namespace volmo::templates
