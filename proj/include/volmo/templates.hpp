#pragma once

#include <span>
#include <string_view>
#include <utility>

namespace volmo::templates {

/// Fixture files from templates/, compiled in byte-for-byte. Keys are paths
/// relative to templates/ (e.g. "dialogue/01_differential.txt").
std::span<const std::pair<std::string_view, std::string_view>> embedded_files();

/// Throws volmo::Error(Io) if `name` is not an embedded fixture.
std::string_view get(std::string_view name);

/// Version tag of the prompt fixtures; part of revision idempotency keys.
inline constexpr std::string_view kTemplateVersion = "v1";

}  // namespace volmo::templates
