#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "vpanel/framesource.hpp"
#include "vpanel/harness.hpp"
#include "vpanel/policy.hpp"

namespace vpanel {

/// Fully resolved settings shared by every subcommand. Defaults follow the
/// method's reference setting: 2x2 panels, gamma = 1x fps, 32 images.
struct RunConfig {
  SamplingPolicy policy;
  PlanMode mode = PlanMode::Auto;
  std::string template_name = "default";
  std::string buckets = "vmme";
  EndpointConfig endpoint;
  SourceOptions source;
  int parallelism = 1;
  std::uint64_t seed = 0;

  /// Overlays the keys present in a config document (see README for the schema).
  void apply_json(const nlohmann::json& doc);
  void apply_file(const std::filesystem::path& path);
  /// Overlays VPANEL_* variables; `lookup` returns nullopt for unset names.
  void apply_env(const std::function<std::optional<std::string>(const std::string&)>& lookup);
  void apply_process_env();

  /// Throws InvalidPolicy / ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
};

}  // namespace vpanel
