#include "vpanel/config.hpp"

#include <cstdlib>
#include <fstream>

#include "vpanel/benchmark.hpp"
#include "vpanel/error.hpp"
#include "vpanel/panelizer.hpp"

namespace vpanel {

using nlohmann::json;

namespace {

int to_int(const std::string& name, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::ConfigError, name + " must be an integer, got '" + value + "'");
}

double to_double(const std::string& name, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::ConfigError, name + " must be a number, got '" + value + "'");
}

std::uint64_t to_u64(const std::string& name, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used == value.size() && value.front() != '-') return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::ConfigError, name + " must be a non-negative integer, got '" + value + "'");
}

}  // namespace

void RunConfig::apply_json(const json& doc) {
  try {
    if (doc.contains("policy")) {
      const json& p = doc["policy"];
      policy.context_window = p.value("context_window", policy.context_window);
      if (p.contains("grid")) {
        const auto [rows, cols] = parse_grid(p["grid"].get<std::string>());
        policy.beta = rows;
        policy.alpha = cols;
      }
      policy.alpha = p.value("alpha", policy.alpha);
      policy.beta = p.value("beta", policy.beta);
      if (p.contains("gamma")) policy.gamma = GammaSpec::parse(p["gamma"].get<std::string>());
      if (p.contains("mode")) mode = parse_plan_mode(p["mode"].get<std::string>());
    }
    template_name = doc.value("template", template_name);
    buckets = doc.value("buckets", buckets);
    parallelism = doc.value("parallelism", parallelism);
    seed = doc.value("seed", seed);
    if (doc.contains("endpoint")) {
      EndpointConfig e = endpoint;
      from_json(doc["endpoint"], e);
      endpoint = e;
    }
    if (doc.contains("source")) {
      const json& s = doc["source"];
      if (s.contains("fps") && !s["fps"].is_null()) source.fps_override = s["fps"].get<double>();
      source.decoder_cmd = s.value("decoder_cmd", source.decoder_cmd);
      source.probe_cmd = s.value("probe_cmd", source.probe_cmd);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config: ") + e.what());
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open config " + path.string());
  try {
    apply_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

void RunConfig::apply_env(
    const std::function<std::optional<std::string>(const std::string&)>& lookup) {
  auto get = [&](const char* name, auto&& apply) {
    if (auto v = lookup(name); v && !v->empty()) apply(std::string(name), *v);
  };
  get("VPANEL_CONTEXT_WINDOW", [&](auto n, auto v) { policy.context_window = to_int(n, v); });
  get("VPANEL_GRID", [&](auto, auto v) {
    const auto [rows, cols] = parse_grid(v);
    policy.beta = rows;
    policy.alpha = cols;
  });
  get("VPANEL_GAMMA", [&](auto, auto v) { policy.gamma = GammaSpec::parse(v); });
  get("VPANEL_TEMPLATE", [&](auto, auto v) { template_name = v; });
  get("VPANEL_BUCKETS", [&](auto, auto v) { buckets = v; });
  get("VPANEL_PARALLELISM", [&](auto n, auto v) { parallelism = to_int(n, v); });
  get("VPANEL_SEED", [&](auto n, auto v) { seed = to_u64(n, v); });
  get("VPANEL_ENDPOINT", [&](auto, auto v) { endpoint.base_url = v; });
  get("VPANEL_MODEL", [&](auto, auto v) { endpoint.model_name = v; });
  get("VPANEL_MAX_IMAGES", [&](auto n, auto v) { endpoint.max_images_per_request = to_int(n, v); });
  get("VPANEL_RETRIES", [&](auto n, auto v) { endpoint.max_retries = to_int(n, v); });
  get("VPANEL_TIMEOUT", [&](auto n, auto v) { endpoint.timeout_seconds = to_double(n, v); });
  get("VPANEL_CONCURRENCY", [&](auto n, auto v) { endpoint.concurrency_limit = to_int(n, v); });
  get("VPANEL_FPS", [&](auto n, auto v) { source.fps_override = to_double(n, v); });
  get("VPANEL_DECODER_CMD", [&](auto, auto v) { source.decoder_cmd = v; });
  get("VPANEL_PROBE_CMD", [&](auto, auto v) { source.probe_cmd = v; });
}

void RunConfig::apply_process_env() {
  apply_env([](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  });
}

void RunConfig::validate() const {
  policy.validate();
  endpoint.validate();
  PromptTemplate::parse(template_name);
  DurationBuckets::parse(buckets);
  if (parallelism < 1) throw Error(ErrorKind::ConfigError, "parallelism must be >= 1");
  if (source.fps_override && !(*source.fps_override > 0.0)) {
    throw Error(ErrorKind::ConfigError, "fps override must be positive");
  }
}

json RunConfig::to_json() const {
  return json{{"policy",
               {{"context_window", policy.context_window},
                {"grid", format_grid(policy.beta, policy.alpha)},
                {"alpha", policy.alpha},
                {"beta", policy.beta},
                {"gamma", policy.gamma.to_string()},
                {"mode", to_string(mode)}}},
              {"template", template_name},
              {"buckets", buckets},
              {"endpoint", endpoint},
              {"source",
               {{"fps", source.fps_override ? json(*source.fps_override) : json()},
                {"decoder_cmd", source.decoder_cmd},
                {"probe_cmd", source.probe_cmd}}},
              {"parallelism", parallelism},
              {"seed", seed}};
}

}  // namespace vpanel
