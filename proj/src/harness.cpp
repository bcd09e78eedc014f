#include "vpanel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "vpanel/base64.hpp"
#include "vpanel/error.hpp"
#include "vpanel/png_io.hpp"

namespace vpanel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kDataUrlPrefix = "data:image/png;base64,";

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::ConfigError, "endpoint url needs a scheme: '" + base_url + "'");
  }
  const std::string scheme = base_url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorKind::ConfigError, "unsupported endpoint scheme '" + scheme + "'");
  }
  if (scheme_end + 3 >= base_url.size() || base_url[scheme_end + 3] == '/') {
    throw Error(ErrorKind::ConfigError, "endpoint url has no host: '" + base_url + "'");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.scheme_host_port = base_url.substr(0, path_start);
  if (path_start != std::string::npos) out.path_prefix = base_url.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

bool is_transient(int status) { return status == 429 || status >= 500; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string format_one_decimal(double v) {
  std::string s = fmt::format("{:.1f}", v);
  if (s == "-0.0") s = "0.0";
  return s;
}

}  // namespace

// --- endpoint config -----------------------------------------------------------

void EndpointConfig::validate() const {
  if (concurrency_limit < 1) throw Error(ErrorKind::ConfigError, "concurrency_limit must be >= 1");
  if (max_retries < 0) throw Error(ErrorKind::ConfigError, "max_retries must be >= 0");
  if (max_images_per_request < 1) {
    throw Error(ErrorKind::ConfigError, "max_images_per_request must be >= 1");
  }
  if (!(timeout_seconds > 0.0)) throw Error(ErrorKind::ConfigError, "timeout must be positive");
  if (backoff_initial_seconds < 0.0) throw Error(ErrorKind::ConfigError, "negative backoff");
  split_base_url(base_url);
}

void to_json(json& j, const EndpointConfig& c) {
  j = json{{"base_url", c.base_url},
           {"model_name", c.model_name},
           {"max_images_per_request", c.max_images_per_request},
           {"timeout_seconds", c.timeout_seconds},
           {"max_retries", c.max_retries},
           {"concurrency_limit", c.concurrency_limit},
           {"api_key_env", c.api_key_env},
           {"backoff_initial_seconds", c.backoff_initial_seconds},
           {"max_tokens", c.max_tokens}};
}

void from_json(const json& j, EndpointConfig& c) {
  c.base_url = j.value("base_url", c.base_url);
  c.model_name = j.value("model_name", c.model_name);
  c.max_images_per_request = j.value("max_images_per_request", c.max_images_per_request);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.concurrency_limit = j.value("concurrency_limit", c.concurrency_limit);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.backoff_initial_seconds = j.value("backoff_initial_seconds", c.backoff_initial_seconds);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
}

// --- wire ----------------------------------------------------------------------

json build_chat_request(const std::string& model, std::span<const PngBytes> images,
                        const std::string& prompt, int max_tokens) {
  json content = json::array();
  for (const PngBytes& png : images) {
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", std::string(kDataUrlPrefix) + base64::encode(png)}}}});
  }
  content.push_back({{"type", "text"}, {"text", prompt}});
  return json{{"model", model},
              {"max_tokens", max_tokens},
              {"temperature", 0},
              {"messages", json::array({{{"role", "user"}, {"content", std::move(content)}}})}};
}

ChatRequest parse_chat_request(const json& body) {
  ChatRequest req;
  try {
    req.model = body.value("model", std::string());
    for (const json& message : body.at("messages")) {
      if (message.value("role", std::string()) != "user") continue;
      const json& content = message.at("content");
      if (content.is_string()) {
        req.text += content.get<std::string>();
        continue;
      }
      for (const json& part : content) {
        const auto type = part.at("type").get<std::string>();
        if (type == "text") {
          req.text += part.at("text").get<std::string>();
        } else if (type == "image_url") {
          const auto url = part.at("image_url").at("url").get<std::string>();
          const auto comma = url.find(',');
          if (!url.starts_with("data:") || comma == std::string::npos) {
            throw Error(ErrorKind::EndpointError, "only data: image urls are accepted");
          }
          req.images.push_back(base64::decode(std::string_view(url).substr(comma + 1)));
        }
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::EndpointError, std::string("malformed chat request: ") + e.what());
  }
  return req;
}

json build_chat_response(const std::string& text, const std::string& model) {
  return json{{"object", "chat.completion"},
              {"model", model},
              {"choices", json::array({{{"index", 0},
                                        {"message", {{"role", "assistant"}, {"content", text}}},
                                        {"finish_reason", "stop"}}})}};
}

std::string parse_chat_response(const json& body) {
  try {
    const json& content = body.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    std::string text;
    for (const json& part : content) {
      if (part.value("type", std::string()) == "text") text += part.at("text").get<std::string>();
    }
    return text;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::EndpointError, std::string("malformed chat response: ") + e.what());
  }
}

std::string query_model(const EndpointConfig& cfg, std::span<const PngBytes> images,
                        const std::string& prompt) {
  if (static_cast<int>(images.size()) > cfg.max_images_per_request) {
    throw Error(ErrorKind::ConfigError,
                fmt::format("{} images exceed max_images_per_request={}", images.size(),
                            cfg.max_images_per_request));
  }
  const ParsedUrl url = split_base_url(cfg.base_url);
  const std::string path = url.path_prefix + std::string(kChatPath);
  const std::string body = build_chat_request(cfg.model_name, images, prompt, cfg.max_tokens).dump();

  httplib::Headers headers;
  if (!cfg.api_key_env.empty()) {
    if (const char* token = std::getenv(cfg.api_key_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }

  const auto timeout = std::chrono::duration<double>(cfg.timeout_seconds);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  double backoff = cfg.backoff_initial_seconds;
  std::string last_failure;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(timeout_us);
    client.set_read_timeout(timeout_us);
    client.set_write_timeout(timeout_us);
    const auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        return parse_chat_response(json::parse(res->body));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::EndpointError, std::string("response is not JSON: ") + e.what());
      }
    }
    if (!is_transient(res->status)) {
      throw Error(ErrorKind::ConfigError,
                  fmt::format("endpoint rejected request with HTTP {}: {}", res->status,
                              res->body.substr(0, 200)));
    }
    last_failure = fmt::format("HTTP {}", res->status);
  }
  throw Error(ErrorKind::EndpointError,
              fmt::format("gave up after {} attempts ({})", cfg.max_retries + 1, last_failure));
}

HttpModelClient::HttpModelClient(EndpointConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::string HttpModelClient::complete(std::span<const PngBytes> images, const std::string& prompt) {
  return query_model(cfg_, images, prompt);
}

// --- answer extraction -------------------------------------------------------------

std::optional<char> parse_choice(std::string_view response, std::string_view letters,
                                 std::span<const AnswerOption> options) {
  auto allowed = [&](char c) {
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return letters.find(up) != std::string_view::npos ? std::optional<char>(up) : std::nullopt;
  };

  std::string_view s = trim(response);
  if (!s.empty() && (s.back() == '.' || s.back() == ')')) s.remove_suffix(1);
  if (s.size() == 1) {
    if (auto hit = allowed(s[0])) return hit;
  }

  std::optional<char> first_lower;
  for (std::size_t i = 0; i < response.size(); ++i) {
    const auto c = static_cast<unsigned char>(response[i]);
    if (!std::isalpha(c)) continue;
    const bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(response[i - 1]));
    const bool right_ok =
        i + 1 == response.size() || !std::isalnum(static_cast<unsigned char>(response[i + 1]));
    if (!left_ok || !right_ok) continue;
    if (auto hit = allowed(response[i])) {
      if (std::isupper(c)) return hit;
      if (!first_lower) first_lower = hit;
    }
  }
  if (first_lower) return first_lower;

  std::optional<char> by_text;
  for (const AnswerOption& o : options) {
    if (o.text.empty() || response.find(o.text) == std::string_view::npos) continue;
    if (by_text) return std::nullopt;  // ambiguous
    by_text = allowed(o.letter);
  }
  return by_text;
}

// --- predictions ---------------------------------------------------------------------

void to_json(json& j, const Prediction& p) {
  j = json{{"item_id", p.item_id},
           {"raw_response", p.raw_response},
           {"parsed_letter", p.parsed_letter ? json(std::string(1, *p.parsed_letter)) : json()},
           {"latency_seconds", p.latency_seconds},
           {"request_images", p.request_images}};
  if (!p.error.empty()) j["error"] = p.error;
}

void from_json(const json& j, Prediction& p) {
  p.item_id = j.at("item_id").get<std::string>();
  p.raw_response = j.value("raw_response", std::string());
  const json& letter = j.at("parsed_letter");
  p.parsed_letter = letter.is_null() ? std::nullopt
                                     : std::optional<char>(letter.get<std::string>().at(0));
  p.latency_seconds = j.value("latency_seconds", 0.0);
  p.request_images = j.value("request_images", 0);
  p.error = j.value("error", std::string());
}

std::vector<Prediction> read_prediction_log(const fs::path& path) {
  std::vector<Prediction> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line).get<Prediction>());
    } catch (const json::exception&) {
      // A torn final line from an interrupted run; the item is simply redone.
    }
  }
  return out;
}

// --- scoring ---------------------------------------------------------------------------

EvalResult score_predictions(const std::vector<QAItem>& items,
                             const std::vector<Prediction>& predictions,
                             const DurationBuckets& buckets) {
  std::map<std::string, const Prediction*> latest;
  for (const Prediction& p : predictions) latest[p.item_id] = &p;

  EvalResult result;
  result.bucket_spec = buckets.describe();
  std::int64_t correct_total = 0;
  for (const QAItem& item : items) {
    Prediction p;
    if (const auto it = latest.find(item.item_id); it != latest.end()) {
      p = *it->second;
    } else {
      p.item_id = item.item_id;
      p.error = "no prediction";
    }
    const bool correct = p.error.empty() && p.parsed_letter && *p.parsed_letter == item.gold;
    if (!p.error.empty()) {
      ++result.error_count;
    } else if (!p.parsed_letter) {
      ++result.unparsable_count;
    }
    const std::string& bucket = buckets.assign(item.duration_seconds);
    BucketScore& score = result.accuracy_by_bucket[bucket];
    ++score.total;
    score.correct += correct ? 1 : 0;
    correct_total += correct ? 1 : 0;
    result.correct[item.item_id] = correct;
    result.item_bucket[item.item_id] = bucket;
    result.predictions.push_back(std::move(p));
  }
  for (auto& [name, score] : result.accuracy_by_bucket) {
    score.accuracy = static_cast<double>(score.correct) / static_cast<double>(score.total);
  }
  result.accuracy_overall =
      items.empty() ? 0.0 : static_cast<double>(correct_total) / static_cast<double>(items.size());
  return result;
}

json EvalResult::to_json(bool include_latency) const {
  json preds = json::array();
  for (const Prediction& p : predictions) {
    json j = p;
    if (!include_latency) j.erase("latency_seconds");
    j["correct"] = correct.count(p.item_id) ? correct.at(p.item_id) : false;
    j["bucket"] = item_bucket.count(p.item_id) ? item_bucket.at(p.item_id) : std::string();
    preds.push_back(std::move(j));
  }
  json by_bucket = json::object();
  for (const auto& [name, s] : accuracy_by_bucket) {
    by_bucket[name] = {{"total", s.total}, {"correct", s.correct}, {"accuracy", s.accuracy}};
  }
  return json{{"run_id", run_id},
              {"config", config.is_null() ? json::object() : config},
              {"template", template_name},
              {"buckets", bucket_spec},
              {"parser_version", parser_version},
              {"accuracy_overall", accuracy_overall},
              {"accuracy_by_bucket", std::move(by_bucket)},
              {"unparsable_count", unparsable_count},
              {"error_count", error_count},
              {"predictions", std::move(preds)}};
}

EvalResult EvalResult::from_json(const json& j) {
  EvalResult r;
  try {
    r.run_id = j.at("run_id").get<std::string>();
    r.config = j.value("config", json::object());
    r.template_name = j.value("template", std::string());
    r.bucket_spec = j.value("buckets", std::string());
    r.parser_version = j.value("parser_version", std::string());
    r.accuracy_overall = j.at("accuracy_overall").get<double>();
    for (const auto& [name, s] : j.at("accuracy_by_bucket").items()) {
      r.accuracy_by_bucket[name] = {s.at("total").get<std::int64_t>(),
                                    s.at("correct").get<std::int64_t>(),
                                    s.at("accuracy").get<double>()};
    }
    r.unparsable_count = j.value("unparsable_count", std::int64_t{0});
    r.error_count = j.value("error_count", std::int64_t{0});
    for (const json& p : j.at("predictions")) {
      Prediction pred = p.get<Prediction>();
      r.correct[pred.item_id] = p.value("correct", false);
      r.item_bucket[pred.item_id] = p.value("bucket", std::string());
      r.predictions.push_back(std::move(pred));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ReportError, std::string("malformed run result: ") + e.what());
  }
  return r;
}

// --- manifests -----------------------------------------------------------------------

ManifestIndex ManifestIndex::scan(const fs::path& root) {
  ManifestIndex index;
  if (!fs::is_directory(root)) {
    throw Error(ErrorKind::PlanViolation, "panels directory not found: " + root.string());
  }
  std::vector<fs::path> found;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json") {
      found.push_back(entry.path());
    }
  }
  std::sort(found.begin(), found.end());
  for (const fs::path& p : found) index.add(read_manifest(p), p.parent_path());
  return index;
}

void ManifestIndex::add(Manifest manifest, fs::path directory) {
  entries_.push_back({std::move(manifest), std::move(directory)});
}

const ManifestIndex::Entry* ManifestIndex::find(const std::string& video_uri) const {
  for (const Entry& e : entries_) {
    if (e.manifest.video_uri == video_uri) return &e;
  }
  const fs::path wanted = fs::path(video_uri).filename();
  const Entry* match = nullptr;
  for (const Entry& e : entries_) {
    if (fs::path(e.manifest.video_uri).filename() == wanted) {
      if (match != nullptr) return nullptr;
      match = &e;
    }
  }
  return match;
}

std::vector<PngBytes> load_panel_images(const ManifestIndex::Entry& entry) {
  std::vector<PngBytes> out;
  out.reserve(entry.manifest.panels.size());
  for (const PanelRecord& rec : entry.manifest.panels) {
    const fs::path p = entry.directory / rec.output_path;
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::PlanViolation, "missing panel image " + p.string());
    out.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return out;
}

// --- evaluation ------------------------------------------------------------------------

EvalResult evaluate(const std::vector<QAItem>& items, const ManifestIndex& manifests,
                    const EvalOptions& options, ModelClient& client) {
  std::vector<const ManifestIndex::Entry*> entries;
  entries.reserve(items.size());
  for (const QAItem& item : items) {
    const auto* entry = manifests.find(item.video_uri);
    if (entry == nullptr) {
      throw Error(ErrorKind::PlanViolation,
                  fmt::format("no manifest for item '{}' (video '{}')", item.item_id, item.video_uri));
    }
    entries.push_back(entry);
  }

  std::vector<Prediction> predictions;
  std::set<std::string> done;
  if (options.predictions_path && fs::exists(*options.predictions_path)) {
    for (Prediction& p : read_prediction_log(*options.predictions_path)) {
      if (p.error.empty()) {
        done.insert(p.item_id);
      } else {
        done.erase(p.item_id);
      }
      predictions.push_back(std::move(p));
    }
  }

  std::vector<std::size_t> pending;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (!done.count(items[k].item_id)) pending.push_back(k);
  }

  std::ofstream log;
  if (options.predictions_path) {
    if (options.predictions_path->has_parent_path()) {
      fs::create_directories(options.predictions_path->parent_path());
    }
    log.open(*options.predictions_path, std::ios::app);
    if (!log) {
      throw Error(ErrorKind::ConfigError,
                  "cannot append to " + options.predictions_path->string());
    }
    // A torn final line from a crash must not swallow the next record.
    if (fs::file_size(*options.predictions_path) > 0) {
      std::ifstream tail(*options.predictions_path, std::ios::binary);
      tail.seekg(-1, std::ios::end);
      char last = '\n';
      if (tail.get(last) && last != '\n') log << '\n';
    }
  }

  std::mutex append_mutex;
  auto record = [&](Prediction p) {
    std::lock_guard lock(append_mutex);
    if (log.is_open()) {
      log << json(p).dump() << '\n';
      log.flush();
    }
    predictions.push_back(std::move(p));
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t slot = next++; slot < pending.size(); slot = next++) {
      const std::size_t k = pending[slot];
      const QAItem& item = items[k];
      const ManifestIndex::Entry& entry = *entries[k];
      Prediction p;
      p.item_id = item.item_id;
      const auto start = std::chrono::steady_clock::now();
      try {
        const std::vector<PngBytes> images = load_panel_images(entry);
        p.request_images = static_cast<int>(images.size());
        const std::string prompt = render_prompt(
            item, options.prompt_template,
            Grid{entry.manifest.plan.grid_rows, entry.manifest.plan.grid_cols});
        p.raw_response = client.complete(images, prompt);
        p.parsed_letter = parse_choice(p.raw_response, item.option_letters(), item.options);
      } catch (const Error& e) {
        p.error = fmt::format("{}: {}", to_string(e.kind()), e.what());
      } catch (const std::exception& e) {
        p.error = e.what();
      }
      p.latency_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      record(std::move(p));
    }
  };

  const int threads = std::max(1, std::min<int>(options.concurrency, static_cast<int>(pending.size())));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }

  EvalResult result = score_predictions(items, predictions, options.buckets);
  result.run_id = options.run_id;
  result.config = options.config_echo;
  result.template_name = options.prompt_template.name();
  return result;
}

// --- reports -----------------------------------------------------------------------------

std::string format_points(double points) {
  const std::string s = format_one_decimal(points);
  return (s != "0.0" && s.front() != '-') ? "+" + s : s;
}

std::string format_relative(std::optional<double> percent) {
  if (!percent) return "n/a";
  return format_points(*percent) + "%";
}

AccuracyDelta accuracy_delta(double a, double b, std::int64_t items) {
  AccuracyDelta d;
  d.items = items;
  d.a = a;
  d.b = b;
  d.delta_points = (b - a) * 100.0;
  if (a > 0.0) d.relative_percent = (b - a) / a * 100.0;
  return d;
}

RunComparison compare_runs(const EvalResult& a, const EvalResult& b) {
  std::set<std::string> ids_a;
  std::set<std::string> ids_b;
  for (const auto& [id, ok] : a.correct) ids_a.insert(id);
  for (const auto& [id, ok] : b.correct) ids_b.insert(id);
  if (ids_a != ids_b) {
    std::vector<std::string> only;
    std::set_symmetric_difference(ids_a.begin(), ids_a.end(), ids_b.begin(), ids_b.end(),
                                  std::back_inserter(only));
    throw Error(ErrorKind::ReportError,
                fmt::format("runs cover different items ({} differ, e.g. '{}')", only.size(),
                            only.empty() ? std::string() : only.front()));
  }

  RunComparison cmp;
  cmp.run_a = a.run_id;
  cmp.run_b = b.run_id;
  cmp.overall = accuracy_delta(a.accuracy_overall, b.accuracy_overall,
                               static_cast<std::int64_t>(ids_a.size()));

  std::set<std::string> bucket_names;
  for (const auto& [name, s] : a.accuracy_by_bucket) bucket_names.insert(name);
  for (const auto& [name, s] : b.accuracy_by_bucket) bucket_names.insert(name);
  for (const std::string& name : bucket_names) {
    const auto ia = a.accuracy_by_bucket.find(name);
    const auto ib = b.accuracy_by_bucket.find(name);
    const double acc_a = ia == a.accuracy_by_bucket.end() ? 0.0 : ia->second.accuracy;
    const double acc_b = ib == b.accuracy_by_bucket.end() ? 0.0 : ib->second.accuracy;
    const std::int64_t n = ia == a.accuracy_by_bucket.end() ? 0 : ia->second.total;
    cmp.buckets[name] = accuracy_delta(acc_a, acc_b, n);
  }

  for (const std::string& id : ids_a) {
    const bool ca = a.correct.at(id);
    const bool cb = b.correct.at(id);
    if (ca != cb) cmp.flipped.push_back({id, ca, cb});
  }
  return cmp;
}

std::string render_table(const RunComparison& cmp) {
  std::string out = fmt::format("{:<16} {:>7} {:>8} {:>8} {:>8} {:>9}\n", "bucket", "items",
                                cmp.run_a.substr(0, 8), cmp.run_b.substr(0, 8), "delta", "relative");
  auto row = [&](const std::string& name, const AccuracyDelta& d) {
    out += fmt::format("{:<16} {:>7} {:>8.1f} {:>8.1f} {:>8} {:>9}\n", name, d.items, d.a * 100.0,
                       d.b * 100.0, format_points(d.delta_points),
                       format_relative(d.relative_percent));
  };
  for (const auto& [name, d] : cmp.buckets) row(name, d);
  row("overall", cmp.overall);
  std::int64_t gained = 0;
  for (const FlippedItem& f : cmp.flipped) gained += f.b_correct ? 1 : 0;
  out += fmt::format("flipped: {} ({} fixed, {} broken)\n", cmp.flipped.size(), gained,
                     static_cast<std::int64_t>(cmp.flipped.size()) - gained);
  return out;
}

json to_json(const RunComparison& cmp) {
  auto delta_json = [](const AccuracyDelta& d) {
    return json{{"items", d.items},
                {"a", d.a},
                {"b", d.b},
                {"delta_points", d.delta_points},
                {"delta_text", format_points(d.delta_points)},
                {"relative_percent", d.relative_percent ? json(*d.relative_percent) : json()},
                {"relative_text", format_relative(d.relative_percent)}};
  };
  json buckets = json::object();
  for (const auto& [name, d] : cmp.buckets) buckets[name] = delta_json(d);
  json flipped = json::array();
  for (const FlippedItem& f : cmp.flipped) {
    flipped.push_back({{"item_id", f.item_id}, {"a_correct", f.a_correct}, {"b_correct", f.b_correct}});
  }
  return json{{"a", cmp.run_a},
              {"b", cmp.run_b},
              {"overall", delta_json(cmp.overall)},
              {"buckets", std::move(buckets)},
              {"flipped", std::move(flipped)}};
}

}  // namespace vpanel
