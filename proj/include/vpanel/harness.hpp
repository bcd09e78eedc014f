#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vpanel/benchmark.hpp"
#include "vpanel/panelizer.hpp"

namespace vpanel {

using PngBytes = std::vector<std::uint8_t>;

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model_name = "mock";
  int max_images_per_request = 32;
  double timeout_seconds = 120.0;
  int max_retries = 3;
  int concurrency_limit = 1;
  std::string api_key_env = "VPANEL_API_KEY";  // name of the variable, never the token
  double backoff_initial_seconds = 0.5;        // doubled after every failed attempt
  int max_tokens = 16;

  /// Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const EndpointConfig& c);
void from_json(const nlohmann::json& j, EndpointConfig& c);

// --- wire format ---------------------------------------------------------------
//
// POST {base_url}/chat/completions
//   {"model": ..., "max_tokens": N, "temperature": 0,
//    "messages": [{"role": "user", "content": [
//        {"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}}, ...,
//        {"type": "text", "text": prompt}]}]}
// The reply's choices[0].message.content is the answer text.

inline constexpr std::string_view kChatPath = "/chat/completions";

nlohmann::json build_chat_request(const std::string& model, std::span<const PngBytes> images,
                                  const std::string& prompt, int max_tokens);

struct ChatRequest {
  std::string model;
  std::vector<PngBytes> images;  // in message order
  std::string text;
};

/// Throws EndpointError on malformed requests.
ChatRequest parse_chat_request(const nlohmann::json& body);
nlohmann::json build_chat_response(const std::string& text, const std::string& model);
/// Throws EndpointError when no message text is present.
std::string parse_chat_response(const nlohmann::json& body);

/// One chat completion carrying the images (chronological) then the prompt.
/// Transient failures (transport errors, 5xx, 429) are retried with
/// exponential backoff; other 4xx replies raise ConfigError at once and an
/// exhausted retry budget raises EndpointError. More images than
/// max_images_per_request is a ConfigError raised before any network call.
std::string query_model(const EndpointConfig& cfg, std::span<const PngBytes> images,
                        const std::string& prompt);

/// Something that answers a prompt about images. Implementations must be
/// safe to call from several threads at once.
class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string complete(std::span<const PngBytes> images, const std::string& prompt) = 0;
};

class HttpModelClient final : public ModelClient {
 public:
  explicit HttpModelClient(EndpointConfig cfg);
  std::string complete(std::span<const PngBytes> images, const std::string& prompt) override;
  const EndpointConfig& config() const noexcept { return cfg_; }

 private:
  EndpointConfig cfg_;
};

/// Adapts a callable; handy for in-process mocks.
class FunctionModelClient final : public ModelClient {
 public:
  using Fn = std::function<std::string(std::span<const PngBytes>, const std::string&)>;
  explicit FunctionModelClient(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(std::span<const PngBytes> images, const std::string& prompt) override {
    return fn_(images, prompt);
  }

 private:
  Fn fn_;
};

// --- answer extraction -----------------------------------------------------------

inline constexpr const char* kParserVersion = "choice-cascade/1";

/// Rule cascade over the allowed letters (uppercase):
///  1. the trimmed response is one option letter, optionally followed by '.' or ')';
///  2. the first standalone option-letter token (uppercase tokens are preferred
///     over lowercase ones);
///  3. the unique option whose full text appears verbatim.
/// Rules 1 and 2 ignore case. Returns nullopt when nothing matches.
std::optional<char> parse_choice(std::string_view response, std::string_view letters,
                                 std::span<const AnswerOption> options = {});

// --- evaluation --------------------------------------------------------------------

struct Prediction {
  std::string item_id;
  std::string raw_response;
  std::optional<char> parsed_letter;
  double latency_seconds = 0.0;
  int request_images = 0;
  std::string error;  // non-empty when the request failed

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

void to_json(nlohmann::json& j, const Prediction& p);
void from_json(const nlohmann::json& j, Prediction& p);

struct BucketScore {
  std::int64_t total = 0;
  std::int64_t correct = 0;
  double accuracy = 0.0;

  friend bool operator==(const BucketScore&, const BucketScore&) = default;
};

struct EvalResult {
  std::string run_id;
  nlohmann::json config;  // resolved configuration echo
  std::string template_name;
  std::string bucket_spec;
  std::string parser_version = kParserVersion;
  std::vector<Prediction> predictions;  // dataset order
  std::map<std::string, bool> correct;  // by item id
  std::map<std::string, std::string> item_bucket;
  double accuracy_overall = 0.0;
  std::map<std::string, BucketScore> accuracy_by_bucket;
  std::int64_t unparsable_count = 0;
  std::int64_t error_count = 0;

  /// Serialized form; latencies are dropped unless asked for so that reruns
  /// compare byte-for-byte.
  nlohmann::json to_json(bool include_latency = true) const;
  static EvalResult from_json(const nlohmann::json& j);
};

/// Pure fold: unparsable answers and failed requests count as incorrect.
/// Predictions are matched to items by id; items without one are scored as
/// errors.
EvalResult score_predictions(const std::vector<QAItem>& items,
                             const std::vector<Prediction>& predictions,
                             const DurationBuckets& buckets);

/// Manifests found under a directory tree, keyed by video uri.
class ManifestIndex {
 public:
  struct Entry {
    Manifest manifest;
    std::filesystem::path directory;
  };

  static ManifestIndex scan(const std::filesystem::path& root);
  void add(Manifest manifest, std::filesystem::path directory);

  /// Exact uri match first, then a unique match on the file name.
  const Entry* find(const std::string& video_uri) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
};

struct EvalOptions {
  PromptTemplate prompt_template;
  DurationBuckets buckets;
  std::string run_id = "run";
  nlohmann::json config_echo = nlohmann::json::object();
  int concurrency = 1;
  /// Append-only JSONL store. Existing records are reused, so an interrupted
  /// run resumes where it stopped; failed requests are retried on resume.
  std::optional<std::filesystem::path> predictions_path;
};

/// Panel images of one manifest, PNG-encoded, in panel order.
std::vector<PngBytes> load_panel_images(const ManifestIndex::Entry& entry);

/// Queries the model for every item not already answered, persisting each
/// prediction as it completes, then scores. Throws PlanViolation up front
/// when an item has no manifest; request failures are recorded per item.
EvalResult evaluate(const std::vector<QAItem>& items, const ManifestIndex& manifests,
                    const EvalOptions& options, ModelClient& client);

std::vector<Prediction> read_prediction_log(const std::filesystem::path& path);

// --- reports -------------------------------------------------------------------------

struct AccuracyDelta {
  std::int64_t items = 0;
  double a = 0.0;
  double b = 0.0;
  double delta_points = 0.0;                // (b - a) * 100
  std::optional<double> relative_percent;   // (b - a) / a * 100, absent when a == 0
};

struct FlippedItem {
  std::string item_id;
  bool a_correct = false;
  bool b_correct = false;
};

struct RunComparison {
  std::string run_a;
  std::string run_b;
  AccuracyDelta overall;
  std::map<std::string, AccuracyDelta> buckets;
  std::vector<FlippedItem> flipped;
};

/// Signed one-decimal points, e.g. "+7.6", "-0.4", "0.0".
std::string format_points(double points);
/// Signed one-decimal percentage, e.g. "+19.4%"; "n/a" when absent.
std::string format_relative(std::optional<double> percent);

AccuracyDelta accuracy_delta(double a, double b, std::int64_t items = 0);

/// Deltas b - a. Throws ReportError unless both runs cover the same items.
RunComparison compare_runs(const EvalResult& a, const EvalResult& b);
std::string render_table(const RunComparison& cmp);
nlohmann::json to_json(const RunComparison& cmp);

}  // namespace vpanel
