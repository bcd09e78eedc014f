#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace vpanel {

struct AnswerOption {
  char letter = 'A';
  std::string text;

  friend bool operator==(const AnswerOption&, const AnswerOption&) = default;
};

/// One multiple-choice question about one video.
struct QAItem {
  std::string item_id;
  std::string video_uri;
  std::string question;
  std::vector<AnswerOption> options;  // letters 'A', 'B', ... in order, 2 to 6 entries
  char gold = 'A';
  double duration_seconds = 0.0;
  std::vector<std::string> tags;

  /// Throws DatasetError naming the item.
  void validate() const;
  std::string option_letters() const;

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

enum class DatasetFormat { GenericJsonl, VmmeJson, TimeScopeJson };

DatasetFormat parse_dataset_format(std::string_view name);
std::string_view to_string(DatasetFormat format);

/// Loads and validates a dataset. Duplicate item ids and invariant
/// violations raise DatasetError with the offending record's position.
std::vector<QAItem> load_dataset(const std::filesystem::path& path, DatasetFormat format);
std::vector<QAItem> parse_dataset(std::string_view text, DatasetFormat format);

/// Canonical GenericJsonl form: one compact object per line, fixed key order.
std::string serialize_dataset(const std::vector<QAItem>& items);

void to_json(nlohmann::json& j, const QAItem& item);
void from_json(const nlohmann::json& j, QAItem& item);

// --- prompts -----------------------------------------------------------------

inline constexpr std::string_view kAnswerInstruction =
    "Answer with the option's letter from the given choices directly.\n";

enum class TemplateId { Default, P1, P2, P3, Custom };
enum class Placement { BeforeQuestion, AfterQuestion };

struct PromptTemplate {
  TemplateId id = TemplateId::Default;
  Placement placement = Placement::BeforeQuestion;
  std::string custom_text;  // only for Custom; may hold {r} and {c}

  static PromptTemplate standard() { return {}; }
  static PromptTemplate panel_prompt(int number);
  static PromptTemplate custom(std::string text, Placement placement = Placement::BeforeQuestion);

  /// "default", "p1", "p2", "p3", or "custom:<text>" (placed before the question).
  static PromptTemplate parse(std::string_view name);
  std::string name() const;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

/// Verbatim text of a panel prompt (p1, p2, p3), placeholders unsubstituted.
std::string_view template_text(TemplateId id);

struct Grid {
  int rows = 1;
  int cols = 1;
};

/// Default: question, "<letter>. <text>" per option, then the answer
/// instruction. p1 and p2 prepend their text; p3 follows the
/// options and carries its own instruction. Custom text replaces the
/// instruction (empty text leaves question and options only). Throws
/// TemplateError when {r}/{c} appear without a grid.
std::string render_prompt(const QAItem& item, const PromptTemplate& tmpl,
                          std::optional<Grid> grid = std::nullopt);

/// Inverse of the option listing produced by render_prompt: every
/// "<Letter>. <text>" line, in order.
std::vector<AnswerOption> extract_options(std::string_view prompt);

// --- duration buckets ----------------------------------------------------------

/// Ordered named ranges partitioning [0, inf): bucket k holds durations in
/// (upper[k-1], upper[k]], the first starts at 0 and the last is unbounded.
class DurationBuckets {
 public:
  struct Bucket {
    std::string name;
    double upper = std::numeric_limits<double>::infinity();
  };

  DurationBuckets() = default;
  /// Throws ConfigError unless bounds strictly increase and end at infinity.
  explicit DurationBuckets(std::vector<Bucket> buckets);

  /// short <= 120 s, medium <= 1000 s, long beyond.
  static DurationBuckets vmme();
  /// One bucket per nominal TimeScope length (60 s ... 36000 s).
  static DurationBuckets timescope();
  /// short (up to 3 h) and long.
  static DurationBuckets timescope_coarse();
  /// A single bucket named "all".
  static DurationBuckets single();
  /// "vmme", "timescope", "timescope-coarse", "all", or "name:upper,...,name".
  static DurationBuckets parse(std::string_view spec);

  const std::vector<Bucket>& buckets() const noexcept { return buckets_; }
  const std::string& assign(double duration_seconds) const;
  std::string describe() const;

 private:
  std::vector<Bucket> buckets_{{"all", std::numeric_limits<double>::infinity()}};
};

/// Nominal TimeScope video lengths in seconds.
const std::vector<double>& timescope_lengths();

/// Items per bucket name; empty buckets are omitted and item order is kept.
std::map<std::string, std::vector<QAItem>> bucket_items(const std::vector<QAItem>& items,
                                                        const DurationBuckets& buckets);

}  // namespace vpanel
