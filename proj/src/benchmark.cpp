#include "vpanel/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "vpanel/error.hpp"

namespace vpanel {

using nlohmann::json;

namespace {

constexpr std::string_view kPrompt1 =
    "You are given a sequence of images. Each image is a composite grid of video frames "
    "arranged in temporal order: panels are ordered from left to right, then top to bottom "
    "— like reading a book. Within each composite, the panels represent consecutive "
    "frames from the video. Across the sequence, the composites are shown in chronological "
    "order. When answering, interpret the full temporal sequence, not individual panels in "
    "isolation.";

constexpr std::string_view kPrompt2 =
    "When answering, treat the panels as frames from one video, in order from left to right, "
    "then top to bottom.";

constexpr std::string_view kPrompt3 =
    "Each image is divided into {r} rows and {c} columns of panels. Read them in "
    "left-to-right top-to-bottom order as consecutive video frames. Answer with the option's "
    "letter from the given choices directly.";

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void dataset_error(std::size_t record, const std::string& id, const std::string& what) {
  throw Error(ErrorKind::DatasetError,
              id.empty() ? fmt::format("record {}: {}", record, what)
                         : fmt::format("record {} (id '{}'): {}", record, id, what));
}

// "A. text", "A) text", "(A) text" -> ('A', "text"); otherwise no letter.
std::optional<AnswerOption> split_lettered(std::string_view s) {
  s = trim(s);
  std::size_t pos = 0;
  if (s.size() >= 3 && s[0] == '(' && std::isupper(static_cast<unsigned char>(s[1])) &&
      s[2] == ')') {
    pos = 3;
  } else if (s.size() >= 2 && std::isupper(static_cast<unsigned char>(s[0])) &&
             (s[1] == '.' || s[1] == ')' || s[1] == ':')) {
    pos = 2;
  } else {
    return std::nullopt;
  }
  const char letter = s[0] == '(' ? s[1] : s[0];
  return AnswerOption{letter, std::string(trim(s.substr(pos)))};
}

std::vector<AnswerOption> options_from_strings(const json& list) {
  std::vector<AnswerOption> out;
  for (std::size_t k = 0; k < list.size(); ++k) {
    const auto text = list[k].get<std::string>();
    const char expected = static_cast<char>('A' + k);
    auto lettered = split_lettered(text);
    if (lettered && lettered->letter == expected) {
      out.push_back(*lettered);
    } else {
      out.push_back({expected, std::string(trim(text))});
    }
  }
  return out;
}

std::vector<AnswerOption> parse_options(const json& list) {
  if (!list.is_array()) throw std::invalid_argument("options must be a list");
  if (!list.empty() && list.front().is_object()) {
    std::vector<AnswerOption> out;
    for (const json& o : list) {
      const auto letter = o.at("letter").get<std::string>();
      if (letter.size() != 1) throw std::invalid_argument("option letter must be one character");
      out.push_back({letter[0], o.at("text").get<std::string>()});
    }
    return out;
  }
  return options_from_strings(list);
}

// Letter, "(B)", "B. text", or the text of one option.
char resolve_answer(const json& answer, const std::vector<AnswerOption>& options) {
  const std::string raw(trim(answer.get<std::string>()));
  if (raw.size() == 1) return static_cast<char>(std::toupper(static_cast<unsigned char>(raw[0])));
  if (auto lettered = split_lettered(raw)) return lettered->letter;
  for (const AnswerOption& o : options) {
    if (o.text == raw) return o.letter;
  }
  throw std::invalid_argument("answer '" + raw + "' is neither a letter nor an option text");
}

double number_field(const json& v) {
  if (v.is_number()) return v.get<double>();
  return std::stod(v.get<std::string>());
}

std::vector<std::string> string_list(const json& v) {
  if (v.is_null()) return {};
  if (v.is_string()) return {v.get<std::string>()};
  return v.get<std::vector<std::string>>();
}

const json& first_of(const json& rec, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (rec.contains(k) && !rec[k].is_null()) return rec[k];
  }
  throw std::invalid_argument(fmt::format("missing field '{}'", *keys.begin()));
}

std::string id_field(const json& rec, std::initializer_list<const char*> keys) {
  const json& v = first_of(rec, keys);
  return v.is_string() ? v.get<std::string>() : v.dump();
}

QAItem from_generic(const json& rec) {
  QAItem item;
  item.item_id = id_field(rec, {"id"});
  item.video_uri = rec.at("video").get<std::string>();
  item.question = rec.at("question").get<std::string>();
  const json& answer = rec.at("answer");
  if (answer.is_boolean() && !rec.contains("options")) {
    item.options = {{'A', "True"}, {'B', "False"}};
    item.gold = answer.get<bool>() ? 'A' : 'B';
  } else {
    item.options = parse_options(rec.at("options"));
    item.gold = answer.is_boolean() ? (answer.get<bool>() ? 'A' : 'B')
                                    : resolve_answer(answer, item.options);
  }
  item.duration_seconds = rec.contains("duration_s") ? number_field(rec["duration_s"]) : 0.0;
  item.tags = string_list(rec.value("tags", json()));
  return item;
}

// Video-MME labels durations by category only; without an explicit
// duration_s the category's reported mean length stands in.
double vmme_category_seconds(const std::string& category) {
  if (category == "short") return 80.0;
  if (category == "medium") return 500.0;
  if (category == "long") return 2500.0;
  throw std::invalid_argument("unknown duration category '" + category + "'");
}

QAItem from_vmme(const json& rec) {
  QAItem item;
  item.item_id = id_field(rec, {"question_id", "id"});
  if (rec.contains("video_path")) {
    item.video_uri = rec["video_path"].get<std::string>();
  } else {
    item.video_uri = id_field(rec, {"videoID", "video_id"}) + ".mp4";
  }
  item.question = rec.at("question").get<std::string>();
  item.options = parse_options(rec.at("options"));
  item.gold = resolve_answer(rec.at("answer"), item.options);
  if (rec.contains("duration_s")) {
    item.duration_seconds = number_field(rec["duration_s"]);
  } else if (rec.contains("duration") && rec["duration"].is_number()) {
    item.duration_seconds = rec["duration"].get<double>();
  } else {
    const auto category = rec.at("duration").get<std::string>();
    item.duration_seconds = vmme_category_seconds(category);
    item.tags.push_back("duration:" + category);
  }
  for (const char* key : {"task_type", "domain", "sub_category"}) {
    if (rec.contains(key) && rec[key].is_string()) item.tags.push_back(rec[key].get<std::string>());
  }
  return item;
}

QAItem from_timescope(const json& rec) {
  QAItem item;
  item.item_id = id_field(rec, {"question_id", "id"});
  item.video_uri = first_of(rec, {"video_path", "video"}).get<std::string>();
  item.question = rec.at("question").get<std::string>();
  item.options = parse_options(first_of(rec, {"candidates", "options"}));
  item.gold = resolve_answer(rec.at("answer"), item.options);
  item.duration_seconds = number_field(first_of(rec, {"duration", "duration_s"}));
  if (rec.contains("task_type") && rec["task_type"].is_string()) {
    item.tags.push_back(rec["task_type"].get<std::string>());
  }
  return item;
}

std::vector<json> split_records(std::string_view text, DatasetFormat format) {
  std::vector<json> records;
  const std::string_view body = trim(text);
  if (format != DatasetFormat::GenericJsonl && !body.empty() && body.front() == '[') {
    try {
      for (json& rec : json::parse(body)) records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::DatasetError, std::string("dataset is not valid JSON: ") + e.what());
    }
    return records;
  }
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    ++line_no;
    const std::string_view line = trim(text.substr(start, end - start));
    if (!line.empty()) {
      try {
        records.push_back(json::parse(line));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::DatasetError, fmt::format("line {}: {}", line_no, e.what()));
      }
    }
    start = end + 1;
  }
  return records;
}

std::string substitute_grid(std::string_view text, std::optional<Grid> grid) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{' && i + 2 < text.size() && text[i + 2] == '}' &&
        (text[i + 1] == 'r' || text[i + 1] == 'c')) {
      if (!grid) {
        throw Error(ErrorKind::TemplateError,
                    fmt::format("template placeholder {{{}}} needs a grid", text[i + 1]));
      }
      out += std::to_string(text[i + 1] == 'r' ? grid->rows : grid->cols);
      i += 2;
    } else {
      out += text[i];
    }
  }
  return out;
}

}  // namespace

void QAItem::validate() const {
  auto fail = [this](const std::string& what) {
    throw Error(ErrorKind::DatasetError, fmt::format("item '{}': {}", item_id, what));
  };
  if (item_id.empty()) fail("empty item id");
  if (options.size() < 2 || options.size() > 6) {
    fail(fmt::format("{} options, expected 2 to 6", options.size()));
  }
  for (std::size_t k = 0; k < options.size(); ++k) {
    if (options[k].letter != static_cast<char>('A' + k)) {
      fail(fmt::format("option {} has letter '{}', expected '{}'", k, options[k].letter,
                       static_cast<char>('A' + k)));
    }
  }
  if (option_letters().find(gold) == std::string::npos) {
    fail(fmt::format("gold answer '{}' is not among options {}", gold, option_letters()));
  }
  if (!std::isfinite(duration_seconds) || duration_seconds < 0.0) fail("invalid duration");
}

std::string QAItem::option_letters() const {
  std::string out;
  for (const AnswerOption& o : options) out += o.letter;
  return out;
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "generic" || name == "jsonl" || name == "generic-jsonl") return DatasetFormat::GenericJsonl;
  if (name == "vmme") return DatasetFormat::VmmeJson;
  if (name == "timescope") return DatasetFormat::TimeScopeJson;
  throw Error(ErrorKind::ConfigError, "unknown dataset format '" + std::string(name) + "'");
}

std::string_view to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::GenericJsonl: return "generic";
    case DatasetFormat::VmmeJson: return "vmme";
    case DatasetFormat::TimeScopeJson: return "timescope";
  }
  return "generic";
}

std::vector<QAItem> parse_dataset(std::string_view text, DatasetFormat format) {
  const std::vector<json> records = split_records(text, format);
  std::vector<QAItem> items;
  items.reserve(records.size());
  std::set<std::string> seen;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const json& rec = records[k];
    std::string id;
    if (rec.is_object()) {
      for (const char* key : {"id", "question_id"}) {
        if (rec.contains(key)) {
          id = rec[key].is_string() ? rec[key].get<std::string>() : rec[key].dump();
          break;
        }
      }
    }
    QAItem item;
    try {
      if (!rec.is_object()) throw std::invalid_argument("record is not an object");
      switch (format) {
        case DatasetFormat::GenericJsonl: item = from_generic(rec); break;
        case DatasetFormat::VmmeJson: item = from_vmme(rec); break;
        case DatasetFormat::TimeScopeJson: item = from_timescope(rec); break;
      }
      item.validate();
    } catch (const json::exception& e) {
      dataset_error(k + 1, id, e.what());
    } catch (const std::invalid_argument& e) {
      dataset_error(k + 1, id, e.what());
    } catch (const Error& e) {
      dataset_error(k + 1, id, e.what());
    }
    if (!seen.insert(item.item_id).second) dataset_error(k + 1, id, "duplicate item id");
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<QAItem> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::DatasetError, "cannot open dataset " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return parse_dataset(text, format);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void to_json(json& j, const QAItem& item) {
  json options = json::array();
  for (const AnswerOption& o : item.options) {
    options.push_back({{"letter", std::string(1, o.letter)}, {"text", o.text}});
  }
  j = json{{"id", item.item_id},
           {"video", item.video_uri},
           {"question", item.question},
           {"options", std::move(options)},
           {"answer", std::string(1, item.gold)},
           {"duration_s", item.duration_seconds},
           {"tags", item.tags}};
}

void from_json(const json& j, QAItem& item) { item = from_generic(j); }

std::string serialize_dataset(const std::vector<QAItem>& items) {
  std::string out;
  for (const QAItem& item : items) {
    out += json(item).dump();
    out += '\n';
  }
  return out;
}

// --- prompts -----------------------------------------------------------------

PromptTemplate PromptTemplate::panel_prompt(int number) {
  switch (number) {
    case 1: return {TemplateId::P1, Placement::BeforeQuestion, {}};
    case 2: return {TemplateId::P2, Placement::BeforeQuestion, {}};
    case 3: return {TemplateId::P3, Placement::AfterQuestion, {}};
    default:
      throw Error(ErrorKind::TemplateError, fmt::format("no panel prompt {}", number));
  }
}

PromptTemplate PromptTemplate::custom(std::string text, Placement placement) {
  return {TemplateId::Custom, placement, std::move(text)};
}

PromptTemplate PromptTemplate::parse(std::string_view name) {
  if (name == "default" || name == "none") return standard();
  if (name == "p1") return panel_prompt(1);
  if (name == "p2") return panel_prompt(2);
  if (name == "p3") return panel_prompt(3);
  if (name.starts_with("custom:")) return custom(std::string(name.substr(7)));
  if (name.starts_with("custom-after:")) {
    return custom(std::string(name.substr(13)), Placement::AfterQuestion);
  }
  throw Error(ErrorKind::TemplateError,
              "unknown template '" + std::string(name) + "' (default|p1|p2|p3|custom:<text>)");
}

std::string PromptTemplate::name() const {
  switch (id) {
    case TemplateId::Default: return "default";
    case TemplateId::P1: return "p1";
    case TemplateId::P2: return "p2";
    case TemplateId::P3: return "p3";
    case TemplateId::Custom:
      return (placement == Placement::AfterQuestion ? "custom-after:" : "custom:") + custom_text;
  }
  return "default";
}

std::string_view template_text(TemplateId id) {
  switch (id) {
    case TemplateId::P1: return kPrompt1;
    case TemplateId::P2: return kPrompt2;
    case TemplateId::P3: return kPrompt3;
    default: return {};
  }
}

std::string render_prompt(const QAItem& item, const PromptTemplate& tmpl, std::optional<Grid> grid) {
  std::string body = item.question;
  body += '\n';
  for (const AnswerOption& o : item.options) body += fmt::format("{}. {}\n", o.letter, o.text);

  switch (tmpl.id) {
    case TemplateId::Default:
      return body + std::string(kAnswerInstruction);
    case TemplateId::P1:
    case TemplateId::P2:
      return std::string(template_text(tmpl.id)) + "\n" + body + std::string(kAnswerInstruction);
    case TemplateId::P3:
      if (!grid) throw Error(ErrorKind::TemplateError, "prompt p3 needs the panel grid");
      return body + substitute_grid(kPrompt3, grid) + "\n";
    case TemplateId::Custom: {
      if (tmpl.custom_text.empty()) return body;
      const std::string text = substitute_grid(tmpl.custom_text, grid);
      return tmpl.placement == Placement::BeforeQuestion ? text + "\n" + body : body + text + "\n";
    }
  }
  return body;
}

std::vector<AnswerOption> extract_options(std::string_view prompt) {
  std::vector<AnswerOption> out;
  std::size_t start = 0;
  while (start < prompt.size()) {
    const std::size_t end = std::min(prompt.find('\n', start), prompt.size());
    const std::string_view line = prompt.substr(start, end - start);
    const char expected = static_cast<char>('A' + out.size());
    if (line.size() >= 3 && line[0] == expected && line[1] == '.' && line[2] == ' ') {
      out.push_back({expected, std::string(line.substr(3))});
    }
    start = end + 1;
  }
  return out;
}

// --- duration buckets ----------------------------------------------------------

DurationBuckets::DurationBuckets(std::vector<Bucket> buckets) : buckets_(std::move(buckets)) {
  if (buckets_.empty()) throw Error(ErrorKind::ConfigError, "bucket list is empty");
  std::set<std::string> names;
  for (std::size_t k = 0; k < buckets_.size(); ++k) {
    if (!names.insert(buckets_[k].name).second) {
      throw Error(ErrorKind::ConfigError, "duplicate bucket name '" + buckets_[k].name + "'");
    }
    if (k > 0 && !(buckets_[k].upper > buckets_[k - 1].upper)) {
      throw Error(ErrorKind::ConfigError, "bucket bounds must strictly increase");
    }
    if (buckets_[k].upper < 0.0) throw Error(ErrorKind::ConfigError, "negative bucket bound");
  }
  if (!std::isinf(buckets_.back().upper)) {
    throw Error(ErrorKind::ConfigError, "last bucket must be unbounded");
  }
}

DurationBuckets DurationBuckets::vmme() {
  return DurationBuckets({{"short", 120.0}, {"medium", 1000.0}, {"long", kInf}});
}

const std::vector<double>& timescope_lengths() {
  static const std::vector<double> lengths{60,   120,   180,   300,   600,   1200, 1800,
                                           3600, 7200, 10800, 18000, 28800, 36000};
  return lengths;
}

DurationBuckets DurationBuckets::timescope() {
  std::vector<Bucket> out;
  const auto& lengths = timescope_lengths();
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    const bool last = k + 1 == lengths.size();
    out.push_back({fmt::format("{}s", lengths[k]), last ? kInf : lengths[k]});
  }
  return DurationBuckets(std::move(out));
}

DurationBuckets DurationBuckets::timescope_coarse() {
  return DurationBuckets({{"short", 10800.0}, {"long", kInf}});
}

DurationBuckets DurationBuckets::single() { return DurationBuckets({{"all", kInf}}); }

DurationBuckets DurationBuckets::parse(std::string_view spec) {
  if (spec == "vmme") return vmme();
  if (spec == "timescope") return timescope();
  if (spec == "timescope-coarse") return timescope_coarse();
  if (spec == "all" || spec == "none") return single();
  std::vector<Bucket> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t end = std::min(spec.find(',', start), spec.size());
    const std::string_view part = trim(spec.substr(start, end - start));
    const auto colon = part.find(':');
    if (colon == std::string_view::npos) {
      out.push_back({std::string(part), kInf});
    } else {
      double upper = 0.0;
      const std::string_view num = trim(part.substr(colon + 1));
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), upper);
      if (ec != std::errc() || ptr != num.data() + num.size()) {
        throw Error(ErrorKind::ConfigError, "bad bucket bound in '" + std::string(part) + "'");
      }
      out.push_back({std::string(trim(part.substr(0, colon))), upper});
    }
    start = end + 1;
  }
  return DurationBuckets(std::move(out));
}

const std::string& DurationBuckets::assign(double duration_seconds) const {
  for (const Bucket& b : buckets_) {
    if (duration_seconds <= b.upper) return b.name;
  }
  return buckets_.back().name;
}

std::string DurationBuckets::describe() const {
  std::string out;
  for (const Bucket& b : buckets_) {
    if (!out.empty()) out += ',';
    out += std::isinf(b.upper) ? b.name : fmt::format("{}:{}", b.name, b.upper);
  }
  return out;
}

std::map<std::string, std::vector<QAItem>> bucket_items(const std::vector<QAItem>& items,
                                                        const DurationBuckets& buckets) {
  std::map<std::string, std::vector<QAItem>> out;
  for (const QAItem& item : items) out[buckets.assign(item.duration_seconds)].push_back(item);
  return out;
}

}  // namespace vpanel
