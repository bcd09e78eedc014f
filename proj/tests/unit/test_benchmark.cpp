#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vpanel/benchmark.hpp"

using namespace vpanel;
using vpanel::testing::Gen;
using vpanel::testing::TempDir;

namespace {

const std::filesystem::path kFixtures = FIXTURE_DIR;

QAItem four_option_item() {
  QAItem item;
  item.item_id = "x";
  item.video_uri = "v.mp4";
  item.question = "What happens after the door opens?";
  item.options = {{'A', "A dog runs in"}, {'B', "It closes"}, {'C', "Nothing"}, {'D', "A cat leaves"}};
  item.gold = 'A';
  return item;
}

std::size_t count(const std::string& hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

TEST(Dataset, GenericRecords) {
  const auto items = load_dataset(kFixtures / "generic_sample.jsonl", DatasetFormat::GenericJsonl);
  ASSERT_EQ(items.size(), 3u);
  EXPECT_EQ(items[0].item_id, "q1");
  EXPECT_EQ(items[0].options.size(), 4u);
  EXPECT_EQ(items[0].options[1].text, "onions");
  EXPECT_EQ(items[0].gold, 'A');
  EXPECT_DOUBLE_EQ(items[0].duration_seconds, 95.5);
  EXPECT_EQ(items[0].tags, std::vector<std::string>{"cooking"});
  // True/false maps onto A/B.
  EXPECT_EQ(items[1].option_letters(), "AB");
  EXPECT_EQ(items[1].gold, 'B');
  // Answer given as option text.
  EXPECT_EQ(items[2].gold, 'B');
}

TEST(Dataset, GoldOutsideOptions) {
  const std::string text =
      R"({"id": "bad", "video": "v", "question": "q", "options": ["a", "b", "c", "d"], "answer": "E"})";
  try {
    parse_dataset(text, DatasetFormat::GenericJsonl);
    FAIL() << "expected DatasetError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DatasetError);
    EXPECT_NE(std::string(e.what()).find("record 1 (id 'bad')"), std::string::npos) << e.what();
  }
}

TEST(Dataset, InvariantViolations) {
  const char* bad[] = {
      R"({"id": "one", "video": "v", "question": "q", "options": ["only"], "answer": "A"})",
      R"({"id": "seven", "video": "v", "question": "q", "options": ["1","2","3","4","5","6","7"], "answer": "A"})",
      R"({"id": "gap", "video": "v", "question": "q", "options": [{"letter": "A", "text": "x"}, {"letter": "C", "text": "y"}], "answer": "A"})",
      R"({"id": "neg", "video": "v", "question": "q", "options": ["x", "y"], "answer": "A", "duration_s": -1})",
      R"({"video": "v", "question": "q", "options": ["x", "y"], "answer": "A"})",
      R"({"id": "noans", "video": "v", "question": "q", "options": ["x", "y"], "answer": "maybe"})",
      R"(not json)",
  };
  for (const char* line : bad) {
    EXPECT_VPANEL_ERROR(parse_dataset(line, DatasetFormat::GenericJsonl), ErrorKind::DatasetError);
  }
  const std::string dup =
      R"({"id": "d", "video": "v", "question": "q", "options": ["x", "y"], "answer": "A"})"
      "\n"
      R"({"id": "d", "video": "w", "question": "q", "options": ["x", "y"], "answer": "B"})";
  EXPECT_VPANEL_ERROR(parse_dataset(dup, DatasetFormat::GenericJsonl), ErrorKind::DatasetError);
}

TEST(Dataset, VmmeRecords) {
  const auto items = load_dataset(kFixtures / "vmme_sample.json", DatasetFormat::VmmeJson);
  ASSERT_EQ(items.size(), 3u);
  EXPECT_EQ(items[0].item_id, "001-1");
  EXPECT_EQ(items[0].video_uri, "fFjv93ACGo8.mp4");
  EXPECT_EQ(items[0].options[2].text, "2.");
  EXPECT_EQ(items[0].gold, 'C');
  EXPECT_DOUBLE_EQ(items[0].duration_seconds, 80.0);
  EXPECT_DOUBLE_EQ(items[1].duration_seconds, 500.0);
  EXPECT_DOUBLE_EQ(items[2].duration_seconds, 2500.0);
  EXPECT_NE(std::find(items[2].tags.begin(), items[2].tags.end(), "duration:long"), items[2].tags.end());

  const auto buckets = bucket_items(items, DurationBuckets::vmme());
  ASSERT_EQ(buckets.size(), 3u);
  for (const char* name : {"short", "medium", "long"}) EXPECT_EQ(buckets.at(name).size(), 1u) << name;
}

TEST(Dataset, TimeScopeThirteenBuckets) {
  const auto items = load_dataset(kFixtures / "timescope_sample.json", DatasetFormat::TimeScopeJson);
  ASSERT_EQ(items.size(), 13u);
  EXPECT_EQ(items[4].options[3].text, "yellow");
  const auto buckets = bucket_items(items, DurationBuckets::timescope());
  EXPECT_EQ(buckets.size(), 13u);
  std::set<std::string> names;
  for (const auto& item : items) names.insert(DurationBuckets::timescope().assign(item.duration_seconds));
  EXPECT_EQ(names.size(), 13u);
}

TEST(Dataset, TimeScopeLengthsMatchReportedAverages) {
  // Short/medium subsets average roughly 2590 s; the long subset covers
  // 8 h and 10 h videos.
  const auto& len = timescope_lengths();
  ASSERT_EQ(len.size(), 13u);
  EXPECT_EQ(len.front(), 60.0);
  EXPECT_EQ(len.back(), 36000.0);
  const double short_avg = std::accumulate(len.begin(), len.begin() + 10, 0.0) / 10.0;
  EXPECT_NEAR(short_avg, 2590.0, 10.0);
}

TEST(Dataset, CanonicalRoundTrip) {
  for (const auto& [file, format] : {std::pair{"generic_sample.jsonl", DatasetFormat::GenericJsonl},
                                     std::pair{"vmme_sample.json", DatasetFormat::VmmeJson},
                                     std::pair{"timescope_sample.json", DatasetFormat::TimeScopeJson}}) {
    const auto items = load_dataset(kFixtures / file, format);
    const std::string once = serialize_dataset(items);
    const auto reloaded = parse_dataset(once, DatasetFormat::GenericJsonl);
    EXPECT_EQ(reloaded, items) << file;
    EXPECT_EQ(serialize_dataset(reloaded), once) << file;
  }
}

TEST(Prompt, DefaultEndsWithInstruction) {
  const QAItem item = four_option_item();
  const std::string p = render_prompt(item, PromptTemplate::standard());
  EXPECT_EQ(p,
            "What happens after the door opens?\n"
            "A. A dog runs in\nB. It closes\nC. Nothing\nD. A cat leaves\n"
            "Answer with the option's letter from the given choices directly.\n");
  EXPECT_TRUE(ends_with(p, kAnswerInstruction));
  EXPECT_EQ(count(p, kAnswerInstruction), 1u);
  EXPECT_EQ(count(p, "panel"), 0u);
}

TEST(Prompt, PanelTemplates) {
  const QAItem item = four_option_item();
  const std::string p1 = render_prompt(item, PromptTemplate::panel_prompt(1), Grid{2, 2});
  EXPECT_NE(p1.find("like reading a book"), std::string::npos);
  EXPECT_LT(p1.find("like reading a book"), p1.find(item.question));
  EXPECT_TRUE(ends_with(p1, kAnswerInstruction));

  const std::string p2 = render_prompt(item, PromptTemplate::panel_prompt(2), Grid{2, 2});
  EXPECT_NE(p2.find("treat the panels as frames"), std::string::npos);
  EXPECT_LT(p2.find("treat the panels as frames"), p2.find(item.question));

  const std::string p3 = render_prompt(item, PromptTemplate::panel_prompt(3), Grid{2, 3});
  const auto at = p3.find("divided into 2 rows and 3 columns");
  ASSERT_NE(at, std::string::npos);
  EXPECT_GT(at, p3.find("D. A cat leaves"));
  EXPECT_EQ(p3.find("{r}"), std::string::npos);
  EXPECT_EQ(count(p3, "Answer with the option's letter from the given choices directly."), 1u);

  EXPECT_VPANEL_ERROR(render_prompt(item, PromptTemplate::panel_prompt(3)), ErrorKind::TemplateError);
}

TEST(Prompt, CustomTemplates) {
  const QAItem item = four_option_item();
  EXPECT_EQ(render_prompt(item, PromptTemplate::custom("")),
            "What happens after the door opens?\n"
            "A. A dog runs in\nB. It closes\nC. Nothing\nD. A cat leaves\n");
  const std::string after = render_prompt(
      item, PromptTemplate::custom("Grid is {r}x{c}.", Placement::AfterQuestion), Grid{3, 1});
  EXPECT_TRUE(ends_with(after, "D. A cat leaves\nGrid is 3x1.\n"));
  EXPECT_VPANEL_ERROR(render_prompt(item, PromptTemplate::custom("{c} columns")), ErrorKind::TemplateError);
}

TEST(Prompt, ContainsQuestionAndOptionsOnce) {
  const QAItem item = four_option_item();
  for (const char* name : {"default", "p1", "p2", "p3", "custom:Watch closely."}) {
    const std::string p = render_prompt(item, PromptTemplate::parse(name), Grid{2, 2});
    EXPECT_EQ(count(p, item.question), 1u) << name;
    EXPECT_EQ(extract_options(p), item.options) << name;
  }
}

TEST(Prompt, TemplateNames) {
  for (const char* name : {"default", "p1", "p2", "p3", "custom:Look at {r} rows."}) {
    EXPECT_EQ(PromptTemplate::parse(name).name(), name);
  }
  EXPECT_EQ(PromptTemplate::parse("p3").id, TemplateId::P3);
  EXPECT_VPANEL_ERROR(PromptTemplate::parse("p9"), ErrorKind::TemplateError);
  EXPECT_EQ(template_text(TemplateId::P2),
            "When answering, treat the panels as frames from one video, in order from left to right, "
            "then top to bottom.");
}

TEST(Buckets, Partition) {
  const auto vmme = DurationBuckets::vmme();
  EXPECT_EQ(vmme.assign(0), "short");
  EXPECT_EQ(vmme.assign(120), "short");
  EXPECT_EQ(vmme.assign(120.5), "medium");
  EXPECT_EQ(vmme.assign(1000), "medium");
  EXPECT_EQ(vmme.assign(1e9), "long");

  EXPECT_TRUE(bucket_items({}, vmme).empty());

  QAItem zero = four_option_item();
  std::vector<QAItem> zeros;
  for (int i = 0; i < 5; ++i) {
    zero.item_id = "z" + std::to_string(i);
    zeros.push_back(zero);
  }
  const auto all_first = bucket_items(zeros, vmme);
  ASSERT_EQ(all_first.size(), 1u);
  EXPECT_EQ(all_first.at("short").size(), 5u);
}

TEST(Buckets, EveryItemOnce) {
  Gen g(401);
  const std::vector<DurationBuckets> presets{DurationBuckets::vmme(), DurationBuckets::timescope(),
                                             DurationBuckets::timescope_coarse(), DurationBuckets::single()};
  for (int t = 0; t < 50; ++t) {
    std::vector<QAItem> items;
    const int n = g.irange(0, 40);
    for (int i = 0; i < n; ++i) {
      QAItem item = four_option_item();
      item.item_id = std::to_string(i);
      item.duration_seconds = g.coin() ? g.uniform(0, 40000) : g.pick(timescope_lengths());
      items.push_back(item);
    }
    for (const auto& b : presets) {
      std::size_t total = 0;
      for (const auto& [name, members] : bucket_items(items, b)) {
        total += members.size();
        for (const auto& m : members) ASSERT_EQ(b.assign(m.duration_seconds), name);
      }
      ASSERT_EQ(total, items.size());
    }
  }
}

TEST(Buckets, ParseSpec) {
  const auto b = DurationBuckets::parse("tiny:30,mid:300,rest");
  ASSERT_EQ(b.buckets().size(), 3u);
  EXPECT_EQ(b.assign(30), "tiny");
  EXPECT_EQ(b.assign(31), "mid");
  EXPECT_EQ(b.assign(301), "rest");
  EXPECT_EQ(DurationBuckets::parse(b.describe()).describe(), b.describe());
  EXPECT_EQ(DurationBuckets::parse("timescope").buckets().size(), 13u);
  EXPECT_EQ(DurationBuckets::parse("all").assign(5), "all");
  EXPECT_VPANEL_ERROR(DurationBuckets::parse("a:300,b:30,c"), ErrorKind::ConfigError);
  EXPECT_VPANEL_ERROR(DurationBuckets::parse("a:30,b:60"), ErrorKind::ConfigError);
  EXPECT_VPANEL_ERROR(DurationBuckets::parse("a:soon,b"), ErrorKind::ConfigError);
  EXPECT_VPANEL_ERROR(DurationBuckets::parse("a:30,a"), ErrorKind::ConfigError);
}
