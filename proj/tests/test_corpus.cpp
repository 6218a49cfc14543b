#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "aan/corpus.hpp"
#include "aan/rng.hpp"
#include "oracles.hpp"

using namespace aan::corpus;

namespace {

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "aan_corpus_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
  auto path = (scratch_dir() / name).string();
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("tokenizer lowercases and isolates punctuation") {
  REQUIRE(tokenize("Great movie!") == std::vector<std::string>{"great", "movie", "!"});
  REQUIRE(tokenize("").empty());
  REQUIRE(tokenize("   \t\n ").empty());
  REQUIRE(tokenize("rate this 8/10") ==
          std::vector<std::string>{"rate", "this", "8", "/", "10"});
}

TEST_CASE("tokenizer agrees with the regex reference") {
  std::vector<std::string> samples = {
      "rate this 8/10",
      "It's a so-so film... really!",
      "A+    grade, 100% (would watch again)",
      "e.g. NASDAQ:MSFT up 3.5%?!",
      "don't stop_me now",
  };
  for (const auto& s : samples) {
    CAPTURE(s);
    REQUIRE(tokenize(s) == oracle::regex_tokenize(s));
  }
}

TEST_CASE("tokenizer passes UTF-8 bytes through") {
  auto toks = tokenize("caf\xc3\xa9 Club");
  REQUIRE(toks == std::vector<std::string>{"caf\xc3\xa9", "club"});
}

TEST_CASE("vocabulary thresholding and caps") {
  Vocabulary v = build_vocabulary({{"a", "a", "b"}}, 2);
  REQUIRE(v.size() == 2);
  REQUIRE(v.id_or_unk("a") == 1);
  REQUIRE(v.id_or_unk("b") == Vocabulary::kUnkId);

  Vocabulary w = build_vocabulary({{"x"}}, 1, 10);
  REQUIRE(w.size() == 2);
  REQUIRE(w.id_or_unk("x") == 1);
  REQUIRE(w.token(0) == std::string(Vocabulary::kUnkToken));

  REQUIRE_THROWS(build_vocabulary({{"a"}, {"b"}}, 2));
}

TEST_CASE("vocabulary ties break lexicographically and cap keeps the top") {
  // b and c tie on count; b sorts first
  Vocabulary v = build_vocabulary({{"c", "b", "c", "b", "a"}}, 1, 3);
  REQUIRE(v.size() == 3);
  REQUIRE(v.id_or_unk("b") == 1);
  REQUIRE(v.id_or_unk("c") == 2);
  REQUIRE(v.id_or_unk("a") == Vocabulary::kUnkId);
}

TEST_CASE("vocabulary on a large synthetic corpus matches a counting oracle") {
  aan::ndgrad::Rng rng(99);
  std::vector<std::vector<std::string>> docs(1000);
  for (auto& d : docs) {
    std::size_t len = 3 + rng.below(20);
    for (std::size_t i = 0; i < len; ++i)
      d.push_back("w" + std::to_string(rng.below(300)));
  }
  const int min_count = 5;
  Vocabulary v = build_vocabulary(docs, min_count);

  // independent count
  std::map<std::string, long long> counts;
  for (const auto& d : docs)
    for (const auto& t : d) ++counts[t];
  std::vector<std::pair<std::string, long long>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  REQUIRE(v.size() == kept.size() + 1);
  for (std::size_t i = 0; i < kept.size(); ++i)
    REQUIRE(v.token(static_cast<int>(i + 1)) == kept[i].first);
}

TEST_CASE("jsonl ingestion preserves order and counts") {
  auto path = write_file("small.jsonl",
                         R"({"text": "good good movie", "label": "pos"})"
                         "\n"
                         R"({"text": "bad movie", "label": "neg", "extra": 42})"
                         "\n");
  Corpus c = load_jsonl(path);
  REQUIRE(c.size() == 2);
  REQUIRE(c.labels().size() == 2);
  REQUIRE(c.labels().id("pos") == 0);  // first-seen order
  REQUIRE(c.labels().id("neg") == 1);
  REQUIRE(c.docs()[0].tokens.size() == 3);
  int good = c.vocab().id_or_unk("good");
  int movie = c.vocab().id_or_unk("movie");
  REQUIRE(c.frequency(good) == 2);
  REQUIRE(c.frequency(movie) == 2);

  // frequency table equals a brute-force recount
  std::map<int, long long> recount;
  for (const auto& d : c.docs())
    for (int t : d.tokens) ++recount[t];
  for (const auto& [w, n] : recount) REQUIRE(c.frequency(w) == n);

  // total mass equals total token count
  long long total = 0;
  for (const auto& d : c.docs()) total += static_cast<long long>(d.tokens.size());
  REQUIRE(c.total_tokens() == total);
}

TEST_CASE("jsonl errors carry line numbers") {
  auto path = write_file("broken.jsonl",
                         R"({"text": "fine here", "label": "a"})"
                         "\n"
                         "{not json}\n");
  try {
    load_jsonl(path);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
  }

  auto empty_doc = write_file("empty_doc.jsonl",
                              R"({"text": "ok words", "label": "a"})"
                              "\n"
                              R"({"text": "   ", "label": "b"})"
                              "\n");
  try {
    load_jsonl(empty_doc);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
  }

  auto missing = write_file("missing.jsonl", R"({"text": "no label"})" "\n");
  REQUIRE_THROWS(load_jsonl(missing));
}

TEST_CASE("corpus round-trips through jsonl") {
  std::string lines;
  aan::ndgrad::Rng rng(4);
  for (int i = 0; i < 40; ++i) {
    std::string text;
    for (int t = 0; t < 8; ++t) text += "tok" + std::to_string(rng.below(30)) + " ";
    lines += R"({"text": ")" + text + R"(", "label": "l)" +
             std::to_string(rng.below(3)) + "\"}\n";
  }
  auto path = write_file("roundtrip.jsonl", lines);
  Corpus a = load_jsonl(path);
  auto out = (scratch_dir() / "roundtrip_out.jsonl").string();
  save_jsonl(a, out);
  Corpus b = load_jsonl(out, a.vocab(), a.labels());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.docs()[i].tokens == b.docs()[i].tokens);
    REQUIRE(a.docs()[i].gold_label == b.docs()[i].gold_label);
  }
}

TEST_CASE("vocabulary file round-trips") {
  Vocabulary v = build_vocabulary({{"apple", "pear", "apple"}}, 1);
  auto path = (scratch_dir() / "vocab.json").string();
  save_vocabulary(v, path);
  Vocabulary w = load_vocabulary(path);
  REQUIRE(w.size() == v.size());
  for (int i = 0; i < static_cast<int>(v.size()); ++i)
    REQUIRE(w.token(i) == v.token(i));
}

TEST_CASE("split is deterministic, disjoint, and rebuilds frequencies") {
  std::string lines;
  for (int i = 0; i < 100; ++i)
    lines += R"({"text": "doc number )" + std::to_string(i) + R"( words", "label": "l)" +
             std::to_string(i % 2) + "\"}\n";
  auto path = write_file("split.jsonl", lines);
  Corpus c = load_jsonl(path);

  auto [tr1, dv1, te1] = split(c, 0.8, 0.1, 0.1, 77);
  auto [tr2, dv2, te2] = split(c, 0.8, 0.1, 0.1, 77);
  REQUIRE(tr1.size() == 80);
  REQUIRE(dv1.size() == 10);
  REQUIRE(te1.size() == 10);

  auto ids = [](const Corpus& x) {
    std::vector<std::int64_t> v;
    for (const auto& d : x.docs()) v.push_back(d.id);
    return v;
  };
  REQUIRE(ids(tr1) == ids(tr2));
  REQUIRE(ids(dv1) == ids(dv2));
  REQUIRE(ids(te1) == ids(te2));

  // disjoint and covering
  std::set<std::int64_t> all;
  for (const auto& part : {tr1, dv1, te1})
    for (const auto& d : part.docs()) REQUIRE(all.insert(d.id).second);
  REQUIRE(all.size() == c.size());

  // per-split frequency tables are recounts over their own documents
  for (const auto& part : {tr1, dv1, te1}) {
    std::map<int, long long> recount;
    for (const auto& d : part.docs())
      for (int t : d.tokens) ++recount[t];
    for (const auto& [w, n] : recount) REQUIRE(part.frequency(w) == n);
  }

  // different seed, different order
  auto [tr3, dv3, te3] = split(c, 0.8, 0.1, 0.1, 78);
  REQUIRE(ids(tr3) != ids(tr1));

  REQUIRE_THROWS(split(c, 0.996, 0.002, 0.002, 1));  // dev/test would be empty
  REQUIRE_THROWS(split(c, 0.5, 0.5, 0.2, 1));        // ratios do not sum to 1
}

TEST_CASE("split serializations are byte identical across runs") {
  std::string lines;
  for (int i = 0; i < 30; ++i)
    lines += R"({"text": "alpha beta gamma )" + std::to_string(i) +
             R"(", "label": "x)" + std::to_string(i % 2) + "\"}\n";
  auto path = write_file("split_bytes.jsonl", lines);
  std::string first, second;
  for (int run = 0; run < 2; ++run) {
    Corpus c = load_jsonl(path);
    auto [tr, dv, te] = split(c, 0.6, 0.2, 0.2, 5);
    auto out = (scratch_dir() / ("split_run" + std::to_string(run) + ".jsonl")).string();
    save_jsonl(tr, out);
    (run == 0 ? first : second) = read_file(out);
  }
  REQUIRE(!first.empty());
  REQUIRE(first == second);
}

TEST_CASE("wordlike filter") {
  REQUIRE(is_wordlike("movie"));
  REQUIRE(is_wordlike("8"));
  REQUIRE(is_wordlike("caf\xc3\xa9"));
  REQUIRE(!is_wordlike("!"));
  REQUIRE(!is_wordlike("..."));
}
