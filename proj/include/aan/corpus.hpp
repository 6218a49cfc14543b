#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "aan/common.hpp"
#include "aan/rng.hpp"

namespace aan::corpus {

struct TokenizerConfig {
  bool lowercase = true;
  bool isolate_punctuation = true;
};

// Lowercase, split on whitespace, and break ASCII punctuation out into
// standalone single-character tokens. Bytes >= 0x80 pass through untouched,
// so UTF-8 text survives byte-for-byte (no multilingual normalization).
inline std::vector<std::string> tokenize(std::string_view text,
                                         const TokenizerConfig& cfg = {}) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (cfg.isolate_punctuation && c < 0x80 && std::ispunct(c)) {
      flush();
      out.push_back(std::string(1, ch));
    } else {
      cur.push_back(cfg.lowercase && c < 0x80
                        ? static_cast<char>(std::tolower(c))
                        : ch);
    }
  }
  flush();
  return out;
}

// True if the token carries at least one alphanumeric (or non-ASCII) byte.
// Pure punctuation is filtered from ranked explanation output.
inline bool is_wordlike(std::string_view token) {
  for (char ch : token) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) return true;
  }
  return false;
}

class Vocabulary {
 public:
  static constexpr int kUnkId = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() { add(kUnkToken); }

  int add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    return id;
  }

  int id_or_unk(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& token) const {
    return token_to_id_.count(token) != 0;
  }

  const std::string& token(int id) const { return id_to_token_.at(id); }
  std::size_t size() const { return id_to_token_.size(); }

  nlohmann::json to_json() const { return nlohmann::json(id_to_token_); }

  static Vocabulary from_json(const nlohmann::json& j) {
    check(j.is_array() && !j.empty(), "vocabulary: expected non-empty JSON array");
    Vocabulary v;
    check(j[0].get<std::string>() == kUnkToken, "vocabulary: id 0 must be the unknown token");
    for (std::size_t i = 1; i < j.size(); ++i) v.add(j[i].get<std::string>());
    check(v.size() == j.size(), "vocabulary: duplicate tokens in file");
    return v;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

class LabelSet {
 public:
  int add(const std::string& label) {
    auto it = label_to_id_.find(label);
    if (it != label_to_id_.end()) return it->second;
    int id = static_cast<int>(id_to_label_.size());
    id_to_label_.push_back(label);
    label_to_id_.emplace(label, id);
    return id;
  }

  int id(const std::string& label) const {
    auto it = label_to_id_.find(label);
    check(it != label_to_id_.end(), "unknown label: " + label);
    return it->second;
  }

  const std::string& name(int id) const { return id_to_label_.at(id); }
  std::size_t size() const { return id_to_label_.size(); }

  nlohmann::json to_json() const { return nlohmann::json(id_to_label_); }

  static LabelSet from_json(const nlohmann::json& j) {
    LabelSet ls;
    for (const auto& l : j) ls.add(l.get<std::string>());
    check(ls.size() == j.size(), "label set: duplicate labels");
    return ls;
  }

 private:
  std::vector<std::string> id_to_label_;
  std::unordered_map<std::string, int> label_to_id_;
};

struct Document {
  std::int64_t id = 0;
  std::vector<int> tokens;  // vocabulary ids, length >= 1
  int gold_label = 0;
  std::string raw_text;
};

// Documents plus the corpus-wide token frequency table. The table holds raw
// integer counts so keyword-score denominators stay exact.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::string name, Vocabulary vocab, LabelSet labels)
      : name_(std::move(name)), vocab_(std::move(vocab)), labels_(std::move(labels)),
        freq_(vocab_.size(), 0) {}

  void add_document(Document doc) {
    check(!doc.tokens.empty(), "corpus: empty document rejected");
    for (int t : doc.tokens) {
      check(t >= 0 && static_cast<std::size_t>(t) < vocab_.size(),
            "corpus: token id out of range");
      ++freq_[t];
    }
    index_[doc.id] = docs_.size();
    docs_.push_back(std::move(doc));
  }

  const std::vector<Document>& docs() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }
  const Vocabulary& vocab() const { return vocab_; }
  const LabelSet& labels() const { return labels_; }

  std::int64_t frequency(int word_id) const {
    return word_id >= 0 && static_cast<std::size_t>(word_id) < freq_.size()
               ? freq_[word_id]
               : 0;
  }
  const std::vector<std::int64_t>& frequency_table() const { return freq_; }

  const Document& by_id(std::int64_t doc_id) const {
    auto it = index_.find(doc_id);
    check(it != index_.end(), "corpus: no document with id " + std::to_string(doc_id));
    return docs_[it->second];
  }

  std::int64_t total_tokens() const {
    std::int64_t n = 0;
    for (auto c : freq_) n += c;
    return n;
  }

 private:
  std::string name_;
  Vocabulary vocab_;
  LabelSet labels_;
  std::vector<Document> docs_;
  std::vector<std::int64_t> freq_;
  std::unordered_map<std::int64_t, std::size_t> index_;
};

// Keep tokens seen at least min_count times, most frequent first, ties
// broken lexicographically; everything else maps to <unk> (id 0).
// max_size caps the total entry count including <unk>; 0 means unlimited.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                                   int min_count = 1, std::size_t max_size = 0) {
  check(min_count >= 1, "build_vocabulary: min_count must be >= 1");
  std::map<std::string, std::int64_t> counts;
  for (const auto& doc : docs)
    for (const auto& tok : doc) ++counts[tok];
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  check(!kept.empty(), "build_vocabulary: no token meets min_count");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (max_size > 0 && kept.size() > max_size - 1) kept.resize(max_size - 1);
  Vocabulary vocab;
  for (const auto& [tok, n] : kept) vocab.add(tok);
  return vocab;
}

struct IngestOptions {
  TokenizerConfig tokenizer;
  int min_count = 1;
  std::size_t max_vocab = 0;  // 0 = unlimited
  std::string name;
};

namespace detail {

struct RawDoc {
  std::string text;
  std::string label;
  std::vector<std::string> tokens;
};

inline std::vector<RawDoc> read_jsonl(const std::string& path, const TokenizerConfig& tok) {
  std::ifstream in(path);
  check(in.good(), "cannot open corpus file: " + path);
  std::vector<RawDoc> raws;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    check(!j.is_discarded(), path + ": line " + std::to_string(line_no) + ": malformed JSON");
    check(j.is_object() && j.contains("text") && j["text"].is_string() &&
              j.contains("label") && j["label"].is_string(),
          path + ": line " + std::to_string(line_no) +
              ": expected object with string fields \"text\" and \"label\"");
    RawDoc r;
    r.text = j["text"].get<std::string>();
    r.label = j["label"].get<std::string>();
    r.tokens = tokenize(r.text, tok);
    check(!r.tokens.empty(),
          path + ": line " + std::to_string(line_no) + ": document has no tokens");
    raws.push_back(std::move(r));
  }
  check(!raws.empty(), path + ": corpus is empty");
  return raws;
}

}  // namespace detail

// Load a JSONL corpus ({"text": ..., "label": ...} per line), building the
// vocabulary and label set from the file itself. Labels register in
// first-seen order.
inline Corpus load_jsonl(const std::string& path, const IngestOptions& opt = {}) {
  auto raws = detail::read_jsonl(path, opt.tokenizer);
  std::vector<std::vector<std::string>> token_docs;
  token_docs.reserve(raws.size());
  for (const auto& r : raws) token_docs.push_back(r.tokens);
  Vocabulary vocab = build_vocabulary(token_docs, opt.min_count, opt.max_vocab);
  LabelSet labels;
  for (const auto& r : raws) labels.add(r.label);
  check(labels.size() >= 2, path + ": corpus must contain at least two labels");
  Corpus corpus(opt.name.empty() ? path : opt.name, std::move(vocab), std::move(labels));
  std::int64_t next_id = 0;
  for (auto& r : raws) {
    Document d;
    d.id = next_id++;
    d.gold_label = corpus.labels().id(r.label);
    d.raw_text = std::move(r.text);
    d.tokens.reserve(r.tokens.size());
    for (const auto& t : r.tokens) d.tokens.push_back(corpus.vocab().id_or_unk(t));
    corpus.add_document(std::move(d));
  }
  return corpus;
}

// Load a corpus against an existing vocabulary and label set (e.g. a test
// corpus mapped through a trained model's vocabulary).
inline Corpus load_jsonl(const std::string& path, const Vocabulary& vocab,
                         const LabelSet& labels, const TokenizerConfig& tok = {},
                         std::string name = "") {
  auto raws = detail::read_jsonl(path, tok);
  Corpus corpus(name.empty() ? path : std::move(name), vocab, labels);
  std::int64_t next_id = 0;
  for (auto& r : raws) {
    Document d;
    d.id = next_id++;
    d.gold_label = corpus.labels().id(r.label);
    d.raw_text = std::move(r.text);
    d.tokens.reserve(r.tokens.size());
    for (const auto& t : r.tokens) d.tokens.push_back(corpus.vocab().id_or_unk(t));
    corpus.add_document(std::move(d));
  }
  return corpus;
}

inline void save_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write corpus file: " + path);
  for (const auto& d : corpus.docs()) {
    nlohmann::json j;
    j["text"] = d.raw_text;
    j["label"] = corpus.labels().name(d.gold_label);
    out << j.dump() << "\n";
  }
}

inline void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write vocabulary file: " + path);
  out << vocab.to_json().dump(2) << "\n";
}

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open vocabulary file: " + path);
  nlohmann::json j;
  in >> j;
  return Vocabulary::from_json(j);
}

// Deterministic shuffled split. Boundaries are llround(N * cumulative
// ratio); every split must end up non-empty.
inline std::tuple<Corpus, Corpus, Corpus> split(const Corpus& corpus,
                                                double train_ratio, double dev_ratio,
                                                double test_ratio, std::uint64_t seed) {
  check(train_ratio > 0 && dev_ratio > 0 && test_ratio > 0,
        "split: ratios must be positive");
  check(std::fabs(train_ratio + dev_ratio + test_ratio - 1.0) < 1e-9,
        "split: ratios must sum to 1");
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  ndgrad::Rng rng(seed);
  rng.shuffle(order);
  auto nd = static_cast<double>(n);
  std::size_t b1 = static_cast<std::size_t>(std::llround(nd * train_ratio));
  std::size_t b2 = static_cast<std::size_t>(std::llround(nd * (train_ratio + dev_ratio)));
  check(b1 >= 1 && b2 > b1 && n > b2, "split: a split would be empty");
  auto make = [&](std::size_t lo, std::size_t hi, const char* tag) {
    Corpus c(corpus.name() + ":" + tag, corpus.vocab(), corpus.labels());
    for (std::size_t i = lo; i < hi; ++i) c.add_document(corpus.docs()[order[i]]);
    return c;
  };
  return {make(0, b1, "train"), make(b1, b2, "dev"), make(b2, n, "test")};
}

}  // namespace aan::corpus
