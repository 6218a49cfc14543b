#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "aan/corpus.hpp"
#include "aan/model.hpp"

namespace aan::explain {

using corpus::Corpus;
using corpus::Vocabulary;

// One dumped document: predicted label plus both attention layers' weights.
struct DumpRecord {
  std::int64_t doc_id = 0;
  int pred = 0;
  std::vector<double> alpha_agg;               // K
  std::vector<std::vector<double>> alpha_abs;  // K rows of length T
};

struct AttentionDump {
  std::vector<DumpRecord> records;
  std::string corpus_name;
  std::uint64_t model_checksum = 0;
};

inline DumpRecord to_dump_record(const model::ForwardRecord& r) {
  DumpRecord d;
  d.doc_id = r.doc_id;
  d.pred = r.predicted_label;
  const std::size_t K = r.alpha_agg.numel();
  const std::size_t T = r.alpha_abs.cols();
  d.alpha_agg.assign(r.alpha_agg.data(), r.alpha_agg.data() + K);
  d.alpha_abs.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    d.alpha_abs[k].resize(T);
    for (std::size_t t = 0; t < T; ++t) d.alpha_abs[k][t] = r.alpha_abs.at(k, t);
  }
  return d;
}

inline AttentionDump make_dump(const Corpus& corpus, const model::AanParameters& params,
                               const model::ModelConfig& cfg) {
  AttentionDump dump;
  dump.corpus_name = corpus.name();
  dump.records.reserve(corpus.size());
  for (const auto& doc : corpus.docs())
    dump.records.push_back(to_dump_record(model::predict(doc, params, cfg)));
  return dump;
}

inline void save_dump(const AttentionDump& dump, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write attention dump: " + path);
  for (const auto& r : dump.records) {
    nlohmann::json j;
    j["doc_id"] = r.doc_id;
    j["pred"] = r.pred;
    j["alpha_agg"] = r.alpha_agg;
    j["alpha_abs"] = r.alpha_abs;
    out << j.dump() << "\n";
  }
}

inline AttentionDump load_dump(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open attention dump: " + path);
  AttentionDump dump;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    check(!j.is_discarded(),
          path + ": line " + std::to_string(line_no) + ": malformed JSON");
    DumpRecord r;
    r.doc_id = j.at("doc_id").get<std::int64_t>();
    r.pred = j.at("pred").get<int>();
    r.alpha_agg = j.at("alpha_agg").get<std::vector<double>>();
    r.alpha_abs = j.at("alpha_abs").get<std::vector<std::vector<double>>>();
    check(r.alpha_abs.size() == r.alpha_agg.size(),
          path + ": line " + std::to_string(line_no) + ": concept count mismatch");
    dump.records.push_back(std::move(r));
  }
  dump.corpus_name = path;
  return dump;
}

// Per-token contribution to the document representation: the aggregation
// weights marginalize the K abstraction distributions into one.
inline std::vector<double> combined_weights(const DumpRecord& r) {
  check(!r.alpha_abs.empty(), "combined_weights: record has no concepts");
  const std::size_t T = r.alpha_abs[0].size();
  std::vector<double> w(T, 0.0);
  for (std::size_t k = 0; k < r.alpha_abs.size(); ++k)
    for (std::size_t t = 0; t < T; ++t) w[t] += r.alpha_agg[k] * r.alpha_abs[k][t];
  return w;
}

inline std::vector<double> combined_weights(const model::ForwardRecord& r) {
  return combined_weights(to_dump_record(r));
}

// Positions of the m largest weights, ties resolved to the earlier
// position. Returns all positions when T <= m.
inline std::vector<std::size_t> top_positions(const std::vector<double>& weights,
                                              std::size_t m) {
  std::vector<std::size_t> order(weights.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  if (order.size() > m) order.resize(m);
  return order;
}

enum class NumeratorMode { kFull, kTop5 };

// Keyword-to-label causality scores. Numerators accumulate attention mass
// per (word, predicted label); denominators are the word's raw frequency in
// the TRAINING corpus plus gamma, regardless of which corpus was dumped.
struct KeywordTable {
  int num_labels = 0;
  std::vector<std::unordered_map<int, double>> scores;  // [label][word id]
  double gamma = 1000.0;
  NumeratorMode mode = NumeratorMode::kFull;
  std::string source_corpus;
  std::string denominator_corpus;

  double score(int word, int label) const {
    const auto& m = scores.at(static_cast<std::size_t>(label));
    auto it = m.find(word);
    return it == m.end() ? 0.0 : it->second;
  }
};

// Accumulation is sequential in record order, so results are deterministic;
// <unk> never enters a table.
inline KeywordTable corpus_keyword_scores(const AttentionDump& dump,
                                          const Corpus& source_corpus,
                                          const Corpus& train_corpus, double gamma,
                                          NumeratorMode mode = NumeratorMode::kFull) {
  check(gamma > 0.0, "corpus_keyword_scores: gamma must be positive");
  KeywordTable table;
  table.num_labels = static_cast<int>(source_corpus.labels().size());
  table.scores.resize(source_corpus.labels().size());
  table.gamma = gamma;
  table.mode = mode;
  table.source_corpus = source_corpus.name();
  table.denominator_corpus = train_corpus.name();
  for (const auto& r : dump.records) {
    const auto& doc = source_corpus.by_id(r.doc_id);
    std::vector<double> w = combined_weights(r);
    check(w.size() == doc.tokens.size(),
          "corpus_keyword_scores: dump/corpus length mismatch for doc " +
              std::to_string(r.doc_id));
    auto& label_scores = table.scores.at(static_cast<std::size_t>(r.pred));
    auto add = [&](std::size_t t) {
      int word = doc.tokens[t];
      if (word == Vocabulary::kUnkId) return;
      double denom = static_cast<double>(train_corpus.frequency(word)) + gamma;
      label_scores[word] += w[t] / denom;
    };
    if (mode == NumeratorMode::kFull) {
      for (std::size_t t = 0; t < w.size(); ++t) add(t);
    } else {
      for (std::size_t t : top_positions(w, 5)) add(t);
    }
  }
  return table;
}

// Ranked (word, score) list for one label: score descending, ties broken
// lexicographically by token. Pure punctuation is dropped unless asked for.
inline std::vector<std::pair<std::string, double>> top_keywords(
    const KeywordTable& table, const Vocabulary& vocab, int label, std::size_t k,
    bool include_nonword = false) {
  std::vector<std::pair<std::string, double>> items;
  for (const auto& [word, score] : table.scores.at(static_cast<std::size_t>(label))) {
    const std::string& tok = vocab.token(word);
    if (!include_nonword && !corpus::is_wordlike(tok)) continue;
    items.emplace_back(tok, score);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (items.size() > k) items.resize(k);
  return items;
}

enum class ConceptNorm {
  kPerLabel,    // per predicted-label document count; distributions sum to 1
  kCorpusSize,  // the dumped corpus's document count, the literal reading
};

// p(concept | label): aggregation mass accumulated per predicted label.
inline std::vector<std::vector<double>> concept_scores(
    const AttentionDump& dump, int num_labels,
    ConceptNorm norm = ConceptNorm::kPerLabel) {
  check(!dump.records.empty(), "concept_scores: empty dump");
  const std::size_t K = dump.records.front().alpha_agg.size();
  std::vector<std::vector<double>> acc(static_cast<std::size_t>(num_labels),
                                       std::vector<double>(K, 0.0));
  std::vector<std::size_t> label_counts(static_cast<std::size_t>(num_labels), 0);
  for (const auto& r : dump.records) {
    check(r.alpha_agg.size() == K, "concept_scores: inconsistent concept count");
    auto l = static_cast<std::size_t>(r.pred);
    ++label_counts[l];
    for (std::size_t k = 0; k < K; ++k) acc[l][k] += r.alpha_agg[k];
  }
  for (std::size_t l = 0; l < acc.size(); ++l) {
    double denom = norm == ConceptNorm::kPerLabel
                       ? static_cast<double>(label_counts[l])
                       : static_cast<double>(dump.records.size());
    if (denom > 0.0)
      for (double& v : acc[l]) v /= denom;
  }
  return acc;
}

// Concept-factored keyword scores: per (label, concept), the same
// accumulation as the corpus-level table but driven by that concept's
// abstraction weights instead of the combined ones.
struct ConceptTable {
  int num_labels = 0;
  int num_concepts = 0;
  std::vector<std::vector<double>> concept_score;                        // [label][k]
  std::vector<std::vector<std::unordered_map<int, double>>> word_score;  // [label][k][word]
  double gamma = 1000.0;

  double score(int word, int concept_id, int label) const {
    const auto& m = word_score.at(static_cast<std::size_t>(label))
                        .at(static_cast<std::size_t>(concept_id));
    auto it = m.find(word);
    return it == m.end() ? 0.0 : it->second;
  }
};

inline ConceptTable concept_keyword_scores(const AttentionDump& dump,
                                           const Corpus& source_corpus,
                                           const Corpus& train_corpus, double gamma,
                                           NumeratorMode mode = NumeratorMode::kFull,
                                           ConceptNorm norm = ConceptNorm::kPerLabel) {
  check(gamma > 0.0, "concept_keyword_scores: gamma must be positive");
  check(!dump.records.empty(), "concept_keyword_scores: empty dump");
  const std::size_t K = dump.records.front().alpha_agg.size();
  const std::size_t L = source_corpus.labels().size();
  ConceptTable table;
  table.num_labels = static_cast<int>(L);
  table.num_concepts = static_cast<int>(K);
  table.gamma = gamma;
  table.word_score.assign(L, std::vector<std::unordered_map<int, double>>(K));
  table.concept_score = concept_scores(dump, static_cast<int>(L), norm);
  for (const auto& r : dump.records) {
    const auto& doc = source_corpus.by_id(r.doc_id);
    auto l = static_cast<std::size_t>(r.pred);
    for (std::size_t k = 0; k < K; ++k) {
      const auto& row = r.alpha_abs[k];
      check(row.size() == doc.tokens.size(),
            "concept_keyword_scores: dump/corpus length mismatch for doc " +
                std::to_string(r.doc_id));
      auto& scores = table.word_score[l][k];
      auto add = [&](std::size_t t) {
        int word = doc.tokens[t];
        if (word == Vocabulary::kUnkId) return;
        double denom = static_cast<double>(train_corpus.frequency(word)) + gamma;
        scores[word] += row[t] / denom;
      };
      if (mode == NumeratorMode::kFull) {
        for (std::size_t t = 0; t < row.size(); ++t) add(t);
      } else {
        for (std::size_t t : top_positions(row, 5)) add(t);
      }
    }
  }
  return table;
}

// Compose concept factors back into a per-label keyword table:
// score(w, l) = sum_k p(w | c_k, l) * p(c_k | l). Both factors are summed
// over documents first, so this is the factored composition rather than a
// per-document product.
inline KeywordTable mixture_keyword_table(const ConceptTable& concepts) {
  KeywordTable table;
  table.num_labels = concepts.num_labels;
  table.scores.resize(static_cast<std::size_t>(concepts.num_labels));
  table.gamma = concepts.gamma;
  for (std::size_t l = 0; l < table.scores.size(); ++l)
    for (std::size_t k = 0; k < static_cast<std::size_t>(concepts.num_concepts); ++k) {
      double ck = concepts.concept_score[l][k];
      for (const auto& [word, s] : concepts.word_score[l][k])
        table.scores[l][word] += ck * s;
    }
  return table;
}

inline std::vector<std::pair<std::string, double>> top_concept_keywords(
    const ConceptTable& table, const Vocabulary& vocab, int label, int concept_id,
    std::size_t k, bool include_nonword = false) {
  std::vector<std::pair<std::string, double>> items;
  for (const auto& [word, score] : table.word_score.at(static_cast<std::size_t>(label))
                                       .at(static_cast<std::size_t>(concept_id))) {
    const std::string& tok = vocab.token(word);
    if (!include_nonword && !corpus::is_wordlike(tok)) continue;
    items.emplace_back(tok, score);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (items.size() > k) items.resize(k);
  return items;
}

// Case-level concept view of one document: concept importance straight from
// the aggregation weights, keyword occurrences from that concept's
// abstraction row (the same token may appear more than once).
struct CaseConceptExplanation {
  struct Entry {
    int concept_id = 0;
    double score = 0.0;
    std::vector<std::pair<std::string, double>> keywords;  // (token, weight)
  };
  std::int64_t doc_id = 0;
  std::vector<Entry> entries;  // sorted by score descending
};

inline CaseConceptExplanation case_concept_explanation(const model::ForwardRecord& record,
                                                       const corpus::Document& doc,
                                                       const Vocabulary& vocab,
                                                       std::size_t top_m) {
  const std::size_t K = record.alpha_agg.numel();
  const std::size_t T = record.alpha_abs.cols();
  check(doc.tokens.size() == T, "case_concept_explanation: record/document mismatch");
  CaseConceptExplanation out;
  out.doc_id = doc.id;
  for (std::size_t k = 0; k < K; ++k) {
    CaseConceptExplanation::Entry e;
    e.concept_id = static_cast<int>(k);
    e.score = record.alpha_agg[k];
    std::vector<double> row(T);
    for (std::size_t t = 0; t < T; ++t) row[t] = record.alpha_abs.at(k, t);
    for (std::size_t t : top_positions(row, T)) {
      if (doc.tokens[t] == Vocabulary::kUnkId) continue;
      e.keywords.emplace_back(vocab.token(doc.tokens[t]), row[t]);
      if (e.keywords.size() == top_m) break;
    }
    out.entries.push_back(std::move(e));
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

// Cross-corpus comparison of two keyword tables sharing the same model and
// training denominators. Scores are scaled by |train| / |corpus| to make
// corpora of different sizes comparable; the per-label divergence is KL on
// the floored, normalized score vectors over the union vocabulary.
struct LabelComparison {
  std::string label;
  double kl_ab = 0.0;
  double kl_ba = 0.0;
  std::vector<std::string> mutual_keywords;  // intersection of top-k lists
  // (token, scaled score in A, scaled score in B), A-score descending
  std::vector<std::tuple<std::string, double, double>> scaled_scores;
};

struct CompareReport {
  std::vector<LabelComparison> labels;
  double scale_a = 0.0;
  double scale_b = 0.0;
};

inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  check(p.size() == q.size(), "kl_divergence: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) d += p[i] * std::log(p[i] / q[i]);
  return d;
}

inline CompareReport compare_corpora(const KeywordTable& table_a,
                                     const KeywordTable& table_b,
                                     std::size_t train_size, std::size_t size_a,
                                     std::size_t size_b, const Vocabulary& vocab,
                                     const corpus::LabelSet& labels,
                                     std::size_t top_k = 20) {
  check(size_a > 0 && size_b > 0 && train_size > 0, "compare_corpora: empty corpus");
  check(table_a.num_labels == table_b.num_labels, "compare_corpora: label count mismatch");
  constexpr double kFloor = 1e-12;  // KL needs absolute continuity
  CompareReport report;
  report.scale_a = static_cast<double>(train_size) / static_cast<double>(size_a);
  report.scale_b = static_cast<double>(train_size) / static_cast<double>(size_b);
  for (int l = 0; l < table_a.num_labels; ++l) {
    LabelComparison cmp;
    cmp.label = labels.name(l);
    std::map<int, std::pair<double, double>> merged;  // word -> scaled (a, b)
    for (const auto& [w, s] : table_a.scores[static_cast<std::size_t>(l)])
      merged[w].first = s * report.scale_a;
    for (const auto& [w, s] : table_b.scores[static_cast<std::size_t>(l)])
      merged[w].second = s * report.scale_b;
    std::vector<double> pa, pb;
    pa.reserve(merged.size());
    pb.reserve(merged.size());
    for (const auto& [w, sv] : merged) {
      pa.push_back(sv.first + kFloor);
      pb.push_back(sv.second + kFloor);
      cmp.scaled_scores.emplace_back(vocab.token(w), sv.first, sv.second);
    }
    double za = 0.0, zb = 0.0;
    for (double v : pa) za += v;
    for (double v : pb) zb += v;
    for (double& v : pa) v /= za;
    for (double& v : pb) v /= zb;
    cmp.kl_ab = kl_divergence(pa, pb);
    cmp.kl_ba = kl_divergence(pb, pa);
    std::sort(cmp.scaled_scores.begin(), cmp.scaled_scores.end(),
              [](const auto& a, const auto& b) {
                if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
                return std::get<0>(a) < std::get<0>(b);
              });
    auto top_a = top_keywords(table_a, vocab, l, top_k);
    auto top_b = top_keywords(table_b, vocab, l, top_k);
    for (const auto& [tok, sa] : top_a)
      for (const auto& [tok_b, sb] : top_b)
        if (tok == tok_b) {
          cmp.mutual_keywords.push_back(tok);
          break;
        }
    report.labels.push_back(std::move(cmp));
  }
  return report;
}

}  // namespace aan::explain
