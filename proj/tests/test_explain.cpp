#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "aan/explain.hpp"
#include "aan/heatmap.hpp"
#include "aan/rng.hpp"
#include "oracles.hpp"

using namespace aan::explain;
using aan::corpus::Corpus;
using aan::corpus::Document;
using aan::corpus::LabelSet;
using aan::corpus::Vocabulary;
using aan::ndgrad::Rng;

namespace {

// Corpus over tokens a..j (ids 1..10) with two labels.
Corpus make_corpus(const std::vector<std::pair<std::vector<int>, int>>& docs,
                   const std::string& name = "toy") {
  Vocabulary vocab;
  for (char c = 'a'; c <= 'j'; ++c) vocab.add(std::string(1, c));
  vocab.add("!");  // a non-word token for filter tests
  LabelSet labels;
  labels.add("zero");
  labels.add("one");
  Corpus corpus(name, vocab, labels);
  std::int64_t id = 0;
  for (const auto& [tokens, gold] : docs) {
    Document d;
    d.id = id++;
    d.tokens = tokens;
    d.gold_label = gold;
    corpus.add_document(std::move(d));
  }
  return corpus;
}

std::vector<double> random_distribution(std::size_t n, Rng& rng) {
  std::vector<double> u(n);
  for (auto& v : u) v = rng.uniform(-2.0, 2.0);
  return oracle::softmax(u);
}

DumpRecord random_record(std::int64_t doc_id, int pred, std::size_t K, std::size_t T,
                         Rng& rng) {
  DumpRecord r;
  r.doc_id = doc_id;
  r.pred = pred;
  r.alpha_agg = random_distribution(K, rng);
  for (std::size_t k = 0; k < K; ++k) r.alpha_abs.push_back(random_distribution(T, rng));
  return r;
}

}  // namespace

TEST_CASE("combined weights basics") {
  SECTION("one concept passes its row through") {
    DumpRecord r;
    r.alpha_agg = {1.0};
    r.alpha_abs = {{0.2, 0.5, 0.3}};
    REQUIRE(combined_weights(r) == std::vector<double>{0.2, 0.5, 0.3});
  }
  SECTION("even mixture of one-hot rows") {
    DumpRecord r;
    r.alpha_agg = {0.5, 0.5};
    r.alpha_abs = {{1.0, 0.0}, {0.0, 1.0}};
    REQUIRE(combined_weights(r) == std::vector<double>{0.5, 0.5});
  }
  SECTION("random records match the double loop and stay normalized") {
    Rng rng(31);
    for (int iter = 0; iter < 40; ++iter) {
      DumpRecord r = random_record(0, 0, 1 + rng.below(5), 1 + rng.below(7), rng);
      auto w = combined_weights(r);
      auto ref = oracle::combined_weights(r.alpha_agg, r.alpha_abs);
      REQUIRE(w.size() == ref.size());
      double sum = 0.0;
      for (std::size_t t = 0; t < w.size(); ++t) {
        REQUIRE(w[t] == Catch::Approx(ref[t]).margin(1e-15));
        sum += w[t];
      }
      REQUIRE(std::fabs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("keyword scores follow the attention mass over training frequency") {
  // one doc, tokens a b, weights 0.7/0.3, both train frequencies 1, gamma 1
  Corpus corpus = make_corpus({{{1, 2}, 0}});
  AttentionDump dump;
  DumpRecord r;
  r.doc_id = 0;
  r.pred = 0;
  r.alpha_agg = {1.0};
  r.alpha_abs = {{0.7, 0.3}};
  dump.records.push_back(r);
  KeywordTable table = corpus_keyword_scores(dump, corpus, corpus, 1.0);
  REQUIRE(table.score(1, 0) == Catch::Approx(0.35).margin(1e-15));
  REQUIRE(table.score(2, 0) == Catch::Approx(0.15).margin(1e-15));
  REQUIRE(table.score(3, 0) == 0.0);   // never attended
  REQUIRE(table.score(1, 1) == 0.0);   // other label untouched
}

TEST_CASE("keyword scores add across documents of the same label") {
  Corpus corpus = make_corpus({{{1, 2}, 0}, {{1, 3}, 0}});
  AttentionDump dump;
  for (std::int64_t i = 0; i < 2; ++i) {
    DumpRecord r;
    r.doc_id = i;
    r.pred = 0;
    r.alpha_agg = {1.0};
    r.alpha_abs = {{0.4, 0.6}};
    dump.records.push_back(r);
  }
  // token a (id 1) appears once per doc with weight 0.4; freq_train(a) = 2
  KeywordTable table = corpus_keyword_scores(dump, corpus, corpus, 1.0);
  REQUIRE(table.score(1, 0) == Catch::Approx(2 * (0.4 / 3.0)).margin(1e-15));
}

TEST_CASE("keyword scores are additive over a corpus partition") {
  Rng rng(12);
  std::vector<std::pair<std::vector<int>, int>> doc_spec;
  for (int i = 0; i < 12; ++i) {
    std::vector<int> toks;
    std::size_t T = 2 + rng.below(5);
    for (std::size_t t = 0; t < T; ++t) toks.push_back(1 + static_cast<int>(rng.below(10)));
    doc_spec.emplace_back(toks, static_cast<int>(rng.below(2)));
  }
  Corpus corpus = make_corpus(doc_spec);
  AttentionDump all, part1, part2;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    DumpRecord r = random_record(static_cast<std::int64_t>(i),
                                 static_cast<int>(rng.below(2)), 3,
                                 corpus.docs()[i].tokens.size(), rng);
    all.records.push_back(r);
    (i % 2 == 0 ? part1 : part2).records.push_back(r);
  }
  KeywordTable t_all = corpus_keyword_scores(all, corpus, corpus, 7.0);
  KeywordTable t_1 = corpus_keyword_scores(part1, corpus, corpus, 7.0);
  KeywordTable t_2 = corpus_keyword_scores(part2, corpus, corpus, 7.0);
  for (int l = 0; l < 2; ++l)
    for (int w = 0; w <= 11; ++w)
      REQUIRE(t_all.score(w, l) ==
              Catch::Approx(t_1.score(w, l) + t_2.score(w, l)).margin(1e-12));
}

TEST_CASE("keyword scores match the direct-loop oracle in both modes") {
  Rng rng(44);
  std::vector<std::pair<std::vector<int>, int>> doc_spec;
  for (int i = 0; i < 8; ++i) {
    std::vector<int> toks;
    std::size_t T = 3 + rng.below(8);
    for (std::size_t t = 0; t < T; ++t) toks.push_back(static_cast<int>(rng.below(11)));
    doc_spec.emplace_back(toks, static_cast<int>(rng.below(2)));
  }
  Corpus corpus = make_corpus(doc_spec);
  AttentionDump dump;
  std::vector<oracle::OracleDoc> odocs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    DumpRecord r = random_record(static_cast<std::int64_t>(i),
                                 static_cast<int>(rng.below(2)), 4,
                                 corpus.docs()[i].tokens.size(), rng);
    dump.records.push_back(r);
    oracle::OracleDoc od;
    od.tokens = corpus.docs()[i].tokens;
    od.pred = r.pred;
    od.combined = oracle::combined_weights(r.alpha_agg, r.alpha_abs);
    od.abs = r.alpha_abs;
    od.agg = r.alpha_agg;
    odocs.push_back(od);
  }
  std::map<int, std::int64_t> freq;
  for (int w = 0; w < static_cast<int>(corpus.vocab().size()); ++w)
    freq[w] = corpus.frequency(w);

  const double gamma = 5.0;
  for (bool top5 : {false, true}) {
    KeywordTable table = corpus_keyword_scores(
        dump, corpus, corpus, gamma,
        top5 ? NumeratorMode::kTop5 : NumeratorMode::kFull);
    auto ref = oracle::keyword_scores(odocs, freq, gamma, top5);
    for (int l = 0; l < 2; ++l)
      for (int w = 0; w <= 11; ++w) {
        auto it = ref.find({w, l});
        double expected = it == ref.end() ? 0.0 : it->second;
        CAPTURE(top5, l, w);
        REQUIRE(table.score(w, l) == Catch::Approx(expected).margin(1e-12));
      }
  }
}

TEST_CASE("raising gamma shrinks scores and keeps equal-frequency order") {
  Rng rng(91);
  std::vector<std::pair<std::vector<int>, int>> doc_spec;
  for (int i = 0; i < 6; ++i) {
    std::vector<int> toks;
    for (std::size_t t = 0; t < 6; ++t) toks.push_back(1 + static_cast<int>(rng.below(10)));
    doc_spec.emplace_back(toks, 0);
  }
  Corpus corpus = make_corpus(doc_spec);
  AttentionDump dump;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    dump.records.push_back(random_record(static_cast<std::int64_t>(i), 0, 2, 6, rng));
  KeywordTable lo = corpus_keyword_scores(dump, corpus, corpus, 10.0);
  KeywordTable hi = corpus_keyword_scores(dump, corpus, corpus, 100.0);
  std::map<std::int64_t, std::vector<int>> by_freq;
  for (int w = 1; w <= 10; ++w) {
    if (lo.score(w, 0) > 0.0) REQUIRE(hi.score(w, 0) < lo.score(w, 0));
    if (corpus.frequency(w) > 0) by_freq[corpus.frequency(w)].push_back(w);
  }
  for (const auto& [f, words] : by_freq)
    for (std::size_t i = 0; i + 1 < words.size(); ++i)
      for (std::size_t j = i + 1; j < words.size(); ++j) {
        // same denominator, so order is decided by the numerators alone
        bool lo_order = lo.score(words[i], 0) < lo.score(words[j], 0);
        bool hi_order = hi.score(words[i], 0) < hi.score(words[j], 0);
        REQUIRE(lo_order == hi_order);
      }
}

TEST_CASE("unknown tokens never reach a table and unseen words fall back to gamma") {
  Corpus corpus = make_corpus({{{0, 1}, 0}});  // position 0 is <unk>
  Corpus train = make_corpus({{{2, 3}, 0}}, "train");  // token a unseen in training
  AttentionDump dump;
  DumpRecord r;
  r.doc_id = 0;
  r.pred = 0;
  r.alpha_agg = {1.0};
  r.alpha_abs = {{0.6, 0.4}};
  dump.records.push_back(r);
  KeywordTable table = corpus_keyword_scores(dump, corpus, train, 2.0);
  REQUIRE(table.score(0, 0) == 0.0);                                // <unk> excluded
  REQUIRE(table.score(1, 0) == Catch::Approx(0.4 / 2.0).margin(1e-15));  // 0 + gamma
}

TEST_CASE("top keywords rank by score with lexicographic ties and word filter") {
  KeywordTable table;
  table.num_labels = 1;
  table.scores.resize(1);
  Vocabulary vocab;
  int a = vocab.add("beta"), b = vocab.add("alpha"), c = vocab.add("gamma");
  int bang = vocab.add("!");
  table.scores[0][a] = 0.5;
  table.scores[0][b] = 0.5;
  table.scores[0][c] = 0.9;
  table.scores[0][bang] = 1.5;
  auto top = top_keywords(table, vocab, 0, 10);
  REQUIRE(top.size() == 3);
  REQUIRE(top[0].first == "gamma");
  REQUIRE(top[1].first == "alpha");  // tie with beta broken lexicographically
  REQUIRE(top[2].first == "beta");
  auto with_punct = top_keywords(table, vocab, 0, 10, true);
  REQUIRE(with_punct.size() == 4);
  REQUIRE(with_punct[0].first == "!");
  auto capped = top_keywords(table, vocab, 0, 2);
  REQUIRE(capped.size() == 2);
}

TEST_CASE("concept scores aggregate and normalize per label") {
  SECTION("single one-hot record") {
    AttentionDump dump;
    DumpRecord r;
    r.doc_id = 0;
    r.pred = 1;
    r.alpha_agg = {0.0, 0.0, 1.0};
    r.alpha_abs = {{1.0}, {1.0}, {1.0}};
    dump.records.push_back(r);
    auto cs = concept_scores(dump, 2);
    REQUIRE(cs[1][2] == 1.0);
    REQUIRE(cs[1][0] == 0.0);
  }
  SECTION("two documents average") {
    AttentionDump dump;
    for (int i = 0; i < 2; ++i) {
      DumpRecord r;
      r.doc_id = i;
      r.pred = 0;
      r.alpha_agg = i == 0 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
      r.alpha_abs = {{1.0}, {1.0}};
      dump.records.push_back(r);
    }
    auto cs = concept_scores(dump, 1);
    REQUIRE(cs[0][0] == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(cs[0][1] == Catch::Approx(0.5).margin(1e-15));
  }
  SECTION("random dumps match the oracle and sum to one per label") {
    Rng rng(8);
    AttentionDump dump;
    std::vector<oracle::OracleDoc> odocs;
    for (int i = 0; i < 20; ++i) {
      DumpRecord r = random_record(i, static_cast<int>(rng.below(3)), 5, 4, rng);
      dump.records.push_back(r);
      oracle::OracleDoc od;
      od.pred = r.pred;
      od.agg = r.alpha_agg;
      odocs.push_back(od);
    }
    for (bool per_label : {true, false}) {
      auto cs = concept_scores(dump, 3,
                               per_label ? ConceptNorm::kPerLabel : ConceptNorm::kCorpusSize);
      auto ref = oracle::concept_scores(odocs, 3, 5, per_label);
      for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 5; ++k)
          REQUIRE(cs[l][k] == Catch::Approx(ref[l][k]).margin(1e-12));
    }
    auto cs = concept_scores(dump, 3);
    for (int l = 0; l < 3; ++l) {
      double sum = 0.0;
      for (int k = 0; k < 5; ++k) sum += cs[l][k];
      REQUIRE(std::fabs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("concept keyword scores accumulate per-concept attention") {
  SECTION("one-hot abstraction row contributes weight over freq plus gamma") {
    Corpus corpus = make_corpus({{{4, 5}, 0}});
    AttentionDump dump;
    DumpRecord r;
    r.doc_id = 0;
    r.pred = 0;
    r.alpha_agg = {0.5, 0.5};
    r.alpha_abs = {{1.0, 0.0}, {0.0, 1.0}};
    dump.records.push_back(r);
    ConceptTable table = concept_keyword_scores(dump, corpus, corpus, 1.0);
    REQUIRE(table.score(4, 0, 0) == Catch::Approx(0.5).margin(1e-15));  // 1 / (1 + 1)
    REQUIRE(table.score(4, 1, 0) == 0.0);  // concept 1 never selects token d
    REQUIRE(table.score(5, 1, 0) == Catch::Approx(0.5).margin(1e-15));
  }
  SECTION("random dumps match the oracle") {
    Rng rng(71);
    std::vector<std::pair<std::vector<int>, int>> doc_spec;
    for (int i = 0; i < 6; ++i) {
      std::vector<int> toks;
      for (int t = 0; t < 5; ++t) toks.push_back(static_cast<int>(rng.below(11)));
      doc_spec.emplace_back(toks, static_cast<int>(rng.below(2)));
    }
    Corpus corpus = make_corpus(doc_spec);
    AttentionDump dump;
    std::vector<oracle::OracleDoc> odocs;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      DumpRecord r = random_record(static_cast<std::int64_t>(i),
                                   static_cast<int>(rng.below(2)), 3, 5, rng);
      dump.records.push_back(r);
      oracle::OracleDoc od;
      od.tokens = corpus.docs()[i].tokens;
      od.pred = r.pred;
      od.abs = r.alpha_abs;
      od.agg = r.alpha_agg;
      odocs.push_back(od);
    }
    std::map<int, std::int64_t> freq;
    for (int w = 0; w < static_cast<int>(corpus.vocab().size()); ++w)
      freq[w] = corpus.frequency(w);
    ConceptTable table = concept_keyword_scores(dump, corpus, corpus, 3.0);
    auto ref = oracle::concept_keyword_scores(odocs, freq, 3.0);
    for (int l = 0; l < 2; ++l)
      for (int k = 0; k < 3; ++k)
        for (int w = 0; w <= 11; ++w) {
          auto it = ref.find({w, k, l});
          double expected = it == ref.end() ? 0.0 : it->second;
          REQUIRE(table.score(w, k, l) == Catch::Approx(expected).margin(1e-12));
        }
  }
}

TEST_CASE("per-document mixture of concept scores reproduces the combined table") {
  // sum_k agg_k * (concept-k numerator) telescopes into the combined-weight
  // numerator, document by document
  Rng rng(17);
  std::vector<std::pair<std::vector<int>, int>> doc_spec;
  for (int i = 0; i < 5; ++i) {
    std::vector<int> toks;
    for (int t = 0; t < 6; ++t) toks.push_back(1 + static_cast<int>(rng.below(10)));
    doc_spec.emplace_back(toks, static_cast<int>(rng.below(2)));
  }
  Corpus corpus = make_corpus(doc_spec);
  AttentionDump dump;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    dump.records.push_back(random_record(static_cast<std::int64_t>(i),
                                         static_cast<int>(rng.below(2)), 4, 6, rng));
  const double gamma = 2.5;
  KeywordTable combined = corpus_keyword_scores(dump, corpus, corpus, gamma);

  std::map<std::pair<int, int>, double> mixture;
  for (const auto& r : dump.records) {
    const auto& doc = corpus.by_id(r.doc_id);
    for (std::size_t k = 0; k < r.alpha_agg.size(); ++k)
      for (std::size_t t = 0; t < doc.tokens.size(); ++t) {
        int w = doc.tokens[t];
        if (w == Vocabulary::kUnkId) continue;
        double denom = static_cast<double>(corpus.frequency(w)) + gamma;
        mixture[{w, r.pred}] += r.alpha_agg[k] * (r.alpha_abs[k][t] / denom);
      }
  }
  for (int l = 0; l < 2; ++l)
    for (int w = 1; w <= 10; ++w) {
      auto it = mixture.find({w, l});
      double expected = it == mixture.end() ? 0.0 : it->second;
      REQUIRE(combined.score(w, l) == Catch::Approx(expected).margin(1e-12));
    }

  // the factored composition (factors summed over documents first) is a
  // different quantity in general; just check it stays finite and nonneg
  ConceptTable concepts = concept_keyword_scores(dump, corpus, corpus, gamma);
  KeywordTable factored = mixture_keyword_table(concepts);
  for (int l = 0; l < 2; ++l)
    for (const auto& [w, s] : factored.scores[l]) REQUIRE(s >= 0.0);
}

TEST_CASE("single-concept tables collapse to the corpus-level table exactly") {
  Rng rng(23);
  std::vector<std::pair<std::vector<int>, int>> doc_spec;
  for (int i = 0; i < 6; ++i) {
    std::vector<int> toks;
    for (int t = 0; t < 5; ++t) toks.push_back(1 + static_cast<int>(rng.below(10)));
    doc_spec.emplace_back(toks, static_cast<int>(rng.below(2)));
  }
  Corpus corpus = make_corpus(doc_spec);
  AttentionDump dump;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    DumpRecord r;
    r.doc_id = static_cast<std::int64_t>(i);
    r.pred = static_cast<int>(rng.below(2));
    r.alpha_agg = {1.0};
    r.alpha_abs = {random_distribution(5, rng)};
    dump.records.push_back(r);
  }
  KeywordTable corpus_level = corpus_keyword_scores(dump, corpus, corpus, 4.0);
  ConceptTable concepts = concept_keyword_scores(dump, corpus, corpus, 4.0);
  for (int l = 0; l < 2; ++l)
    for (int w = 0; w <= 11; ++w)
      REQUIRE(concepts.score(w, 0, l) == corpus_level.score(w, l));  // bit-exact
}

TEST_CASE("case-level concept explanation") {
  aan::model::ForwardRecord rec;
  rec.doc_id = 42;
  rec.alpha_agg = aan::ndgrad::Tensor::vec({0.2, 0.7, 0.1});
  rec.alpha_abs = aan::ndgrad::Tensor::matrix(
      3, 4,
      {0.0, 1.0, 0.0, 0.0,
       0.1, 0.2, 0.3, 0.4,
       0.25, 0.25, 0.25, 0.25});
  rec.y = aan::ndgrad::Tensor::vec({0.5, 0.5});
  Vocabulary vocab;
  int a = vocab.add("alpha"), b = vocab.add("bravo"), c = vocab.add("china");
  Document doc;
  doc.id = 42;
  doc.tokens = {a, b, c, b};

  SECTION("one keyword from a one-hot row") {
    auto expl = case_concept_explanation(rec, doc, vocab, 1);
    REQUIRE(expl.entries.size() == 3);
    // sorted by aggregation weight descending
    REQUIRE(expl.entries[0].concept_id == 1);
    REQUIRE(expl.entries[1].concept_id == 0);
    REQUIRE(expl.entries[2].concept_id == 2);
    REQUIRE(expl.entries[1].keywords.size() == 1);
    REQUIRE(expl.entries[1].keywords[0].first == "bravo");
    REQUIRE(expl.entries[1].keywords[0].second == 1.0);
  }
  SECTION("repeats allowed and weights bounded by one") {
    auto expl = case_concept_explanation(rec, doc, vocab, 3);
    const auto& kw = expl.entries[0].keywords;  // concept 1: weights .4 .3 .2
    REQUIRE(kw.size() == 3);
    REQUIRE(kw[0].first == "bravo");  // position 3, weight 0.4
    REQUIRE(kw[1].first == "china");
    REQUIRE(kw[2].first == "bravo");
    for (const auto& [tok, w] : kw) REQUIRE(w <= 1.0);
    double sum = 0.0;
    for (const auto& e : expl.entries) sum += e.score;
    REQUIRE(std::fabs(sum - 1.0) < 1e-9);
  }
  SECTION("unk occurrences are skipped") {
    Document with_unk;
    with_unk.id = 42;
    with_unk.tokens = {a, Vocabulary::kUnkId, c, b};
    auto expl = case_concept_explanation(rec, with_unk, vocab, 2);
    // concept 0 is one-hot on the unk position; next best positions win
    for (const auto& e : expl.entries)
      for (const auto& [tok, w] : e.keywords)
        REQUIRE(tok != std::string(Vocabulary::kUnkToken));
  }
}

TEST_CASE("corpus comparison") {
  Vocabulary vocab;
  int x = vocab.add("xray"), y = vocab.add("yank"), z = vocab.add("zulu");
  LabelSet labels;
  labels.add("only");

  auto make_table = [&](double sx, double sy, double sz) {
    KeywordTable t;
    t.num_labels = 1;
    t.scores.resize(1);
    t.scores[0][x] = sx;
    t.scores[0][y] = sy;
    t.scores[0][z] = sz;
    return t;
  };

  SECTION("identical tables diverge by zero") {
    KeywordTable a = make_table(0.3, 0.5, 0.2);
    auto report = compare_corpora(a, a, 100, 50, 50, vocab, labels);
    REQUIRE(report.labels[0].kl_ab == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(report.labels[0].kl_ba == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(report.labels[0].mutual_keywords.size() == 3);
  }
  SECTION("hand-built distributions match the direct formula") {
    KeywordTable a = make_table(0.5, 0.3, 0.2);
    KeywordTable b = make_table(0.2, 0.2, 0.6);
    // equal corpus sizes, so scaling cancels after normalization
    auto report = compare_corpora(a, b, 100, 100, 100, vocab, labels);
    oracle::Vec pa{0.5, 0.3, 0.2}, pb{0.2, 0.2, 0.6};
    REQUIRE(report.labels[0].kl_ab == Catch::Approx(oracle::kl(pa, pb)).epsilon(1e-6));
    REQUIRE(report.labels[0].kl_ba == Catch::Approx(oracle::kl(pb, pa)).epsilon(1e-6));
  }
  SECTION("disjoint top lists have no mutual keywords") {
    KeywordTable a = make_table(1.0, 0.0, 0.0);
    KeywordTable b = make_table(0.0, 1.0, 0.0);
    auto report = compare_corpora(a, b, 10, 10, 10, vocab, labels, 1);
    REQUIRE(report.labels[0].mutual_keywords.empty());
  }
  SECTION("empty corpus is rejected") {
    KeywordTable a = make_table(1.0, 0.0, 0.0);
    REQUIRE_THROWS(compare_corpora(a, a, 10, 0, 10, vocab, labels));
  }
}

TEST_CASE("attention dumps round-trip through jsonl") {
  Rng rng(3);
  AttentionDump dump;
  for (int i = 0; i < 10; ++i)
    dump.records.push_back(random_record(i, static_cast<int>(rng.below(3)), 3,
                                         2 + rng.below(4), rng));
  auto dir = std::filesystem::temp_directory_path() / "aan_explain_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "dump.jsonl").string();
  save_dump(dump, path);
  AttentionDump back = load_dump(path);
  REQUIRE(back.records.size() == dump.records.size());
  for (std::size_t i = 0; i < dump.records.size(); ++i) {
    REQUIRE(back.records[i].doc_id == dump.records[i].doc_id);
    REQUIRE(back.records[i].pred == dump.records[i].pred);
    REQUIRE(back.records[i].alpha_agg == dump.records[i].alpha_agg);
    REQUIRE(back.records[i].alpha_abs == dump.records[i].alpha_abs);
  }
}

TEST_CASE("heat-map export is self-contained and escaped") {
  auto dir = std::filesystem::temp_directory_path() / "aan_explain_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "heat.html").string();
  export_heatmap({"good", "<script>", "movie"}, {0.5, 0.25, 1.0}, "pos", "doc 7", path);
  std::ifstream in(path);
  std::string html((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(html.find("&lt;script&gt;") != std::string::npos);
  REQUIRE(html.find("<script>") == std::string::npos);
  REQUIRE(html.find("predicted") != std::string::npos);
  REQUIRE(html.find("pos") != std::string::npos);
  REQUIRE(html.find("http") == std::string::npos);  // no external resources
  // max-weight token at full opacity
  REQUIRE(html.find("rgba(255,96,0,1.0000)") != std::string::npos);
  REQUIRE(html.find("rgba(255,96,0,0.5000)") != std::string::npos);
}
