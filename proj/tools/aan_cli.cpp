// aan: train, explain, and verify abstraction-aggregation document
// classifiers from the command line. Every subcommand is deterministic
// given its inputs and seeds; reruns produce byte-identical outputs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aan/aan.hpp"

namespace {

using aan::corpus::Corpus;
using aan::explain::ConceptTable;
using aan::explain::KeywordTable;
using aan::explain::NumeratorMode;
using aan::model::Checkpoint;

struct TrainFileConfig {
  aan::model::ModelConfig model;
  int min_count = 1;
  std::size_t max_vocab = 0;
  double train_ratio = 0.8, dev_ratio = 0.1, test_ratio = 0.1;
  std::uint64_t split_seed = 1;
};

TrainFileConfig load_train_config(const std::string& path) {
  TrainFileConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  aan::check(in.good(), "cannot open config: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  aan::check(!j.is_discarded(), path + ": malformed JSON");
  cfg.model = aan::model::ModelConfig::from_json(j);
  if (j.contains("min_count")) cfg.min_count = j["min_count"].get<int>();
  if (j.contains("max_vocab")) cfg.max_vocab = j["max_vocab"].get<std::size_t>();
  if (j.contains("split_ratios")) {
    auto r = j["split_ratios"].get<std::vector<double>>();
    aan::check(r.size() == 3, path + ": split_ratios must have three entries");
    cfg.train_ratio = r[0];
    cfg.dev_ratio = r[1];
    cfg.test_ratio = r[2];
  }
  if (j.contains("split_seed")) cfg.split_seed = j["split_seed"].get<std::uint64_t>();
  return cfg;
}

Corpus load_with_checkpoint(const std::string& path, const Checkpoint& ckpt,
                            const std::string& name = "") {
  return aan::corpus::load_jsonl(path, ckpt.vocab, ckpt.labels, {}, name);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  aan::check(out.good(), "cannot write: " + path);
  out << content;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string replace_extension(const std::string& path, const std::string& ext) {
  auto slash = path.find_last_of('/');
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + ext;
  return path.substr(0, dot) + ext;
}

void write_keyword_outputs(const KeywordTable& table, const Checkpoint& ckpt,
                           std::size_t top, bool include_nonword,
                           const std::string& tsv_path) {
  std::string tsv = "label\tword\tscore\n";
  nlohmann::json j;
  j["gamma"] = table.gamma;
  j["mode"] = table.mode == NumeratorMode::kFull ? "full" : "top5";
  j["source_corpus"] = table.source_corpus;
  j["denominator_corpus"] = table.denominator_corpus;
  nlohmann::json labels_json = nlohmann::json::object();
  for (int l = 0; l < table.num_labels; ++l) {
    const std::string& label = ckpt.labels.name(l);
    auto ranked = aan::explain::top_keywords(table, ckpt.vocab, l, top, include_nonword);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [word, score] : ranked) {
      tsv += label + "\t" + word + "\t" + fmt(score) + "\n";
      arr.push_back({{"word", word}, {"score", score}});
    }
    labels_json[label] = arr;
  }
  j["labels"] = labels_json;
  write_text(tsv_path, tsv);
  write_text(replace_extension(tsv_path, ".json"), j.dump(2) + "\n");
}

void write_concept_outputs(const ConceptTable& table, const Checkpoint& ckpt,
                           std::size_t top, bool include_nonword,
                           const std::string& tsv_path) {
  std::string tsv = "label\tconcept\tconcept_score\tword\tword_score\n";
  nlohmann::json j;
  j["gamma"] = table.gamma;
  nlohmann::json labels_json = nlohmann::json::object();
  for (int l = 0; l < table.num_labels; ++l) {
    const std::string& label = ckpt.labels.name(l);
    // concepts listed by importance, ties by concept index
    std::vector<int> order(static_cast<std::size_t>(table.num_concepts));
    for (int k = 0; k < table.num_concepts; ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return table.concept_score[l][a] > table.concept_score[l][b];
    });
    nlohmann::json arr = nlohmann::json::array();
    for (int k : order) {
      auto ranked =
          aan::explain::top_concept_keywords(table, ckpt.vocab, l, k, top, include_nonword);
      nlohmann::json words = nlohmann::json::array();
      for (const auto& [word, score] : ranked) {
        tsv += label + "\t" + std::to_string(k) + "\t" + fmt(table.concept_score[l][k]) +
               "\t" + word + "\t" + fmt(score) + "\n";
        words.push_back({{"word", word}, {"score", score}});
      }
      arr.push_back({{"concept", k},
                     {"score", table.concept_score[l][k]},
                     {"keywords", words}});
    }
    labels_json[label] = arr;
  }
  j["labels"] = labels_json;
  write_text(tsv_path, tsv);
  write_text(replace_extension(tsv_path, ".json"), j.dump(2) + "\n");
}

int run(int argc, char** argv) {
  CLI::App app{"abstraction-aggregation document classifier and explanations"};
  app.require_subcommand(1);

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a classifier on a JSONL corpus");
  std::string train_corpus_path, train_config_path, train_out, splits_out;
  std::optional<std::uint64_t> train_seed;
  train_cmd->add_option("--corpus", train_corpus_path, "JSONL corpus")->required();
  train_cmd->add_option("--config", train_config_path, "training config JSON");
  train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
  train_cmd->add_option("--seed", train_seed, "override the config seed");
  train_cmd->add_option("--splits-out", splits_out,
                        "write <prefix>.{train,dev,test}.jsonl split files");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "accuracy of a checkpoint on a corpus");
  std::string eval_ckpt, eval_corpus;
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "JSONL corpus")->required();

  // ---- dump-attention ----
  auto* dump_cmd = app.add_subcommand("dump-attention",
                                      "write per-document attention weights as JSONL");
  std::string dump_ckpt, dump_corpus, dump_out;
  dump_cmd->add_option("--ckpt", dump_ckpt, "checkpoint")->required();
  dump_cmd->add_option("--corpus", dump_corpus, "JSONL corpus")->required();
  dump_cmd->add_option("--out", dump_out, "dump output path")->required();

  // ---- explain ----
  auto* explain_cmd = app.add_subcommand("explain", "explanation reports");
  explain_cmd->require_subcommand(1);

  auto* kw_cmd = explain_cmd->add_subcommand("keywords",
                                             "corpus-level keyword causality table");
  std::string kw_ckpt, kw_dump, kw_train, kw_source, kw_out, kw_mode = "full";
  double kw_gamma = 1000.0;
  std::size_t kw_top = 20;
  bool kw_nonword = false;
  kw_cmd->add_option("--ckpt", kw_ckpt, "checkpoint")->required();
  kw_cmd->add_option("--dump", kw_dump, "attention dump")->required();
  kw_cmd->add_option("--train-corpus", kw_train, "training corpus (denominators)")->required();
  kw_cmd->add_option("--corpus", kw_source, "dumped corpus when not the training one");
  kw_cmd->add_option("--gamma", kw_gamma, "frequency smoothing");
  kw_cmd->add_option("--top", kw_top, "keywords per label");
  kw_cmd->add_option("--mode", kw_mode, "numerator mode: full or top5")
      ->check(CLI::IsMember({"full", "top5"}));
  kw_cmd->add_flag("--include-nonword", kw_nonword, "keep pure punctuation in rankings");
  kw_cmd->add_option("--out", kw_out, "TSV output (JSON mirror written alongside)")->required();

  auto* cc_cmd = explain_cmd->add_subcommand("concepts",
                                             "corpus-level concept explanation tables");
  std::string cc_ckpt, cc_dump, cc_train, cc_source, cc_out, cc_norm = "per-label";
  double cc_gamma = 1000.0;
  std::size_t cc_top = 10;
  bool cc_nonword = false;
  cc_cmd->add_option("--ckpt", cc_ckpt, "checkpoint")->required();
  cc_cmd->add_option("--dump", cc_dump, "attention dump")->required();
  cc_cmd->add_option("--train-corpus", cc_train, "training corpus (denominators)")->required();
  cc_cmd->add_option("--corpus", cc_source, "dumped corpus when not the training one");
  cc_cmd->add_option("--gamma", cc_gamma, "frequency smoothing");
  cc_cmd->add_option("--top", cc_top, "keywords per concept");
  cc_cmd->add_option("--norm", cc_norm,
                     "concept-score denominator: per-label or corpus-size")
      ->check(CLI::IsMember({"per-label", "corpus-size"}));
  cc_cmd->add_flag("--include-nonword", cc_nonword, "keep pure punctuation in rankings");
  cc_cmd->add_option("--out", cc_out, "TSV output (JSON mirror written alongside)")->required();

  auto* case_cmd = explain_cmd->add_subcommand("case",
                                               "heat-map and concept view of one document");
  std::string case_ckpt, case_corpus, case_out;
  std::int64_t case_doc_id = 0;
  std::size_t case_top = 5;
  case_cmd->add_option("--ckpt", case_ckpt, "checkpoint")->required();
  case_cmd->add_option("--corpus", case_corpus, "JSONL corpus holding the document")->required();
  case_cmd->add_option("--doc-id", case_doc_id, "document id (line number from 0)")->required();
  case_cmd->add_option("--top-words", case_top, "keyword occurrences per concept");
  case_cmd->add_option("--out", case_out, "output prefix (.html and .tsv)")->required();

  // ---- consistency ----
  auto* cons_cmd = app.add_subcommand(
      "consistency", "attention-driven naive-Bayes consistency analysis");
  std::string cons_ckpt, cons_train_dump, cons_train, cons_test, cons_out;
  std::string cons_table = "corpus";
  double cons_lambda = 1.0, cons_gamma = 1000.0;
  int cons_bag = 5;
  cons_cmd->add_option("--ckpt", cons_ckpt, "checkpoint")->required();
  cons_cmd->add_option("--train-dump", cons_train_dump, "attention dump of the training split")
      ->required();
  cons_cmd->add_option("--train-corpus", cons_train, "training corpus")->required();
  cons_cmd->add_option("--test-corpus", cons_test, "corpus to analyse")->required();
  cons_cmd->add_option("--lambda", cons_lambda, "naive-Bayes smoothing");
  cons_cmd->add_option("--bag", cons_bag, "attention bag size");
  cons_cmd->add_option("--gamma", cons_gamma, "keyword-table frequency smoothing");
  cons_cmd->add_option("--table", cons_table,
                       "keyword source: corpus (combined weights) or concept (mixture)")
      ->check(CLI::IsMember({"corpus", "concept"}));
  cons_cmd->add_option("--out", cons_out, "JSON report path")->required();

  // ---- compare ----
  auto* cmp_cmd = app.add_subcommand("compare",
                                     "cross-corpus keyword distribution comparison");
  std::string cmp_ckpt, cmp_dump_a, cmp_corpus_a, cmp_dump_b, cmp_corpus_b, cmp_train,
      cmp_out, cmp_tsv;
  double cmp_gamma = 1000.0;
  std::size_t cmp_top = 20;
  cmp_cmd->add_option("--ckpt", cmp_ckpt, "checkpoint")->required();
  cmp_cmd->add_option("--dump-a", cmp_dump_a, "attention dump of corpus A")->required();
  cmp_cmd->add_option("--corpus-a", cmp_corpus_a, "corpus A")->required();
  cmp_cmd->add_option("--dump-b", cmp_dump_b, "attention dump of corpus B")->required();
  cmp_cmd->add_option("--corpus-b", cmp_corpus_b, "corpus B")->required();
  cmp_cmd->add_option("--train-corpus", cmp_train, "training corpus (denominators)")->required();
  cmp_cmd->add_option("--gamma", cmp_gamma, "frequency smoothing");
  cmp_cmd->add_option("--top", cmp_top, "top-k lists for mutual keywords");
  cmp_cmd->add_option("--out", cmp_out, "JSON report path")->required();
  cmp_cmd->add_option("--tsv", cmp_tsv, "scaled per-word score table (plot data)");

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted-concept corpus");
  std::string synth_spec_path, synth_out, synth_truth;
  std::optional<std::uint64_t> synth_seed;
  synth_cmd->add_option("--spec", synth_spec_path, "generator spec JSON");
  synth_cmd->add_option("--out", synth_out, "JSONL output path")->required();
  synth_cmd->add_option("--seed", synth_seed, "override the spec seed");
  synth_cmd->add_option("--truth", synth_truth, "write keyword->(label, concept) map");

  CLI11_PARSE(app, argc, argv);

  if (*train_cmd) {
    TrainFileConfig cfg = load_train_config(train_config_path);
    if (train_seed) cfg.model.seed = *train_seed;
    aan::corpus::IngestOptions opt;
    opt.min_count = cfg.min_count;
    opt.max_vocab = cfg.max_vocab;
    Corpus full = aan::corpus::load_jsonl(train_corpus_path, opt);
    auto [train_c, dev_c, test_c] = aan::corpus::split(
        full, cfg.train_ratio, cfg.dev_ratio, cfg.test_ratio, cfg.split_seed);
    if (!splits_out.empty()) {
      aan::corpus::save_jsonl(train_c, splits_out + ".train.jsonl");
      aan::corpus::save_jsonl(dev_c, splits_out + ".dev.jsonl");
      aan::corpus::save_jsonl(test_c, splits_out + ".test.jsonl");
    }
    aan::model::TrainResult result = aan::model::train(train_c, dev_c, cfg.model, &std::cout);
    aan::model::ModelConfig final_cfg = cfg.model;
    final_cfg.vocab_size = static_cast<int>(full.vocab().size());
    final_cfg.num_labels = static_cast<int>(full.labels().size());
    Checkpoint ckpt{final_cfg, result.params, full.vocab(), full.labels()};
    aan::model::save_checkpoint(ckpt, train_out);
    std::cout << "best_epoch\t" << result.best_epoch << "\tbest_dev_accuracy\t"
              << fmt(result.best_dev_accuracy) << "\n";
    return 0;
  }

  if (*eval_cmd) {
    Checkpoint ckpt = aan::model::load_checkpoint(eval_ckpt);
    Corpus corpus = load_with_checkpoint(eval_corpus, ckpt);
    std::size_t correct = 0;
    for (const auto& d : corpus.docs())
      if (aan::model::predict(d, ckpt.params, ckpt.config).predicted_label == d.gold_label)
        ++correct;
    double acc = static_cast<double>(correct) / static_cast<double>(corpus.size());
    std::cout << "accuracy\t" << fmt(acc) << "\tcorrect\t" << correct << "\ttotal\t"
              << corpus.size() << "\n";
    return 0;
  }

  if (*dump_cmd) {
    Checkpoint ckpt = aan::model::load_checkpoint(dump_ckpt);
    Corpus corpus = load_with_checkpoint(dump_corpus, ckpt);
    aan::explain::AttentionDump dump = aan::explain::make_dump(corpus, ckpt.params, ckpt.config);
    dump.model_checksum = aan::model::checkpoint_checksum(ckpt);
    aan::explain::save_dump(dump, dump_out);
    std::cout << "records\t" << dump.records.size() << "\n";
    return 0;
  }

  if (*kw_cmd) {
    Checkpoint ckpt = aan::model::load_checkpoint(kw_ckpt);
    Corpus train_corpus = load_with_checkpoint(kw_train, ckpt, "train");
    Corpus source = kw_source.empty() ? train_corpus
                                      : load_with_checkpoint(kw_source, ckpt, "source");
    aan::explain::AttentionDump dump = aan::explain::load_dump(kw_dump);
    KeywordTable table = aan::explain::corpus_keyword_scores(
        dump, source, train_corpus, kw_gamma,
        kw_mode == "full" ? NumeratorMode::kFull : NumeratorMode::kTop5);
    write_keyword_outputs(table, ckpt, kw_top, kw_nonword, kw_out);
    return 0;
  }

  if (*cc_cmd) {
    Checkpoint ckpt = aan::model::load_checkpoint(cc_ckpt);
    Corpus train_corpus = load_with_checkpoint(cc_train, ckpt, "train");
    Corpus source = cc_source.empty() ? train_corpus
                                      : load_with_checkpoint(cc_source, ckpt, "source");
    aan::explain::AttentionDump dump = aan::explain::load_dump(cc_dump);
    ConceptTable table = aan::explain::concept_keyword_scores(
        dump, source, train_corpus, cc_gamma, NumeratorMode::kFull,
        cc_norm == "per-label" ? aan::explain::ConceptNorm::kPerLabel
                               : aan::explain::ConceptNorm::kCorpusSize);
    write_concept_outputs(table, ckpt, cc_top, cc_nonword, cc_out);
    return 0;
  }

  if (*case_cmd) {
    Checkpoint ckpt = aan::model::load_checkpoint(case_ckpt);
    Corpus corpus = load_with_checkpoint(case_corpus, ckpt);
    const auto& doc = corpus.by_id(case_doc_id);
    aan::model::ForwardRecord record = aan::model::predict(doc, ckpt.params, ckpt.config);
    auto weights = aan::explain::combined_weights(record);
    std::vector<std::string> tokens;
    tokens.reserve(doc.tokens.size());
    for (int t : doc.tokens) tokens.push_back(ckpt.vocab.token(t));
    aan::explain::export_heatmap(tokens, weights,
                                 ckpt.labels.name(record.predicted_label),
                                 "document " + std::to_string(doc.id), case_out + ".html");
    auto expl = aan::explain::case_concept_explanation(record, doc, ckpt.vocab, case_top);
    std::string tsv = "concept\tscore\tword\tweight\n";
    for (const auto& e : expl.entries)
      for (const auto& [word, w] : e.keywords)
        tsv += std::to_string(e.concept_id) + "\t" + fmt(e.score) + "\t" + word + "\t" +
               fmt(w) + "\n";
    write_text(case_out + ".tsv", tsv);
    std::cout << "predicted\t" << ckpt.labels.name(record.predicted_label) << "\n";
    return 0;
  }

  if (*cons_cmd) {
    Checkpoint ckpt = aan::model::load_checkpoint(cons_ckpt);
    Corpus train_corpus = load_with_checkpoint(cons_train, ckpt, "train");
    Corpus test_corpus = load_with_checkpoint(cons_test, ckpt, "test");
    aan::explain::AttentionDump train_dump = aan::explain::load_dump(cons_train_dump);
    KeywordTable table;
    if (cons_table == "corpus") {
      table = aan::explain::corpus_keyword_scores(train_dump, train_corpus, train_corpus,
                                                  cons_gamma, NumeratorMode::kTop5);
    } else {
      ConceptTable concepts = aan::explain::concept_keyword_scores(
          train_dump, train_corpus, train_corpus, cons_gamma, NumeratorMode::kTop5);
      table = aan::explain::mixture_keyword_table(concepts);
    }
    aan::consistency::NbcModel nbc =
        aan::consistency::build_nbc(std::move(table), cons_lambda, cons_bag);
    std::vector<aan::explain::DumpRecord> records;
    records.reserve(test_corpus.size());
    for (const auto& d : test_corpus.docs())
      records.push_back(
          aan::explain::to_dump_record(aan::model::predict(d, ckpt.params, ckpt.config)));
    aan::consistency::ConsistencyReport report =
        aan::consistency::consistency_analysis(records, test_corpus, nbc);
    nlohmann::json j = report.to_json();
    j["lambda"] = cons_lambda;
    j["bag"] = cons_bag;
    j["gamma"] = cons_gamma;
    j["table"] = cons_table;
    write_text(cons_out, j.dump(2) + "\n");
    std::cout << report.to_text();
    return 0;
  }

  if (*cmp_cmd) {
    Checkpoint ckpt = aan::model::load_checkpoint(cmp_ckpt);
    Corpus train_corpus = load_with_checkpoint(cmp_train, ckpt, "train");
    Corpus corpus_a = load_with_checkpoint(cmp_corpus_a, ckpt, "a");
    Corpus corpus_b = load_with_checkpoint(cmp_corpus_b, ckpt, "b");
    aan::explain::AttentionDump dump_a = aan::explain::load_dump(cmp_dump_a);
    aan::explain::AttentionDump dump_b = aan::explain::load_dump(cmp_dump_b);
    KeywordTable table_a =
        aan::explain::corpus_keyword_scores(dump_a, corpus_a, train_corpus, cmp_gamma);
    KeywordTable table_b =
        aan::explain::corpus_keyword_scores(dump_b, corpus_b, train_corpus, cmp_gamma);
    aan::explain::CompareReport report = aan::explain::compare_corpora(
        table_a, table_b, train_corpus.size(), corpus_a.size(), corpus_b.size(),
        ckpt.vocab, ckpt.labels, cmp_top);
    nlohmann::json j;
    j["scale_a"] = report.scale_a;
    j["scale_b"] = report.scale_b;
    nlohmann::json labels_json = nlohmann::json::object();
    for (const auto& cmp : report.labels) {
      labels_json[cmp.label] = {{"kl_ab", cmp.kl_ab},
                                {"kl_ba", cmp.kl_ba},
                                {"mutual_keywords", cmp.mutual_keywords}};
    }
    j["labels"] = labels_json;
    write_text(cmp_out, j.dump(2) + "\n");
    if (!cmp_tsv.empty()) {
      std::string tsv = "label\tword\tscore_a\tscore_b\n";
      for (const auto& cmp : report.labels)
        for (const auto& [word, sa, sb] : cmp.scaled_scores)
          tsv += cmp.label + "\t" + word + "\t" + fmt(sa) + "\t" + fmt(sb) + "\n";
      write_text(cmp_tsv, tsv);
    }
    for (const auto& cmp : report.labels)
      std::cout << cmp.label << "\tKL(A||B)\t" << fmt(cmp.kl_ab) << "\tKL(B||A)\t"
                << fmt(cmp.kl_ba) << "\tmutual\t" << cmp.mutual_keywords.size() << "\n";
    return 0;
  }

  if (*synth_cmd) {
    aan::synth::SyntheticSpec spec;
    if (!synth_spec_path.empty()) spec = aan::synth::load_spec(synth_spec_path);
    if (synth_seed) spec.seed = *synth_seed;
    aan::synth::SyntheticCorpus corpus = aan::synth::generate(spec);
    aan::synth::write_jsonl(corpus, synth_out);
    if (!synth_truth.empty()) aan::synth::write_truth(corpus, synth_truth);
    std::cout << "documents\t" << corpus.docs.size() << "\tkeywords\t"
              << corpus.keyword_origin.size() << "\n";
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
