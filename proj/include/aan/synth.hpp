#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "aan/common.hpp"
#include "aan/rng.hpp"

namespace aan::synth {

// Planted-concept corpus generator. Every keyword token belongs to exactly
// one (label, concept) pair; fillers carry no label signal. Each concept of
// the document's label independently injects at most one keyword occurrence
// (keyword chosen uniformly, position uniform among free slots), so
// keywords of the same concept never co-occur while keywords of different
// concepts usually do. That is the co-occurrence structure attention
// clustering with a diversity penalty can recover: units claiming
// co-occurring tokens are pushed apart, units claiming a concept's
// interchangeable keywords are not.
struct SyntheticSpec {
  int num_labels = 3;
  int concepts_per_label = 3;
  int keywords_per_concept = 8;
  int filler_vocab = 200;
  int docs_per_label = 500;
  int doc_len_min = 20;
  int doc_len_max = 60;
  double keyword_rate = 0.7;  // per-concept injection probability per document
  std::uint64_t seed = 13;

  void validate() const {
    check(num_labels >= 2, "synth: need at least two labels");
    check(concepts_per_label >= 1 && keywords_per_concept >= 1,
          "synth: concepts and keywords must be >= 1");
    check(filler_vocab >= 1 && docs_per_label >= 1, "synth: sizes must be >= 1");
    check(doc_len_min >= 1 && doc_len_max >= doc_len_min, "synth: bad length range");
    check(keyword_rate > 0.0 && keyword_rate <= 1.0,
          "synth: keyword_rate must lie in (0, 1]");
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"num_labels", num_labels},
        {"concepts_per_label", concepts_per_label},
        {"keywords_per_concept", keywords_per_concept},
        {"filler_vocab", filler_vocab},
        {"docs_per_label", docs_per_label},
        {"doc_len_min", doc_len_min},
        {"doc_len_max", doc_len_max},
        {"keyword_rate", keyword_rate},
        {"seed", seed},
    };
  }

  static SyntheticSpec from_json(const nlohmann::json& j) {
    SyntheticSpec s;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("num_labels", s.num_labels);
    get("concepts_per_label", s.concepts_per_label);
    get("keywords_per_concept", s.keywords_per_concept);
    get("filler_vocab", s.filler_vocab);
    get("docs_per_label", s.docs_per_label);
    get("doc_len_min", s.doc_len_min);
    get("doc_len_max", s.doc_len_max);
    get("keyword_rate", s.keyword_rate);
    get("seed", s.seed);
    return s;
  }
};

// Tokens are plain lowercase alphanumerics so the tokenizer passes them
// through unchanged.
inline std::string keyword_token(int label, int concept_id, int index) {
  return "kwl" + std::to_string(label) + "c" + std::to_string(concept_id) + "n" +
         std::to_string(index);
}

inline std::string filler_token(int index) { return "fill" + std::to_string(index); }

inline std::string label_name(int label) { return "label" + std::to_string(label); }

struct SyntheticCorpus {
  std::vector<std::pair<std::string, std::string>> docs;  // (text, label)
  std::map<std::string, std::pair<int, int>> keyword_origin;  // token -> (label, concept)
};

inline SyntheticCorpus generate(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCorpus out;
  for (int l = 0; l < spec.num_labels; ++l)
    for (int c = 0; c < spec.concepts_per_label; ++c)
      for (int i = 0; i < spec.keywords_per_concept; ++i)
        out.keyword_origin[keyword_token(l, c, i)] = {l, c};

  ndgrad::Rng rng(spec.seed);
  const auto len_span =
      static_cast<std::uint64_t>(spec.doc_len_max - spec.doc_len_min + 1);
  for (int l = 0; l < spec.num_labels; ++l) {
    for (int d = 0; d < spec.docs_per_label; ++d) {
      int len = spec.doc_len_min + static_cast<int>(rng.below(len_span));
      std::vector<std::string> tokens(static_cast<std::size_t>(len));
      for (auto& tok : tokens)
        tok = filler_token(static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.filler_vocab))));
      for (int c = 0; c < spec.concepts_per_label; ++c) {
        if (rng.uniform() >= spec.keyword_rate) continue;
        int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.keywords_per_concept)));
        std::size_t pos;
        do {
          pos = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(len)));
        } while (tokens[pos].rfind("kw", 0) == 0);  // keep injections on distinct slots
        tokens[pos] = keyword_token(l, c, i);
      }
      std::string text;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (t > 0) text.push_back(' ');
        text += tokens[t];
      }
      out.docs.emplace_back(std::move(text), label_name(l));
    }
  }
  return out;
}

inline void write_jsonl(const SyntheticCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write synthetic corpus: " + path);
  for (const auto& [text, label] : corpus.docs) {
    nlohmann::json j;
    j["text"] = text;
    j["label"] = label;
    out << j.dump() << "\n";
  }
}

inline void write_truth(const SyntheticCorpus& corpus, const std::string& path) {
  nlohmann::json j;
  for (const auto& [token, origin] : corpus.keyword_origin)
    j[token] = {{"label", origin.first}, {"concept", origin.second}};
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write ground-truth file: " + path);
  out << j.dump(2) << "\n";
}

inline SyntheticSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open synthetic spec: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  check(!j.is_discarded(), path + ": malformed JSON");
  return SyntheticSpec::from_json(j);
}

}  // namespace aan::synth
