#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aan/explain.hpp"

namespace aan::consistency {

using explain::KeywordTable;

// Naive-Bayes classifier over attention-selected bags of words. Label
// priors are treated as constants, so prediction reduces to
// argmax_l prod_{w in bag} (p(w | l) + lambda), evaluated in log space.
struct NbcModel {
  KeywordTable table;  // expected to be built in top-5 numerator mode
  double lambda = 1.0;
  int bag_size = 5;

  int num_labels() const { return table.num_labels; }
};

inline NbcModel build_nbc(KeywordTable table, double lambda, int bag_size = 5) {
  check(lambda > 0.0, "build_nbc: lambda must be positive");
  check(bag_size >= 1, "build_nbc: bag size must be >= 1");
  return NbcModel{std::move(table), lambda, bag_size};
}

// The m token occurrences with the highest combined attention weight,
// repeats allowed; earlier positions win ties. Whole document when T < m.
inline std::vector<int> attention_bag(const std::vector<double>& combined,
                                      const std::vector<int>& tokens, int m) {
  check(m >= 1, "attention_bag: m must be >= 1");
  check(combined.size() == tokens.size(), "attention_bag: length mismatch");
  std::vector<int> bag;
  for (std::size_t t : explain::top_positions(combined, static_cast<std::size_t>(m)))
    bag.push_back(tokens[t]);
  return bag;
}

// Ties go to the lowest label id; reported consistency depends on this
// rule, so it is fixed here rather than left to float noise.
inline int nbc_predict(const std::vector<int>& bag, const NbcModel& nbc) {
  check(!bag.empty(), "nbc_predict: empty bag");
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < nbc.num_labels(); ++l) {
    double s = 0.0;
    for (int w : bag) s += std::log(nbc.table.score(w, l) + nbc.lambda);
    if (s > best_score) {
      best_score = s;
      best = l;
    }
  }
  return best;
}

struct ConsistencyReport {
  // cells
  std::size_t consistent_correct = 0;
  std::size_t consistent_wrong = 0;
  std::size_t inconsistent_correct = 0;
  std::size_t inconsistent_wrong = 0;

  std::size_t total() const {
    return consistent_correct + consistent_wrong + inconsistent_correct + inconsistent_wrong;
  }
  std::size_t consistent() const { return consistent_correct + consistent_wrong; }
  std::size_t inconsistent() const { return inconsistent_correct + inconsistent_wrong; }

  // percentages; cp/ncp are absent when their cell is empty rather than
  // fabricating a 0% rate
  double cs() const {
    return 100.0 * static_cast<double>(consistent()) / static_cast<double>(total());
  }
  std::optional<double> cp() const {
    if (consistent() == 0) return std::nullopt;
    return 100.0 * static_cast<double>(consistent_wrong) / static_cast<double>(consistent());
  }
  std::optional<double> ncp() const {
    if (inconsistent() == 0) return std::nullopt;
    return 100.0 * static_cast<double>(inconsistent_wrong) /
           static_cast<double>(inconsistent());
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["cs"] = cs();
    j["cp"] = cp() ? nlohmann::json(*cp()) : nlohmann::json(nullptr);
    j["ncp"] = ncp() ? nlohmann::json(*ncp()) : nlohmann::json(nullptr);
    j["cells"] = {{"consistent_correct", consistent_correct},
                  {"consistent_wrong", consistent_wrong},
                  {"inconsistent_correct", inconsistent_correct},
                  {"inconsistent_wrong", inconsistent_wrong}};
    return j;
  }

  std::string to_text() const {
    auto pct = [](std::optional<double> v) {
      if (!v) return std::string("n/a");
      std::ostringstream os;
      os.precision(2);
      os << std::fixed << *v;
      return os.str();
    };
    std::ostringstream os;
    os << "documents            " << total() << "\n"
       << "consistent           " << consistent() << " (CS " << pct(cs()) << "%)\n"
       << "  of which wrong     " << consistent_wrong << " (CP " << pct(cp()) << "%)\n"
       << "inconsistent         " << inconsistent() << "\n"
       << "  of which wrong     " << inconsistent_wrong << " (NCP " << pct(ncp()) << "%)\n";
    return os.str();
  }
};

// Cross-tabulate model vs NBC predictions against gold labels. Each record
// must belong to the given corpus (tokens are looked up by doc id).
inline ConsistencyReport consistency_analysis(const std::vector<explain::DumpRecord>& records,
                                              const corpus::Corpus& corpus,
                                              const NbcModel& nbc) {
  check(!records.empty(), "consistency_analysis: no records");
  ConsistencyReport report;
  for (const auto& r : records) {
    const auto& doc = corpus.by_id(r.doc_id);
    std::vector<int> bag =
        attention_bag(explain::combined_weights(r), doc.tokens, nbc.bag_size);
    int nbc_label = nbc_predict(bag, nbc);
    bool consistent = nbc_label == r.pred;
    bool correct = r.pred == doc.gold_label;
    if (consistent) {
      correct ? ++report.consistent_correct : ++report.consistent_wrong;
    } else {
      correct ? ++report.inconsistent_correct : ++report.inconsistent_wrong;
    }
  }
  return report;
}

}  // namespace aan::consistency
