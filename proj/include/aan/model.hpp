#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aan/corpus.hpp"
#include "aan/rng.hpp"
#include "aan/tape.hpp"

namespace aan::model {

using ndgrad::NodeId;
using ndgrad::Tape;
using ndgrad::Tensor;

enum class EncoderKind { kEmbeddingOnly, kRecurrent };

inline std::string to_string(EncoderKind k) {
  return k == EncoderKind::kEmbeddingOnly ? "embedding_only" : "recurrent";
}

inline EncoderKind encoder_from_string(const std::string& s) {
  if (s == "embedding_only") return EncoderKind::kEmbeddingOnly;
  if (s == "recurrent") return EncoderKind::kRecurrent;
  throw std::runtime_error("unknown encoder kind: " + s);
}

struct ModelConfig {
  EncoderKind encoder = EncoderKind::kEmbeddingOnly;
  int hidden_dim = 64;
  int num_concepts = 10;
  double agg_dropout = 0.02;
  double classifier_dropout = 0.1;
  int classifier_hidden_dim = 64;
  int num_labels = 0;  // filled from the corpus
  int vocab_size = 0;  // filled from the corpus
  bool diversity_penalty = true;
  std::uint64_t seed = 1;

  // optimizer / schedule
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 16;
  int epochs = 20;

  // Single-attention baseline: one concept, no penalty, no weight dropout.
  static ModelConfig san(int hidden_dim, int classifier_hidden_dim) {
    ModelConfig c;
    c.num_concepts = 1;
    c.diversity_penalty = false;
    c.agg_dropout = 0.0;
    c.hidden_dim = hidden_dim;
    c.classifier_hidden_dim = classifier_hidden_dim;
    return c;
  }

  void validate() const {
    check(num_concepts >= 1, "config: num_concepts must be >= 1");
    check(hidden_dim >= 1 && classifier_hidden_dim >= 1, "config: dims must be >= 1");
    check(num_labels >= 2, "config: need at least two labels");
    check(vocab_size >= 1, "config: vocabulary is empty");
    check(agg_dropout >= 0.0 && agg_dropout < 0.5,
          "config: agg_dropout must lie in [0, 0.5)");
    check(classifier_dropout >= 0.0 && classifier_dropout < 1.0,
          "config: classifier_dropout must lie in [0, 1)");
    check(encoder != EncoderKind::kRecurrent || hidden_dim % 2 == 0,
          "config: recurrent encoder needs an even hidden_dim");
    if (num_concepts > hidden_dim)
      std::cerr << "warning: num_concepts (" << num_concepts
                << ") exceeds hidden_dim (" << hidden_dim << ")\n";
    if (agg_dropout > 0.1)
      std::cerr << "warning: agg_dropout " << agg_dropout
                << " is large; heavy weight dropout hurts concept diversity\n";
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"encoder", to_string(encoder)},
        {"hidden_dim", hidden_dim},
        {"num_concepts", num_concepts},
        {"agg_dropout", agg_dropout},
        {"classifier_dropout", classifier_dropout},
        {"classifier_hidden_dim", classifier_hidden_dim},
        {"num_labels", num_labels},
        {"vocab_size", vocab_size},
        {"diversity_penalty", diversity_penalty},
        {"seed", seed},
        {"learning_rate", learning_rate},
        {"beta1", beta1},
        {"beta2", beta2},
        {"epsilon", epsilon},
        {"batch_size", batch_size},
        {"epochs", epochs},
    };
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("encoder")) encoder_assign(c, j["encoder"].get<std::string>());
    get("hidden_dim", c.hidden_dim);
    get("num_concepts", c.num_concepts);
    get("agg_dropout", c.agg_dropout);
    get("classifier_dropout", c.classifier_dropout);
    get("classifier_hidden_dim", c.classifier_hidden_dim);
    get("num_labels", c.num_labels);
    get("vocab_size", c.vocab_size);
    get("diversity_penalty", c.diversity_penalty);
    get("seed", c.seed);
    get("learning_rate", c.learning_rate);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("epsilon", c.epsilon);
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    return c;
  }

 private:
  static void encoder_assign(ModelConfig& c, const std::string& s) {
    c.encoder = encoder_from_string(s);
  }
};

// Every trainable tensor. The recurrent cell is shared between the forward
// and backward directions, each producing hidden_dim/2 of the final state.
struct AanParameters {
  Tensor embeddings;            // |V| x H
  Tensor rnn_w_ih;              // H/2 x H (recurrent only)
  Tensor rnn_w_hh;              // H/2 x H/2
  Tensor rnn_b;                 // H/2
  Tensor g_abs;                 // K x H, one attention vector per concept
  Tensor w_agg;                 // H x H
  Tensor b_agg;                 // H
  Tensor g_agg;                 // H
  Tensor w1;                    // Ch x H
  Tensor b1;                    // Ch
  Tensor w2;                    // L x Ch
  Tensor b2;                    // L
  bool has_rnn = false;

  // Weights uniform in [-0.1, 0.1], biases zero. Rows of g_abs come from
  // consecutive draws so the concepts break symmetry from the start.
  static AanParameters init(const ModelConfig& cfg, ndgrad::Rng& rng) {
    auto U = [&](std::size_t r, std::size_t c) {
      Tensor t({r, c});
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-0.1, 0.1);
      return t;
    };
    auto Uv = [&](std::size_t n) {
      Tensor t({n});
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-0.1, 0.1);
      return t;
    };
    const auto H = static_cast<std::size_t>(cfg.hidden_dim);
    const auto K = static_cast<std::size_t>(cfg.num_concepts);
    const auto Ch = static_cast<std::size_t>(cfg.classifier_hidden_dim);
    const auto L = static_cast<std::size_t>(cfg.num_labels);
    AanParameters p;
    p.embeddings = U(static_cast<std::size_t>(cfg.vocab_size), H);
    if (cfg.encoder == EncoderKind::kRecurrent) {
      p.has_rnn = true;
      p.rnn_w_ih = U(H / 2, H);
      p.rnn_w_hh = U(H / 2, H / 2);
      p.rnn_b = Tensor({H / 2});
    }
    p.g_abs = U(K, H);
    p.w_agg = U(H, H);
    p.b_agg = Tensor({H});
    p.g_agg = Uv(H);
    p.w1 = U(Ch, H);
    p.b1 = Tensor({Ch});
    p.w2 = U(L, Ch);
    p.b2 = Tensor({L});
    return p;
  }

  // Fixed manifest order; checkpoints and Adam state both rely on it.
  std::vector<std::pair<std::string, Tensor*>> named() {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.emplace_back("embeddings", &embeddings);
    if (has_rnn) {
      out.emplace_back("rnn_w_ih", &rnn_w_ih);
      out.emplace_back("rnn_w_hh", &rnn_w_hh);
      out.emplace_back("rnn_b", &rnn_b);
    }
    out.emplace_back("g_abs", &g_abs);
    out.emplace_back("w_agg", &w_agg);
    out.emplace_back("b_agg", &b_agg);
    out.emplace_back("g_agg", &g_agg);
    out.emplace_back("w1", &w1);
    out.emplace_back("b1", &b1);
    out.emplace_back("w2", &w2);
    out.emplace_back("b2", &b2);
    return out;
  }

  std::vector<std::pair<std::string, const Tensor*>> named() const {
    auto mut = const_cast<AanParameters*>(this)->named();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [n, t] : mut) out.emplace_back(n, t);
    return out;
  }
};

// Per-document attention state captured at inference; input to every
// explanation computation.
struct ForwardRecord {
  std::int64_t doc_id = 0;
  Tensor alpha_abs;  // K x T, rows sum to 1
  Tensor alpha_agg;  // K, sums to 1 at inference
  Tensor v_abs;      // K x H
  Tensor v_doc;      // H
  Tensor y;          // L, sums to 1
  int predicted_label = 0;
};

// Inverted-dropout masks, drawn outside the tape. Entries are 0 with
// probability rate, else 1/(1-rate).
inline Tensor dropout_mask(std::size_t n, double rate, ndgrad::Rng& rng) {
  Tensor mask({n});
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < n; ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

struct ParamNodes {
  NodeId embeddings = -1;
  NodeId rnn_w_ih = -1, rnn_w_hh = -1, rnn_b = -1;
  NodeId g_abs = -1, w_agg = -1, b_agg = -1, g_agg = -1;
  NodeId w1 = -1, b1 = -1, w2 = -1, b2 = -1;
  std::vector<NodeId> ordered;  // matches AanParameters::named()
};

inline ParamNodes stage_parameters(Tape& tape, const AanParameters& params) {
  ParamNodes n;
  n.embeddings = tape.leaf(params.embeddings);
  n.ordered.push_back(n.embeddings);
  if (params.has_rnn) {
    n.rnn_w_ih = tape.leaf(params.rnn_w_ih);
    n.rnn_w_hh = tape.leaf(params.rnn_w_hh);
    n.rnn_b = tape.leaf(params.rnn_b);
    n.ordered.insert(n.ordered.end(), {n.rnn_w_ih, n.rnn_w_hh, n.rnn_b});
  }
  n.g_abs = tape.leaf(params.g_abs);
  n.w_agg = tape.leaf(params.w_agg);
  n.b_agg = tape.leaf(params.b_agg);
  n.g_agg = tape.leaf(params.g_agg);
  n.w1 = tape.leaf(params.w1);
  n.b1 = tape.leaf(params.b1);
  n.w2 = tape.leaf(params.w2);
  n.b2 = tape.leaf(params.b2);
  n.ordered.insert(n.ordered.end(),
                   {n.g_abs, n.w_agg, n.b_agg, n.g_agg, n.w1, n.b1, n.w2, n.b2});
  return n;
}

struct DocMasks {
  Tensor agg;  // K, empty if agg dropout is off
  Tensor cls;  // Ch, empty if classifier dropout is off
};

// Draw this document's masks in a fixed order (agg first, then classifier)
// so a training run is a pure function of the seed.
inline DocMasks draw_masks(const ModelConfig& cfg, ndgrad::Rng& rng) {
  DocMasks m;
  if (cfg.agg_dropout > 0.0)
    m.agg = dropout_mask(static_cast<std::size_t>(cfg.num_concepts), cfg.agg_dropout, rng);
  if (cfg.classifier_dropout > 0.0)
    m.cls = dropout_mask(static_cast<std::size_t>(cfg.classifier_hidden_dim),
                         cfg.classifier_dropout, rng);
  return m;
}

struct DocGraph {
  NodeId hidden = -1;     // T x H
  NodeId alpha_abs = -1;  // K x T
  NodeId alpha_agg = -1;  // K (post-mask when training)
  NodeId v_abs = -1;      // K x H
  NodeId v_doc = -1;      // H
  NodeId y = -1;          // L
  NodeId ce = -1;         // scalar, only when gold >= 0
  NodeId penalty = -1;    // scalar, only when cfg.diversity_penalty
};

// T x H hidden states. embedding_only: plain lookup. recurrent: one shared
// tanh Elman cell run in both directions, halves concatenated per position.
inline NodeId encode(Tape& tape, const ParamNodes& p, const ModelConfig& cfg,
                     const std::vector<int>& tokens) {
  check(!tokens.empty(), "encode: empty document");
  NodeId emb = tape.gather_rows(p.embeddings, tokens);
  if (cfg.encoder == EncoderKind::kEmbeddingOnly) return emb;

  const std::size_t T = tokens.size();
  const std::size_t half = static_cast<std::size_t>(cfg.hidden_dim) / 2;
  auto run = [&](bool reverse) {
    std::vector<NodeId> states(T);
    NodeId h = tape.leaf(Tensor({half}));  // zero initial state
    for (std::size_t s = 0; s < T; ++s) {
      std::size_t t = reverse ? T - 1 - s : s;
      NodeId x = tape.row(emb, static_cast<int>(t));
      NodeId pre = tape.add_n({tape.matvec(p.rnn_w_ih, x), tape.matvec(p.rnn_w_hh, h), p.rnn_b});
      h = tape.tanh(pre);
      states[t] = h;
    }
    return states;
  };
  auto fwd = run(false);
  auto bwd = run(true);
  std::vector<NodeId> rows(T);
  for (std::size_t t = 0; t < T; ++t) rows[t] = tape.concat(fwd[t], bwd[t]);
  return tape.stack_rows(rows);
}

// Alignment by plain dot product, softmax over positions per concept; no
// linear transform or tanh on purpose, so each attention vector acts as a
// cluster centroid over token states.
inline std::pair<NodeId, NodeId> abstraction_attention(Tape& tape, NodeId g_abs,
                                                       NodeId hidden) {
  NodeId u = tape.matmul_nt(g_abs, hidden);  // K x T
  NodeId alpha = tape.softmax(u);
  NodeId v_abs = tape.matmul(alpha, hidden);  // K x H
  return {alpha, v_abs};
}

// Single attention unit over the K concept representations. The training
// mask multiplies the weights directly with no renormalization: inverted
// dropout keeps the expectation equal to the undropped weights, and at
// inference the sum-to-1 invariant is exact.
inline std::pair<NodeId, NodeId> aggregation_attention(Tape& tape, const ParamNodes& p,
                                                       NodeId v_abs,
                                                       const Tensor* agg_mask) {
  NodeId z = tape.tanh(tape.add_bias(tape.matmul_nt(v_abs, p.w_agg), p.b_agg));
  NodeId u = tape.matvec(z, p.g_agg);  // K
  NodeId alpha = tape.softmax(u);
  if (agg_mask != nullptr) alpha = tape.apply_mask(alpha, *agg_mask);
  NodeId v_doc = tape.matvec_t(v_abs, alpha);  // H
  return {alpha, v_doc};
}

inline NodeId classify(Tape& tape, const ParamNodes& p, NodeId v_doc,
                       const Tensor* cls_mask) {
  NodeId h = tape.relu(tape.add(tape.matvec(p.w1, v_doc), p.b1));
  if (cls_mask != nullptr) h = tape.apply_mask(h, *cls_mask);
  NodeId logits = tape.add(tape.matvec(p.w2, h), p.b2);
  return tape.softmax(logits);
}

// (1/K) * ||A^T A - I||_F where A has one column per concept's attention
// distribution. Zero exactly when the columns are orthonormal.
inline NodeId diversity_penalty(Tape& tape, NodeId alpha_abs, int num_concepts) {
  NodeId gram = tape.matmul_nt(alpha_abs, alpha_abs);  // K x K = A^T A
  Tensor neg_i = Tensor::identity(static_cast<std::size_t>(num_concepts));
  for (std::size_t i = 0; i < neg_i.numel(); ++i) neg_i[i] = -neg_i[i];
  NodeId diff = tape.add(gram, tape.leaf(std::move(neg_i)));
  return tape.scale(tape.frobenius_norm(diff), 1.0 / num_concepts);
}

// Full per-document graph. gold < 0 skips the cross-entropy node; a null
// masks pointer means inference (no dropout anywhere).
inline DocGraph build_doc_graph(Tape& tape, const ParamNodes& p, const ModelConfig& cfg,
                                const std::vector<int>& tokens, int gold,
                                const DocMasks* masks) {
  DocGraph g;
  g.hidden = encode(tape, p, cfg, tokens);
  std::tie(g.alpha_abs, g.v_abs) = abstraction_attention(tape, p.g_abs, g.hidden);
  const Tensor* agg_mask =
      masks != nullptr && masks->agg.numel() > 0 && masks->agg.rank() == 1 ? &masks->agg : nullptr;
  std::tie(g.alpha_agg, g.v_doc) = aggregation_attention(tape, p, g.v_abs, agg_mask);
  const Tensor* cls_mask =
      masks != nullptr && masks->cls.numel() > 0 && masks->cls.rank() == 1 ? &masks->cls : nullptr;
  g.y = classify(tape, p, g.v_doc, cls_mask);
  if (gold >= 0) g.ce = tape.scale(tape.log(tape.pick(g.y, gold)), -1.0);
  if (cfg.diversity_penalty) g.penalty = diversity_penalty(tape, g.alpha_abs, cfg.num_concepts);
  return g;
}

inline int argmax(const Tensor& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.numel(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

inline ForwardRecord predict(const corpus::Document& doc, const AanParameters& params,
                             const ModelConfig& cfg) {
  Tape tape;
  ParamNodes p = stage_parameters(tape, params);
  DocGraph g = build_doc_graph(tape, p, cfg, doc.tokens, -1, nullptr);
  ForwardRecord r;
  r.doc_id = doc.id;
  r.alpha_abs = tape.value(g.alpha_abs);
  r.alpha_agg = tape.value(g.alpha_agg);
  r.v_abs = tape.value(g.v_abs);
  r.v_doc = tape.value(g.v_doc);
  r.y = tape.value(g.y);
  r.predicted_label = argmax(r.y);
  return r;
}

inline std::vector<ForwardRecord> predict_all(const corpus::Corpus& corpus,
                                              const AanParameters& params,
                                              const ModelConfig& cfg) {
  std::vector<ForwardRecord> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus.docs()) out.push_back(predict(d, params, cfg));
  return out;
}

inline double accuracy(const corpus::Corpus& corpus, const AanParameters& params,
                       const ModelConfig& cfg) {
  check(corpus.size() > 0, "accuracy: empty corpus");
  std::size_t correct = 0;
  for (const auto& d : corpus.docs())
    if (predict(d, params, cfg).predicted_label == d.gold_label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(corpus.size());
}

}  // namespace aan::model
