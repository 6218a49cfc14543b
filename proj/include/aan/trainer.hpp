#pragma once

#include <iostream>
#include <string>
#include <vector>

#include "aan/adam.hpp"
#include "aan/model.hpp"

namespace aan::model {

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainResult {
  AanParameters params;  // best-dev snapshot
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_dev_accuracy = 0.0;
};

// Mini-batch Adam over shuffled documents; the snapshot with the highest
// dev accuracy wins, later epochs taking ties (the penalty keeps refining
// concept structure after accuracy saturates). Loss is mean cross-entropy
// plus mean diversity penalty over the batch. Single-threaded and fully
// determined by cfg.seed.
inline TrainResult train(const corpus::Corpus& train_corpus,
                         const corpus::Corpus& dev_corpus, ModelConfig cfg,
                         std::ostream* log = nullptr) {
  check(train_corpus.size() > 0 && dev_corpus.size() > 0, "train: empty corpus");
  cfg.vocab_size = static_cast<int>(train_corpus.vocab().size());
  cfg.num_labels = static_cast<int>(train_corpus.labels().size());
  cfg.validate();

  ndgrad::Rng rng(cfg.seed);
  AanParameters params = AanParameters::init(cfg, rng);
  std::vector<Tensor*> tensors;
  for (auto& [name, t] : params.named()) tensors.push_back(t);
  ndgrad::AdamState adam(
      ndgrad::AdamConfig{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon}, tensors);

  TrainResult result;
  result.best_dev_accuracy = -1.0;
  std::vector<std::size_t> order(train_corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto B = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += B) {
      std::size_t end = std::min(order.size(), start + B);
      Tape tape;
      ParamNodes nodes = stage_parameters(tape, params);
      std::vector<NodeId> ces, pens;
      for (std::size_t i = start; i < end; ++i) {
        const auto& doc = train_corpus.docs()[order[i]];
        DocMasks masks = draw_masks(cfg, rng);
        DocGraph g = build_doc_graph(tape, nodes, cfg, doc.tokens, doc.gold_label, &masks);
        ces.push_back(g.ce);
        if (g.penalty >= 0) pens.push_back(g.penalty);
      }
      double inv = 1.0 / static_cast<double>(end - start);
      NodeId loss = tape.scale(tape.add_n(ces), inv);
      if (!pens.empty()) loss = tape.add(loss, tape.scale(tape.add_n(pens), inv));
      double loss_value = tape.value(loss)[0];
      check(std::isfinite(loss_value),
            "train: loss is not finite at epoch " + std::to_string(epoch) +
                ", batch starting at document " + std::to_string(start));
      epoch_loss += loss_value * static_cast<double>(end - start);
      tape.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(nodes.ordered.size());
      for (NodeId id : nodes.ordered) grads.push_back(tape.grad(id));
      adam.step(tensors, grads);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(order.size());
    stats.dev_accuracy = accuracy(dev_corpus, params, cfg);
    result.history.push_back(stats);
    if (log != nullptr)
      *log << "epoch\t" << epoch << "\ttrain_loss\t" << stats.train_loss
           << "\tdev_acc\t" << stats.dev_accuracy << "\n";
    if (stats.dev_accuracy >= result.best_dev_accuracy) {
      result.best_dev_accuracy = stats.dev_accuracy;
      result.best_epoch = epoch;
      result.params = params;
    }
  }
  return result;
}

}  // namespace aan::model
