#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "aan/tensor.hpp"

namespace aan::ndgrad {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Standard Adam with bias correction. Moments are keyed by position in the
// parameter list; the list order must stay fixed for the life of the state.
class AdamState {
 public:
  AdamState(AdamConfig cfg, const std::vector<Tensor*>& params) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
      m_.emplace_back(Tensor(p->shape()));
      v_.emplace_back(Tensor(p->shape()));
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return step_; }

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    check(params.size() == m_.size() && grads.size() == m_.size(),
          "adam: parameter list changed size");
    for (const Tensor& g : grads)
      check(g.all_finite(), "adam: non-finite gradient, aborting training");
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      Tensor& param = *params[p];
      const Tensor& g = grads[p];
      check(param.same_shape(g), "adam: gradient shape mismatch");
      for (std::size_t i = 0; i < param.numel(); ++i) {
        m_[p][i] = cfg_.beta1 * m_[p][i] + (1.0 - cfg_.beta1) * g[i];
        v_[p][i] = cfg_.beta2 * v_[p][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        double mhat = m_[p][i] / bc1;
        double vhat = v_[p][i] / bc2;
        param[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace aan::ndgrad
