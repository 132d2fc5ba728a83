#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cavp/substrate/graph.hpp"
#include "cavp/substrate/parameter.hpp"

namespace cavp::training {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over every parameter of a store.
template <class T>
class Adam {
 public:
  explicit Adam(ParameterStore<T>& store, AdamConfig cfg = {}) : store_(&store), cfg_(cfg) {
    for (const auto& p : store) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  std::size_t steps() const noexcept { return t_; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor<T>& second_moment(std::size_t i) const { return v_.at(i); }

  /// Applies one update from the accumulated gradients. A non-finite
  /// gradient aborts the step before anything is modified.
  void step(double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
    for (const auto& p : *store_)
      if (!p->grad.all_finite()) throw NumericError("adam: non-finite gradient in " + p->name);
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t i = 0;
    for (auto& p : *store_) {
      auto& m = m_[i].storage();
      auto& v = v_[i].storage();
      auto& w = p->value.storage();
      const auto& g = p->grad.storage();
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = static_cast<double>(g[j]);
        const double mj = cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * gj;
        const double vj = cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        w[j] -= static_cast<T>(lr * (mj / c1) / (std::sqrt(vj / c2) + cfg_.eps));
      }
      ++i;
    }
  }

 private:
  ParameterStore<T>* store_;
  AdamConfig cfg_;
  std::vector<Tensor<T>> m_, v_;
  std::size_t t_ = 0;
};

template <class T>
double grad_norm(const ParameterStore<T>& store) {
  double s = 0.0;
  for (const auto& p : store)
    for (auto g : p->grad.storage()) s += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(s);
}

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <class T>
double clip_grad_norm(ParameterStore<T>& store, double max_norm) {
  const double n = grad_norm(store);
  if (max_norm > 0.0 && n > max_norm) {
    const T s = static_cast<T>(max_norm / n);
    for (auto& p : store)
      for (auto& g : p->grad.storage()) g *= s;
  }
  return n;
}

template <class T>
bool all_gradients_zero(const ParameterStore<T>& store) {
  for (const auto& p : store)
    for (auto g : p->grad.storage())
      if (g != T(0)) return false;
  return true;
}

/// base * decay^floor(epoch / interval), epoch counted from 0 within a phase.
struct LrSchedule {
  double base = 5e-4;
  double decay = 0.8;
  std::size_t interval = 3;

  double rate(std::size_t epoch) const {
    return base * std::pow(decay, static_cast<double>(interval ? epoch / interval : 0));
  }
};

}  // namespace cavp::training
