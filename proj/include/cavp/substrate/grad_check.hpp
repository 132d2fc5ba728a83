#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cavp/substrate/graph.hpp"
#include "cavp/substrate/parameter.hpp"
#include "cavp/substrate/random.hpp"

namespace cavp {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// Coordinates sampled per parameter; 0 checks every coordinate.
  std::size_t samples_per_parameter = 8;
  /// Denominator floor, multiplied by max(1, |f|), so that gradients at the
  /// roundoff level of the loss compare absolutely.
  double abs_floor = 1e-6;
  std::uint64_t seed = 0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences on a random sample of coordinates and returns the largest
/// relative error |a - n| / max(|a|, |n|, floor).
///
/// `f` records the forward pass on the supplied graph and returns the scalar
/// loss; it must be deterministic in the parameter values.
template <class T>
GradCheckReport grad_check(const std::function<Var(Graph<T>&)>& f, const std::vector<Parameter<T>*>& params,
                           const GradCheckOptions& opt = {}) {
  if (!(opt.eps > 0)) throw std::invalid_argument("grad_check: eps must be positive");
  auto evaluate = [&]() {
    Graph<T> g;
    Var loss = f(g);
    const double v = static_cast<double>(g.scalar(loss));
    if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
    return v;
  };

  for (auto* p : params) p->zero_grad();
  double f0 = 0.0;
  {
    Graph<T> g;
    Var loss = f(g);
    f0 = static_cast<double>(g.scalar(loss));
    if (!std::isfinite(f0)) throw NumericError("grad_check: function value is not finite");
    g.backward(loss);
  }
  const double floor = opt.abs_floor * std::max(1.0, std::abs(f0));
  std::vector<Tensor<T>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  Rng rng(opt.seed);
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = *params[pi];
    std::vector<std::size_t> coords;
    if (opt.samples_per_parameter == 0 || opt.samples_per_parameter >= p.size()) {
      coords.resize(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) coords[i] = i;
    } else {
      for (std::size_t s = 0; s < opt.samples_per_parameter; ++s) coords.push_back(uniform_index(rng, p.size()));
    }
    for (auto idx : coords) {
      const T saved = p.value[idx];
      p.value[idx] = saved + static_cast<T>(opt.eps);
      const double fp = evaluate();
      p.value[idx] = saved - static_cast<T>(opt.eps);
      const double fm = evaluate();
      p.value[idx] = saved;
      const double numeric = (fp - fm) / (2.0 * opt.eps);
      const double a = static_cast<double>(analytic[pi][idx]);
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error || report.worst_parameter.empty()) {
        if (rel >= report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_parameter = p.name;
          report.worst_index = idx;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

template <class T>
std::vector<Parameter<T>*> all_parameters(ParameterStore<T>& store) {
  std::vector<Parameter<T>*> out;
  for (auto& p : store) out.push_back(p.get());
  return out;
}

}  // namespace cavp
