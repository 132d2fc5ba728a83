#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cavp/substrate/random.hpp"
#include "cavp/substrate/tensor.hpp"

namespace cavp {

template <class T = double>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() { grad.fill(T(0)); }
};

/// Owns the trainable parameters of one model. Addresses are stable for the
/// lifetime of the store; iteration follows registration order.
template <class T = double>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter<T>& add(const std::string& name, Shape shape) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter<T>>(name, Tensor<T>(std::move(shape))));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  Parameter<T>& at(const std::string& name) {
    auto* p = find(name);
    if (!p) throw std::out_of_range("unknown parameter: " + name);
    return *p;
  }

  std::size_t count() const noexcept { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (auto& p : params_) n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Uniform in [-a, a] with a = 1/sqrt(fan_in), fan_in being the column count
/// (or the length of a vector parameter).
template <class T>
void init_uniform_fan_in(Parameter<T>& p, Rng& rng) {
  const double fan_in = static_cast<double>(p.value.rank() == 2 ? p.value.cols() : p.value.size());
  const double a = 1.0 / std::sqrt(fan_in);
  for (auto& x : p.value.storage()) x = static_cast<T>(uniform(rng, -a, a));
}

}  // namespace cavp
