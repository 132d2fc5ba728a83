#pragma once

#include <string>

#include "cavp/substrate/graph.hpp"
#include "cavp/substrate/parameter.hpp"

namespace cavp {

template <class T>
struct LstmState {
  Var h;
  Var c;
};

/// Weights of one LSTM cell. Gate rows are laid out [input; forget; output; candidate].
template <class T = double>
struct LstmCell {
  Parameter<T>* W = nullptr;  // [4H x (input + H)]
  Parameter<T>* b = nullptr;  // [4H]
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  static LstmCell create(ParameterStore<T>& store, const std::string& prefix, std::size_t input, std::size_t hidden) {
    LstmCell cell;
    cell.W = &store.add(prefix + ".W", {4 * hidden, input + hidden});
    cell.b = &store.add(prefix + ".b", {4 * hidden});
    cell.input_size = input;
    cell.hidden_size = hidden;
    return cell;
  }

  /// Fan-in uniform weights, zero biases except forget gate = 1.
  void initialize(Rng& rng) const {
    init_uniform_fan_in(*W, rng);
    b->value.fill(T(0));
    for (std::size_t k = hidden_size; k < 2 * hidden_size; ++k) b->value[k] = T(1);
  }

  LstmState<T> zero_state(Graph<T>& g) const { return {g.zeros(hidden_size), g.zeros(hidden_size)}; }
};

/// One LSTM step: gates from affine(concat(x, h_prev)), c = f*c_prev + i*g, h = o*tanh(c).
template <class T>
LstmState<T> lstm_cell(Graph<T>& g, const LstmCell<T>& cell, Var x, const LstmState<T>& prev) {
  const std::size_t H = cell.hidden_size;
  if (g.dim(prev.h) != H || g.dim(prev.c) != H)
    throw DimensionError("lstm: state " + shape_string(g.shape(prev.h)) + "/" + shape_string(g.shape(prev.c)) +
                         " does not match hidden size " + std::to_string(H));
  if (g.dim(x) != cell.input_size)
    throw DimensionError("lstm: input " + shape_string(g.shape(x)) + " does not match input size " +
                         std::to_string(cell.input_size));
  Var z = g.affine(g.param(*cell.W), g.concat({x, prev.h}), g.param(*cell.b));
  Var hc = g.lstm_gates(z, prev.c);
  return {g.slice(hc, 0, H), g.slice(hc, H, H)};
}

}  // namespace cavp
