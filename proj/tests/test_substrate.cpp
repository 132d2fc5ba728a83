#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "cavp/substrate/checkpoint.hpp"
#include "cavp/substrate/grad_check.hpp"
#include "cavp/substrate/graph.hpp"
#include "cavp/substrate/lstm.hpp"
#include "cavp/substrate/random.hpp"

using namespace cavp;
using Catch::Approx;

namespace {

Tensor<double> random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor<double> t(std::move(s));
  for (auto& x : t.storage()) x = uniform(rng, -scale, scale);
  return t;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("tensor shapes and accessors", "[tensor]") {
  Tensor<double> m({2, 3});
  REQUIRE(m.size() == 6);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  m(1, 2) = 4.0;
  REQUIRE(m[5] == 4.0);
  REQUIRE(m.row(1)[2] == 4.0);
  REQUIRE_THROWS_AS(Tensor<double>({0}), DimensionError);
  REQUIRE_THROWS_AS(Tensor<double>({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  auto f = m.cast<float>();
  REQUIRE(f(1, 2) == 4.0f);
  m[0] = std::nan("");
  REQUIRE_FALSE(m.all_finite());
}

TEST_CASE("affine examples", "[affine]") {
  Graph<double> g;
  SECTION("identity") {
    Tensor<double> I({3, 3});
    for (int i = 0; i < 3; ++i) I(i, i) = 1.0;
    auto y = g.affine(g.input(I), g.input(Tensor<double>::vector({1, 2, 3})), g.input(Tensor<double>({3})));
    REQUIRE(g.value(y) == Tensor<double>::vector({1, 2, 3}));
  }
  SECTION("zero map with bias") {
    auto y = g.affine(g.input(Tensor<double>({2, 2})), g.input(Tensor<double>::vector({0.3, -7})),
                      g.input(Tensor<double>::vector({5, 5})));
    REQUIRE(g.value(y) == Tensor<double>::vector({5, 5}));
  }
  SECTION("hand product") {
    auto y = g.affine(g.input(Tensor<double>::matrix(2, 2, {1, 2, 3, 4})), g.input(Tensor<double>::vector({1, 1})));
    REQUIRE(g.value(y) == Tensor<double>::vector({3, 7}));
  }
  SECTION("shape mismatch names both shapes") {
    try {
      g.affine(g.input(Tensor<double>({2, 3})), g.input(Tensor<double>({2})));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      REQUIRE(msg.find("[2x3]") != std::string::npos);
      REQUIRE(msg.find("[2]") != std::string::npos);
    }
  }
}

TEST_CASE("softmax examples and properties", "[softmax]") {
  Graph<double> g;
  auto s = g.value(g.softmax(g.input(Tensor<double>::vector({0, 0, 0}))));
  for (int i = 0; i < 3; ++i) REQUIRE(s[i] == Approx(1.0 / 3).epsilon(1e-14));

  s = g.value(g.softmax(g.input(Tensor<double>::vector({std::log(2.0), 0, 0}))));
  REQUIRE(s[0] == Approx(0.5).margin(1e-15));
  REQUIRE(s[1] == Approx(0.25).margin(1e-15));
  REQUIRE(s[2] == Approx(0.25).margin(1e-15));

  s = g.value(g.softmax(g.input(Tensor<double>::vector({1000, 0}))));
  REQUIRE(s.all_finite());
  REQUIRE(s[0] == Approx(1.0));
  REQUIRE(s[1] < 1e-300);

  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    auto x = random_tensor({n}, rng, 30.0);
    auto p = g.value(g.softmax(g.input(x)));
    double sum = 0.0;
    for (auto v : p.storage()) {
      REQUIRE(v > 0.0);
      REQUIRE(v <= 1.0);
      sum += v;
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-12);
    // permutation equivariance: reversing the input reverses the output
    Tensor<double> rev({n});
    for (std::size_t i = 0; i < n; ++i) rev[i] = x[n - 1 - i];
    auto q = g.value(g.softmax(g.input(rev)));
    for (std::size_t i = 0; i < n; ++i) REQUIRE(q[i] == Approx(p[n - 1 - i]).epsilon(1e-14));
  }
  REQUIRE(softmax(std::vector<double>{0.0, 0.0})[1] == 0.5);
}

TEST_CASE("lstm cell examples", "[lstm]") {
  ParameterStore<double> store;
  auto cell = LstmCell<double>::create(store, "cell", 4, 3);
  Graph<double> g;

  SECTION("zero fixed point") {
    auto st = lstm_cell(g, cell, g.zeros(4), cell.zero_state(g));
    for (auto v : g.value(st.h).storage()) REQUIRE(v == 0.0);
    for (auto v : g.value(st.c).storage()) REQUIRE(v == 0.0);
  }
  SECTION("zero params halve the cell") {
    auto c = Tensor<double>::vector({1.0, -2.0, 0.5});
    auto st = lstm_cell(g, cell, g.zeros(4), {g.zeros(3), g.input(c)});
    for (int i = 0; i < 3; ++i) {
      REQUIRE(g.value(st.c)[i] == Approx(0.5 * c[i]).margin(1e-15));
      REQUIRE(g.value(st.h)[i] == Approx(0.5 * std::tanh(0.5 * c[i])).margin(1e-15));
    }
  }
  SECTION("hidden size mismatch") {
    REQUIRE_THROWS_AS(lstm_cell(g, cell, g.zeros(4), {g.zeros(2), g.zeros(3)}), DimensionError);
    REQUIRE_THROWS_AS(lstm_cell(g, cell, g.zeros(5), cell.zero_state(g)), DimensionError);
  }
}

TEST_CASE("lstm cell matches direct gate equations", "[lstm][oracle]") {
  const std::size_t in = 5, H = 5;
  ParameterStore<double> store;
  auto cell = LstmCell<double>::create(store, "cell", in, H);
  Rng rng(11);
  cell.W->value = random_tensor({4 * H, in + H}, rng);
  cell.b->value = random_tensor({4 * H}, rng);
  auto x = random_tensor({in}, rng), h0 = random_tensor({H}, rng), c0 = random_tensor({H}, rng);

  Graph<double> g;
  auto st = lstm_cell(g, cell, g.input(x), {g.input(h0), g.input(c0)});

  std::vector<double> z(4 * H);
  for (std::size_t r = 0; r < 4 * H; ++r) {
    double acc = cell.b->value[r];
    for (std::size_t j = 0; j < in; ++j) acc += cell.W->value(r, j) * x[j];
    for (std::size_t j = 0; j < H; ++j) acc += cell.W->value(r, in + j) * h0[j];
    z[r] = acc;
  }
  for (std::size_t k = 0; k < H; ++k) {
    const double i = sigmoid_ref(z[k]), f = sigmoid_ref(z[H + k]), o = sigmoid_ref(z[2 * H + k]);
    const double gg = std::tanh(z[3 * H + k]);
    const double c = f * c0[k] + i * gg;
    REQUIRE(std::abs(g.value(st.c)[k] - c) < 1e-12);
    REQUIRE(std::abs(g.value(st.h)[k] - o * std::tanh(c)) < 1e-12);
  }
}

TEST_CASE("lstm initialisation", "[lstm][init]") {
  ParameterStore<double> store;
  auto cell = LstmCell<double>::create(store, "cell", 6, 4);
  Rng rng(1);
  cell.initialize(rng);
  const double a = 1.0 / std::sqrt(10.0);
  for (auto w : cell.W->value.storage()) REQUIRE(std::abs(w) <= a);
  for (std::size_t k = 0; k < 16; ++k) REQUIRE(cell.b->value[k] == (k >= 4 && k < 8 ? 1.0 : 0.0));
}

TEST_CASE("embedding lookup", "[embedding]") {
  ParameterStore<double> store;
  auto& table = store.add("W_e", {5, 2});
  table.value(3, 0) = 1.0;
  table.value(3, 1) = 2.0;
  Graph<double> g;
  auto e = g.embedding(g.param(table), 3);
  REQUIRE(g.value(e) == Tensor<double>::vector({1, 2}));
  REQUIRE_THROWS_AS(g.embedding(g.param(table), 5), std::out_of_range);

  Graph<double> g2;
  auto a = g2.embedding(g2.param(table), 0);
  auto b = g2.embedding(g2.param(table), 0);
  auto loss = g2.add(g2.dot(a, g2.input(Tensor<double>::vector({1, 2}))), g2.dot(b, g2.input(Tensor<double>::vector({10, 20}))));
  g2.backward(loss);
  REQUIRE(table.grad(0, 0) == 11.0);
  REQUIRE(table.grad(0, 1) == 22.0);
  for (std::size_t r = 1; r < 5; ++r) REQUIRE(table.grad(r, 0) == 0.0);
}

TEST_CASE("grad_check examples", "[gradcheck]") {
  ParameterStore<double> store;
  auto& theta = store.add("theta", {1});
  theta.value[0] = 3.0;
  auto rep = grad_check<double>([&](Graph<double>& g) {
    auto t = g.param(theta);
    return g.mul(t, t);
  }, {&theta}, {});
  REQUIRE(rep.worst_analytic == Approx(6.0).epsilon(1e-12));
  REQUIRE(rep.max_rel_error < 1e-9);

  auto flat = grad_check<double>([&](Graph<double>& g) { return g.input(Tensor<double>::vector({4.0})); }, {&theta}, {});
  REQUIRE(flat.worst_analytic == 0.0);
  REQUIRE(flat.worst_numeric == 0.0);
  REQUIRE(flat.max_rel_error == 0.0);

  REQUIRE_THROWS_AS(grad_check<double>([&](Graph<double>& g) { return g.log(g.input(Tensor<double>::vector({-1.0}))); },
                                       {&theta}, {}),
                    NumericError);
}

TEST_CASE("every operator passes finite differences on random inputs", "[gradcheck][property]") {
  Rng rng(2024);
  ParameterStore<double> store;
  auto& A = store.add("A", {4, 3});
  auto& B = store.add("B", {5, 3});
  auto& u = store.add("u", {3});
  auto& v = store.add("v", {4});
  auto& w = store.add("w", {4});
  auto& E = store.add("E", {6, 3});
  auto& z = store.add("z", {16});
  auto& c = store.add("c", {4});
  for (auto& p : store) p->value = random_tensor(p->value.shape(), rng);
  for (auto& x : v.value.storage()) x = std::abs(x) + 0.5;  // positive for log
  auto params = all_parameters(store);
  GradCheckOptions opt;
  opt.samples_per_parameter = 0;

  const std::vector<std::pair<std::string, std::function<Var(Graph<double>&)>>> cases = {
      {"affine", [&](Graph<double>& g) { return g.sum(g.tanh(g.affine(g.param(A), g.param(u), g.param(w)))); }},
      {"rows_affine", [&](Graph<double>& g) { return g.sum(g.tanh(g.rows_affine(g.param(B), g.param(A)))); }},
      {"add_to_rows", [&](Graph<double>& g) {
         return g.sum(g.tanh(g.add_to_rows(g.rows_affine(g.param(B), g.param(A)), g.param(w))));
       }},
      {"weighted_sum", [&](Graph<double>& g) {
         Var p = g.softmax(g.affine(g.param(B), g.param(u)));
         return g.dot(g.weighted_sum(p, g.param(B)), g.param(u));
       }},
      {"mul/sub/scale", [&](Graph<double>& g) {
         return g.sum(g.scale(g.mul(g.param(w), g.sub(g.param(v), g.param(c))), 0.7));
       }},
      {"sigmoid/log", [&](Graph<double>& g) { return g.sum(g.mul(g.log(g.param(v)), g.sigmoid(g.param(w)))); }},
      {"softmax", [&](Graph<double>& g) { return g.dot(g.softmax(g.param(w)), g.param(c)); }},
      {"log_softmax", [&](Graph<double>& g) { return g.pick(g.log_softmax(g.param(w)), 2); }},
      {"concat/slice", [&](Graph<double>& g) {
         Var cat = g.concat({g.param(u), g.param(w)});
         return g.sum(g.tanh(g.mul(g.slice(cat, 2, 4), g.param(c))));
       }},
      {"stack_rows", [&](Graph<double>& g) {
         Var m = g.stack_rows({g.param(u), g.tanh(g.param(u))});
         return g.sum(g.tanh(g.rows_affine(m, g.param(A))));
       }},
      {"prepend_to_rows", [&](Graph<double>& g) {
         Var m = g.prepend_to_rows(g.param(u), g.param(B));
         return g.sum(g.tanh(m));
       }},
      {"embedding", [&](Graph<double>& g) {
         return g.dot(g.embedding(g.param(E), 4), g.tanh(g.embedding(g.param(E), 1)));
       }},
      {"lstm_gates", [&](Graph<double>& g) {
         Var hc = g.lstm_gates(g.param(z), g.param(c));
         return g.dot(hc, g.concat({g.param(w), g.param(v)}));
       }},
  };
  for (const auto& [name, f] : cases) {
    INFO(name);
    auto rep = grad_check<double>(f, params, opt);
    REQUIRE(rep.max_rel_error < 1e-4);
  }
}

TEST_CASE("graph backward semantics", "[graph]") {
  ParameterStore<double> store;
  auto& p = store.add("p", {2});
  p.value = Tensor<double>::vector({1.0, 2.0});
  Graph<double> g;
  auto loss = g.dot(g.param(p), g.param(p));
  g.backward(loss);
  REQUIRE(p.grad == Tensor<double>::vector({2.0, 4.0}));
  REQUIRE_THROWS_AS(g.backward(loss), std::logic_error);
  REQUIRE_THROWS_AS(Graph<double>().backward(Graph<double>().zeros(1)), std::out_of_range);

  Graph<double> g2;
  REQUIRE_THROWS_AS(g2.backward(g2.param(p)), DimensionError);

  g.clear();
  p.zero_grad();
  auto loss2 = g.sum(g.param(p));
  g.backward(loss2, 0.5);
  REQUIRE(p.grad == Tensor<double>::vector({0.5, 0.5}));
}

TEST_CASE("forward pass is bitwise repeatable", "[graph][determinism]") {
  Rng rng(3);
  ParameterStore<double> store;
  auto cell = LstmCell<double>::create(store, "c", 7, 6);
  cell.initialize(rng);
  auto x = random_tensor({7}, rng);
  auto run = [&] {
    Graph<double> g;
    auto st = cell.zero_state(g);
    for (int t = 0; t < 5; ++t) st = lstm_cell(g, cell, g.input(x), st);
    return g.value(st.h);
  };
  REQUIRE(run() == run());
}

TEST_CASE("parameter store", "[parameter]") {
  ParameterStore<double> store;
  store.add("a.W", {2, 3});
  store.add("a.b", {2});
  REQUIRE_THROWS_AS(store.add("a.W", {1}), std::invalid_argument);
  REQUIRE(store.count() == 2);
  REQUIRE(store.scalar_count() == 8);
  REQUIRE(store.find("missing") == nullptr);
  REQUIRE_THROWS_AS(store.at("missing"), std::out_of_range);
  REQUIRE(store[0].name == "a.W");
  REQUIRE(store[0].grad.shape() == store[0].value.shape());
}

TEST_CASE("random helpers are seeded", "[random]") {
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) REQUIRE(uniform01(a) == uniform01(b));
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(r);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(uniform_index(r, 7) < 7);
  }
  std::vector<int> v = {1, 2, 3, 4, 5};
  auto w = v;
  Rng s1(4), s2(4);
  shuffle(v.begin(), v.end(), s1);
  shuffle(w.begin(), w.end(), s2);
  REQUIRE(v == w);
}

TEST_CASE("checkpoint round trip is bit exact", "[checkpoint]") {
  Rng rng(77);
  ParameterStore<double> a;
  a.add("x.W", {3, 4});
  a.add("x.b", {3});
  for (auto& p : a) p->value = random_tensor(p->value.shape(), rng, 1e3);
  a[0].value[5] = -0.0;
  a[1].value[2] = 1e-310;

  std::stringstream ss;
  write_checkpoint(ss, a, config_hash({{"k", 1}}));
  const auto ck = read_checkpoint(ss);
  REQUIRE(ck.header["format_version"] == 1);
  REQUIRE(ck.config_hash() == config_hash({{"k", 1}}));
  REQUIRE(ck.order == std::vector<std::string>{"x.W", "x.b"});

  ParameterStore<double> b;
  b.add("x.W", {3, 4});
  b.add("x.b", {3});
  apply_checkpoint(ck, b);
  for (std::size_t i = 0; i < a.count(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j)
      REQUIRE(std::bit_cast<std::uint64_t>(a[i].value[j]) == std::bit_cast<std::uint64_t>(b[i].value[j]));

  ParameterStore<double> wrong;
  wrong.add("x.W", {4, 3});
  wrong.add("x.b", {3});
  REQUIRE_THROWS_AS(apply_checkpoint(ck, wrong), io::FormatError);

  std::stringstream bad("NOTACKPT");
  REQUIRE_THROWS_AS(read_checkpoint(bad), io::FormatError);
  REQUIRE(config_hash({{"k", 1}}) != config_hash({{"k", 2}}));
  REQUIRE(config_hash({{"k", 1}}).size() == 16);
}
