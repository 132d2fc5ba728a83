#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "cavp/data/synth.hpp"
#include "cavp/substrate/grad_check.hpp"
#include "cavp/training/trainer.hpp"

using namespace cavp;
using namespace cavp::training;
using Catch::Approx;

namespace {

ModelConfig tiny(std::size_t V, CaptionMode mode = CaptionMode::sentence) {
  ModelConfig c;
  c.mode = mode;
  c.vocab_size = V;
  c.embed_size = 4;
  c.hidden_size = 5;
  c.attn_size = 4;
  c.region_dim = 6;
  return c;
}

RegionFeatureSet<double> random_regions(std::size_t k, std::size_t D, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> r({k, D});
  for (auto& v : r.storage()) v = uniform(rng, -1, 1);
  return RegionFeatureSet<double>(std::move(r));
}

SentenceModel<double> sentence_model(std::size_t V, std::uint64_t seed) {
  SentenceModel<double> m(tiny(V));
  m.initialize(seed);
  Rng rng(seed + 500);
  for (auto& w : m.output_weight().value.storage()) w = uniform(rng, -2, 2);
  return m;
}

ParagraphModel<double> paragraph_model(std::size_t V, std::uint64_t seed) {
  ParagraphModel<double> m(tiny(V, CaptionMode::paragraph));
  m.initialize(seed);
  Rng rng(seed + 500);
  for (auto& w : m.word_weight().value.storage()) w = uniform(rng, -2, 2);
  return m;
}

/// Snapshot of every gradient in the store.
std::vector<std::vector<double>> gradients(const ParameterStore<double>& s) {
  std::vector<std::vector<double>> out;
  for (const auto& p : s) out.push_back(p->grad.storage());
  return out;
}

std::vector<std::vector<double>> values(const ParameterStore<double>& s) {
  std::vector<std::vector<double>> out;
  for (const auto& p : s) out.push_back(p->value.storage());
  return out;
}

double max_abs_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

const Reward kBleu1{metrics::RewardSpec::named("BLEU-1"), nullptr};

}  // namespace

// ---- cross-entropy ----------------------------------------------------------

TEST_CASE("xe loss examples", "[xe]") {
  auto rf = random_regions(3, 6, 1);
  SentenceModel<double> m(tiny(5));
  m.initialize(2);
  m.output_weight().value.fill(0.0);
  SECTION("uniform over four usable words") {
    m.output_bias().value[kPad] = -1e4;  // PAD is never a target; the rest share the mass
    Graph<double> g;
    auto r = xe_loss(g, m, rf, {4, 3, kEos});
    REQUIRE(g.scalar(r.loss) == Approx(3 * std::log(4.0)).margin(1e-12));
    REQUIRE(r.tokens == 3);
  }
  SECTION("certain model has zero loss") {
    m.output_bias().value[kEos] = 1e3;
    Graph<double> g;
    REQUIRE(g.scalar(xe_loss(g, m, rf, {kEos}).loss) == 0.0);
  }
  SECTION("trailing PAD is masked") {
    Graph<double> g1, g2;
    REQUIRE(g1.scalar(xe_loss(g1, m, rf, {4, kEos, kPad, kPad}).loss) == g2.scalar(xe_loss(g2, m, rf, {4, kEos}).loss));
  }
  SECTION("invalid targets") {
    Graph<double> g;
    REQUIRE_THROWS_AS(xe_loss(g, m, rf, {}), std::invalid_argument);
    REQUIRE_THROWS_AS(xe_loss(g, m, rf, {4, 4}), std::invalid_argument);
  }
}

TEST_CASE("xe loss gradient passes finite differences", "[xe][gradcheck]") {
  auto m = sentence_model(9, 3);
  auto rf = random_regions(4, 6, 3);
  const ExpertPolicy expert(Vocabulary({"a", "dog", "runs", "the", "on"}));
  GradCheckOptions opt;
  opt.samples_per_parameter = 4;
  auto rep = grad_check<double>([&](Graph<double>& g) { return xe_bc_loss(g, m, rf, {4, 7, 5, kEos}, &expert, 1.0); },
                                all_parameters(m.parameters()), opt);
  INFO(rep.worst_parameter << " a=" << rep.worst_analytic << " n=" << rep.worst_numeric);
  REQUIRE(rep.max_rel_error < 1e-4);
}

// ---- behavior cloning -----------------------------------------------------------

TEST_CASE("KL divergence examples", "[bc]") {
  const std::vector<double> u = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  REQUIRE(kl_divergence(u, u) == Approx(0.0).margin(1e-7));
  REQUIRE(kl_divergence(std::vector<double>{1, 0, 0}, u) == Approx(std::log(3.0)).margin(1e-7));
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p(3), q(3);
    double sp = 0, sq = 0;
    for (int i = 0; i < 3; ++i) sp += p[i] = uniform01(rng), sq += q[i] = uniform01(rng);
    for (int i = 0; i < 3; ++i) p[i] /= sp, q[i] /= sq;
    REQUIRE(kl_divergence(p, q) >= -1e-12);
  }
}

TEST_CASE("behavior cloning term on the graph", "[bc]") {
  Graph<double> g;
  Var uni = g.input(Tensor<double>({3}, 1.0 / 3));
  Var xe = g.input(Tensor<double>::vector({2.0}));
  SECTION("one-hot expert against uniform output") {
    Var loss = behavior_cloning_loss(g, {uni, uni}, {OutputPrior{1, 0, 0}, OutputPrior{0, 0, 1}}, xe, 1.0);
    REQUIRE(g.scalar(loss) == Approx(2.0 + 2 * std::log(3.0)).margin(1e-7));
  }
  SECTION("matching expert adds nothing") {
    Var loss = behavior_cloning_loss(g, {uni}, {OutputPrior{1.0 / 3, 1.0 / 3, 1.0 / 3}}, xe, 1.0);
    REQUIRE(g.scalar(loss) == Approx(2.0).margin(1e-7));
  }
  SECTION("mu scales the term") {
    Var loss = behavior_cloning_loss(g, {uni}, {OutputPrior{1, 0, 0}}, xe, 0.5);
    REQUIRE(g.scalar(loss) == Approx(2.0 + 0.5 * std::log(3.0)).margin(1e-7));
  }
}

TEST_CASE("expert policy heuristic", "[bc][expert]") {
  Vocabulary v({"a", "horse", "on", "the", "riding"});
  ExpertPolicy e(v);
  REQUIRE(e(v.id("a")) == OutputPrior{0, 0, 1});
  REQUIRE(e(v.id("the")) == OutputPrior{0, 0, 1});
  REQUIRE(e(kEos) == OutputPrior{0, 0, 1});
  REQUIRE(e(v.id("horse")) == OutputPrior{0.5, 0.5, 0});
  REQUIRE(e(v.id("riding")) == OutputPrior{0.5, 0.5, 0});
}

// ---- self-critical ----------------------------------------------------------------

namespace {

/// sum_t log pi(y_t) under teacher forcing, recorded on g.
Var forced_logprob(Graph<double>& g, const SentenceModel<double>& m, const RegionFeatureSet<double>& rf,
                   const std::vector<TokenId>& y) {
  SentenceSession<double> s(g, m, rf);
  auto st = s.initial();
  return g.sum(teacher_force(s, st, y));
}

std::vector<TokenId> replay_sample(const SentenceModel<double>& m, const RegionFeatureSet<double>& rf,
                                   std::uint64_t seed, std::size_t max_len) {
  Graph<double> g;
  SentenceSession<double> s(g, m, rf);
  Rng rng(seed);
  return decode_sample(s, max_len, rng).tokens;
}

}  // namespace

TEST_CASE("zero advantage gives an exactly zero gradient", "[scst]") {
  auto m = sentence_model(8, 1);
  m.output_weight().value.fill(0.0);
  m.output_bias().value[6] = 800.0;  // sample and greedy both emit 6 every step
  auto rf = random_regions(3, 6, 1);
  m.parameters().zero_grad();
  auto r = scst_step(m, rf, {{5, 6}}, kBleu1, 7, 5);
  REQUIRE(r.sample == r.greedy);
  REQUIRE(r.advantage == 0.0);
  REQUIRE_FALSE(r.has_signal);
  REQUIRE(all_gradients_zero(m.parameters()));
}

TEST_CASE("a policy-gradient step moves log-probability with the advantage", "[scst]") {
  auto rf = random_regions(4, 6, 2);
  int positive = 0, negative = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto m = sentence_model(8, 10 + seed);
    auto sample = replay_sample(m, rf, seed, 6);
    // Reward the sample (A > 0) or the greedy caption (A < 0).
    Graph<double> gg;
    SentenceSession<double> sg(gg, m, rf);
    auto greedy = decode_greedy(sg, 6).content();
    const bool favour_sample = seed % 2 == 0;
    References refs = {favour_sample ? content_ids(sample) : greedy};
    if (refs[0].empty()) continue;
    m.parameters().zero_grad();
    auto r = scst_step(m, rf, refs, kBleu1, seed, 6);
    if (!r.has_signal) continue;
    Graph<double> g0;
    const double before = g0.scalar(forced_logprob(g0, m, rf, sample));
    for (auto& p : m.parameters())
      for (std::size_t j = 0; j < p->size(); ++j) p->value[j] -= 1e-6 * p->grad[j];
    Graph<double> g1;
    const double after = g1.scalar(forced_logprob(g1, m, rf, sample));
    INFO("seed " << seed << " A=" << r.advantage);
    if (r.advantage > 0) {
      REQUIRE(after > before);
      ++positive;
    } else {
      REQUIRE(after < before);
      ++negative;
    }
  }
  REQUIRE(positive > 0);
  REQUIRE(negative > 0);
}

TEST_CASE("self-critical gradient matches finite differences", "[scst][gradcheck]") {
  auto m = sentence_model(8, 21);
  auto rf = random_regions(4, 6, 21);
  const std::uint64_t seed = 3;
  auto sample = replay_sample(m, rf, seed, 6);
  References refs = {content_ids(sample)};
  m.parameters().zero_grad();
  auto r = scst_step(m, rf, refs, kBleu1, seed, 6);
  REQUIRE(r.has_signal);
  const auto analytic = gradients(m.parameters());

  const double A = r.advantage;
  auto surrogate = [&](Graph<double>& g) { return g.scale(forced_logprob(g, m, rf, sample), -A); };
  GradCheckOptions opt;
  opt.samples_per_parameter = 4;
  auto rep = grad_check<double>(surrogate, all_parameters(m.parameters()), opt);
  REQUIRE(rep.max_rel_error < 1e-4);
  // grad_check leaves the surrogate's own gradient in the store
  REQUIRE(max_abs_diff(analytic, gradients(m.parameters())) < 1e-12);
}

// ---- paragraph losses ---------------------------------------------------------------

TEST_CASE("paragraph xe loss", "[paragraph][xe]") {
  auto rf = random_regions(4, 6, 3);
  const std::vector<std::vector<TokenId>> para = {{4, 5, kEos}, {6, kEos}};
  SECTION("lambda_s = 0 leaves the summed word XE") {
    auto m = paragraph_model(9, 3);
    Graph<double> g;
    Var loss = paragraph_xe_loss(g, m, rf, para, {1.0, 0.0});
    Graph<double> g2;
    ParagraphRollout<double> roll(g2, m, rf);
    auto f = teacher_force_paragraph(roll, para);
    double words = 0.0;
    for (const auto& s : f.word_logprobs)
      for (auto v : s) words -= g2.scalar(v);
    REQUIRE(g.scalar(loss) == Approx(words).epsilon(1e-14));
  }
  SECTION("perfect predictions give zero loss") {
    auto m = paragraph_model(9, 3);
    m.word_weight().value.fill(0.0);
    m.word_visual_weight().value.fill(0.0);
    m.word_bias().value[kEos] = 1e3;
    m.stop_weight().value.fill(0.0);
    m.stop_bias().value[kStop] = 1e3;
    Graph<double> g;
    REQUIRE(g.scalar(paragraph_xe_loss(g, m, rf, {{kEos}})) == 0.0);
  }
  SECTION("stop term weights the labels") {
    auto m = paragraph_model(9, 3);
    m.stop_weight().value.fill(0.0);
    m.stop_bias().value.fill(0.0);
    Graph<double> g1, g2;
    const double with = g1.scalar(paragraph_xe_loss(g1, m, rf, para, {1.0, 5.0}));
    const double without = g2.scalar(paragraph_xe_loss(g2, m, rf, para, {1.0, 0.0}));
    REQUIRE(with - without == Approx(5.0 * 2 * std::log(2.0)).epsilon(1e-12));
  }
  SECTION("empty paragraph") {
    auto m = paragraph_model(9, 3);
    Graph<double> g;
    REQUIRE_THROWS_AS(paragraph_xe_loss(g, m, rf, {}), std::invalid_argument);
  }
}

TEST_CASE("paragraph loss gradient passes finite differences", "[paragraph][gradcheck]") {
  auto m = paragraph_model(9, 4);
  auto rf = random_regions(4, 6, 4);
  const ExpertPolicy expert(Vocabulary({"a", "dog", "runs", "the", "on"}));
  GradCheckOptions opt;
  opt.samples_per_parameter = 3;
  auto rep = grad_check<double>(
      [&](Graph<double>& g) { return paragraph_xe_loss(g, m, rf, {{4, 5, kEos}, {7, kEos}}, {}, &expert, 1.0); },
      all_parameters(m.parameters()), opt);
  INFO(rep.worst_parameter << " a=" << rep.worst_analytic << " n=" << rep.worst_numeric);
  REQUIRE(rep.max_rel_error < 1e-4);
}

// ---- paragraph self-critical ------------------------------------------------------------

namespace {

/// Samples produced by the sentence-level schedule, replayed with the same RNG stream.
std::vector<std::vector<TokenId>> replay_sentence_samples(const ParagraphModel<double>& m,
                                                          const RegionFeatureSet<double>& rf,
                                                          const std::vector<std::vector<TokenId>>& gt,
                                                          std::uint64_t seed, std::size_t max_words) {
  Rng rng(seed);
  std::vector<std::vector<TokenId>> out;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    Graph<double> g;
    ParagraphRollout<double> roll(g, m, rf);
    feed_sentences(roll, {gt.begin(), gt.begin() + static_cast<std::ptrdiff_t>(i)});
    auto [sent, words] = roll.next_sentence();
    out.push_back(decode_sample(words, max_words, rng).tokens);
  }
  return out;
}

}  // namespace

TEST_CASE("sentence-level reward with zero advantages gives zero gradient", "[paragraph][scst]") {
  auto m = paragraph_model(9, 5);
  m.word_weight().value.fill(0.0);
  m.word_visual_weight().value.fill(0.0);
  m.word_bias().value[7] = 800.0;
  auto rf = random_regions(4, 6, 5);
  m.parameters().zero_grad();
  const std::vector<std::vector<TokenId>> gt = {{4, 5, kEos}, {6, kEos}};
  auto r = paragraph_scst_step(m, rf, gt, {{4, 5, 6}}, kBleu1, RewardLevel::sentence, 1, {6, 4});
  REQUIRE(r.sample == r.greedy);
  REQUIRE_FALSE(r.has_signal);
  REQUIRE(all_gradients_zero(m.parameters()));
  Graph<double> g;
  Rng rng(0);
  REQUIRE_THROWS_AS(paragraph_scst_rollout(g, m, rf, {}, {{4}}, kBleu1, RewardLevel::sentence, rng),
                    std::invalid_argument);
}

TEST_CASE("one-sentence paragraphs make both reward levels agree", "[paragraph][scst]") {
  auto rf = random_regions(4, 6, 6);
  int informative = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = paragraph_model(9, 60 + seed);
    m.stop_weight().value.fill(0.0);
    m.stop_bias().value[kStop] = 50.0;  // every paragraph ends after one sentence
    const ParagraphLimits lim{6, 5};
    auto sample = replay_sentence_samples(m, rf, {{4, kEos}}, seed, lim.max_words)[0];
    if (content_ids(sample).empty()) continue;
    const std::vector<std::vector<TokenId>> gt = {sample};
    const References refs = {content_ids(sample)};

    m.parameters().zero_grad();
    auto a = paragraph_scst_step(m, rf, gt, refs, kBleu1, RewardLevel::paragraph, seed, lim);
    const auto ga = gradients(m.parameters());
    m.parameters().zero_grad();
    auto b = paragraph_scst_step(m, rf, gt, refs, kBleu1, RewardLevel::sentence, seed, lim);
    const auto gb = gradients(m.parameters());
    REQUIRE(a.sample == b.sample);
    REQUIRE(a.advantage == b.advantage);
    REQUIRE(max_abs_diff(ga, gb) < 1e-12);
    informative += a.has_signal;
  }
  REQUIRE(informative > 0);
}

TEST_CASE("sentence-level self-critical gradient matches finite differences", "[paragraph][scst][gradcheck]") {
  auto m = paragraph_model(9, 7);
  auto rf = random_regions(4, 6, 7);
  const std::uint64_t seed = 4;
  const std::size_t max_words = 5;
  const std::vector<std::vector<TokenId>> probe = {{4, 5, kEos}, {6, kEos}};
  auto samples = replay_sentence_samples(m, rf, probe, seed, max_words);
  // Ground truth: first sentence equals its sample, so A_1 = 1 - r(greedy_1) is nonzero unless greedy agrees.
  const std::vector<std::vector<TokenId>> gt = {samples[0], {6, 4, kEos}};
  samples = replay_sentence_samples(m, rf, gt, seed, max_words);

  m.parameters().zero_grad();
  auto r = paragraph_scst_step(m, rf, gt, {}, kBleu1, RewardLevel::sentence, seed, {6, max_words});
  REQUIRE(r.has_signal);
  const auto analytic = gradients(m.parameters());

  std::vector<double> adv;
  for (std::size_t i = 0; i < gt.size(); ++i)
    adv.push_back(kBleu1(r.sample[i], {content_ids(gt[i])}) - kBleu1(r.greedy[i], {content_ids(gt[i])}));
  auto surrogate = [&](Graph<double>& g) {
    std::vector<Var> terms;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      ParagraphRollout<double> roll(g, m, rf);
      feed_sentences(roll, {gt.begin(), gt.begin() + static_cast<std::ptrdiff_t>(i)});
      auto [sent, words] = roll.next_sentence();
      auto st = words.initial();
      terms.push_back(g.scale(g.sum(teacher_force(words, st, samples[i])), -adv[i]));
    }
    return g.sum(terms);
  };
  GradCheckOptions opt;
  opt.samples_per_parameter = 3;
  auto rep = grad_check<double>(surrogate, all_parameters(m.parameters()), opt);
  INFO(rep.worst_parameter << " a=" << rep.worst_analytic << " n=" << rep.worst_numeric);
  REQUIRE(rep.max_rel_error < 1e-4);
  REQUIRE(max_abs_diff(analytic, gradients(m.parameters())) < 1e-12);
  REQUIRE(parse_reward_level("paragraph") == RewardLevel::paragraph);
  REQUIRE_THROWS(parse_reward_level("word"));
}

// ---- optimizer --------------------------------------------------------------------------

TEST_CASE("Adam", "[adam]") {
  ParameterStore<double> store;
  auto& p = store.add("p", {3});
  p.value = Tensor<double>::vector({1.0, -2.0, 0.5});
  const auto init = p.value;
  Adam<double> adam(store);

  SECTION("zero gradient leaves parameters and moments untouched") {
    adam.step(1e-3);
    REQUIRE(p.value == init);
    REQUIRE(adam.first_moment(0) == Tensor<double>({3}));
    REQUIRE(adam.second_moment(0) == Tensor<double>({3}));
  }
  SECTION("moments decay under a zero gradient") {
    p.grad = Tensor<double>::vector({1.0, 2.0, -3.0});
    adam.step(1e-3);
    const auto m1 = adam.first_moment(0), v1 = adam.second_moment(0);
    p.zero_grad();
    adam.step(1e-3);
    for (std::size_t j = 0; j < 3; ++j) {
      REQUIRE(adam.first_moment(0)[j] == Approx(0.9 * m1[j]).epsilon(1e-15));
      REQUIRE(adam.second_moment(0)[j] == Approx(0.999 * v1[j]).epsilon(1e-15));
    }
  }
  SECTION("first step has magnitude lr") {
    p.grad = Tensor<double>::vector({0.3, -7.0, 1e-2});
    adam.step(1e-3);
    for (std::size_t j = 0; j < 3; ++j) REQUIRE(std::abs(p.value[j] - init[j]) == Approx(1e-3).epsilon(1e-5));
    REQUIRE(adam.steps() == 1);
  }
  SECTION("ten steps against the textbook recurrence") {
    Rng rng(4);
    std::vector<double> theta = init.storage(), m(3, 0.0), v(3, 0.0);
    for (int t = 1; t <= 10; ++t) {
      for (std::size_t j = 0; j < 3; ++j) p.grad[j] = uniform(rng, -1, 1);
      const double lr = 1e-2 / t;
      for (std::size_t j = 0; j < 3; ++j) {
        const double g = p.grad[j];
        m[j] = 0.9 * m[j] + 0.1 * g;
        v[j] = 0.999 * v[j] + 0.001 * g * g;
        const double mh = m[j] / (1 - std::pow(0.9, t)), vh = v[j] / (1 - std::pow(0.999, t));
        theta[j] -= lr * mh / (std::sqrt(vh) + 1e-8);
      }
      adam.step(lr);
      for (std::size_t j = 0; j < 3; ++j) REQUIRE(std::abs(p.value[j] - theta[j]) < 1e-14);
    }
  }
  SECTION("non-finite gradients abort the step") {
    p.grad = Tensor<double>::vector({1.0, std::nan(""), 0.0});
    REQUIRE_THROWS_AS(adam.step(1e-3), NumericError);
    REQUIRE(p.value == init);
    REQUIRE(adam.steps() == 0);
  }
}

TEST_CASE("gradient clipping and learning-rate schedule", "[adam][schedule]") {
  ParameterStore<double> store;
  auto& a = store.add("a", {2});
  auto& b = store.add("b", {1});
  a.grad = Tensor<double>::vector({12.0, 0.0});
  b.grad = Tensor<double>::vector({16.0});
  REQUIRE(grad_norm(store) == 20.0);
  REQUIRE(clip_grad_norm(store, 10.0) == 20.0);
  REQUIRE(grad_norm(store) == Approx(10.0).epsilon(1e-15));
  REQUIRE(a.grad[0] == Approx(6.0).epsilon(1e-15));
  REQUIRE(clip_grad_norm(store, 100.0) == Approx(10.0).epsilon(1e-15));

  LrSchedule s{5e-4, 0.8, 3};
  REQUIRE(s.rate(0) == 5e-4);
  REQUIRE(s.rate(2) == 5e-4);
  REQUIRE(s.rate(3) == Approx(4e-4).epsilon(1e-15));
  REQUIRE(s.rate(6) == Approx(3.2e-4).epsilon(1e-15));
  LrSchedule rl{5e-5, 0.1, 55};
  REQUIRE(rl.rate(54) == 5e-5);
  REQUIRE(rl.rate(55) == Approx(5e-6).epsilon(1e-15));
}

TEST_CASE("training configuration", "[config]") {
  TrainConfig c;
  REQUIRE(c.xe_epochs == 37);
  REQUIRE(c.xe_lr.base == 5e-4);
  REQUIRE(c.lambda_s == 5.0);
  REQUIRE(TrainConfig::paragraph_defaults().reward == "BLEU-4");
  REQUIRE_THROWS_AS(c.merge_json({{"learning_rate", 1}}), ConfigError);
  REQUIRE_THROWS_AS(c.merge_json({{"xe_lr", {{"base", 1e-3}, {"warmup", 2}}}}), ConfigError);
  REQUIRE_THROWS_AS(c.merge_json({{"reward", "METEOR"}}), ConfigError);
  REQUIRE_THROWS_AS(c.merge_json({{"xe_lr", {{"decay", 1.5}}}}), ConfigError);
  REQUIRE_THROWS_AS(c.merge_json({{"lambda_s", -1}}), ConfigError);
  TrainConfig d;
  d.merge_json({{"phase", "XE"}, {"xe_lr", {{"base", 1e-3}}}, {"seed", 9}});
  REQUIRE(d.phase == Phase::xe);
  REQUIRE(d.xe_lr.base == 1e-3);
  REQUIRE(d.xe_lr.decay == 0.8);
  TrainConfig e;
  e.merge_json(d.to_json());
  REQUIRE(e.to_json() == d.to_json());
}

// ---- end-to-end training ------------------------------------------------------------------

namespace {

data::Dataset synthetic(bool paragraph, std::size_t n = 20) {
  data::SynthOptions o;
  o.n_images = n;
  o.paragraph = paragraph;
  return data::to_dataset(data::synth_dataset(o));
}

ModelConfig model_for(const data::Dataset& ds, CaptionMode mode) {
  auto c = tiny(ds.vocab.size(), mode);
  c.region_dim = ds.region_dim();
  c.hidden_size = 16;
  c.attn_size = 16;
  c.embed_size = 8;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cavp_training_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("zero epochs keep the initialisation", "[train]") {
  auto ds = synthetic(false, 4);
  SentenceModel<double> m(model_for(ds, CaptionMode::sentence));
  m.initialize(3);
  const auto init = values(m.parameters());
  TrainConfig cfg;
  cfg.xe_epochs = 0;
  cfg.rl_epochs = 0;
  auto dir = temp_dir("zero");
  auto reports = train(m, ds, cfg, {dir});
  REQUIRE(reports.empty());
  REQUIRE(values(m.parameters()) == init);
  SentenceModel<double> loaded(m.config());
  apply_checkpoint(load_checkpoint_file(dir / "final.ckpt"), loaded.parameters());
  REQUIRE(values(loaded.parameters()) == init);
  REQUIRE(std::filesystem::exists(dir / "model.json"));
  REQUIRE(std::filesystem::exists(dir / "log.csv"));
}

TEST_CASE("training rejects mismatched models", "[train]") {
  auto ds = synthetic(false, 3);
  auto cfg_model = model_for(ds, CaptionMode::sentence);
  cfg_model.vocab_size += 1;
  SentenceModel<double> m(cfg_model);
  REQUIRE_THROWS_AS(train(m, ds, TrainConfig{}), ConfigError);
  auto para = paragraph_model(ds.vocab.size(), 1);
  REQUIRE_THROWS(train(para, ds, TrainConfig{}));
}

TEST_CASE("training is bitwise reproducible", "[train][determinism]") {
  auto ds = synthetic(false, 6);
  auto run = [&] {
    SentenceModel<double> m(model_for(ds, CaptionMode::sentence));
    m.initialize(5);
    TrainConfig cfg;
    cfg.xe_epochs = 2;
    cfg.rl_epochs = 2;
    cfg.batch_size = 4;
    cfg.seed = 11;
    cfg.rl_lr.base = 1e-3;
    std::ostringstream log;
    TrainOutput out;
    out.log = &log;
    auto reports = train(m, ds, cfg, out);
    REQUIRE(reports.size() == 4);
    REQUIRE(reports[2].mean_reward_sample.has_value());
    return std::make_pair(values(m.parameters()), log.str());
  };
  auto a = run(), b = run();
  REQUIRE(a.first == b.first);
  REQUIRE(a.second == b.second);
}

TEST_CASE("paragraph training runs both phases", "[train][paragraph]") {
  auto ds = synthetic(true, 4);
  ParagraphModel<double> m(model_for(ds, CaptionMode::paragraph));
  m.initialize(2);
  auto cfg = TrainConfig::paragraph_defaults();
  cfg.xe_epochs = 2;
  cfg.rl_epochs = 1;
  cfg.batch_size = 2;
  auto reports = train(m, ds, cfg);
  REQUIRE(reports.size() == 3);
  REQUIRE(reports[0].phase == Phase::xe);
  REQUIRE(reports[2].phase == Phase::rl);
  for (const auto& r : reports) REQUIRE(std::isfinite(r.mean_loss));
}

TEST_CASE("XE loss decreases monotonically on the synthetic set", "[train][slow]") {
  auto ds = synthetic(false, 20);
  SentenceModel<double> m(model_for(ds, CaptionMode::sentence));
  m.initialize(0);
  TrainConfig cfg;
  cfg.phase = Phase::xe;
  cfg.xe_epochs = 200;
  cfg.xe_lr = {2e-3, 0.9, 10};
  cfg.eval_train_cider = false;
  auto reports = train(m, ds, cfg);
  REQUIRE(reports.size() == 200);
  for (std::size_t e = 5; e + 1 < reports.size(); ++e) {
    INFO("epoch " << reports[e + 1].epoch << ": " << reports[e].mean_loss << " -> " << reports[e + 1].mean_loss);
    REQUIRE(reports[e + 1].mean_loss < reports[e].mean_loss);
  }
}
