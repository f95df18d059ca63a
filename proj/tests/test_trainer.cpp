#include <doctest.h>

#include <cmath>

#include "pgen/error.hpp"
#include "pgen/gradcheck.hpp"
#include "pgen/trainer.hpp"

using namespace pgen;

namespace {

NetworkConfig tiny(Preset preset, CellType cell, double dropout = 0.0) {
  NetworkConfig c;
  c.preset = preset;
  c.cell = cell;
  c.vocab_size = 5;
  c.hidden1 = c.hidden2 = 4;
  c.dense1 = c.dense2 = 4;
  c.dropout = dropout;
  c.window_length = 3;
  return c;
}

void randomize(NetworkParams& p, Rng& rng) {
  for (auto& t : tensors(p)) {
    for (Eigen::Index i = 0; i < t.values.size(); ++i) {
      t.values.data()[i] = 1.6 * rng.uniform() - 0.8;
    }
  }
}

double loss_at(const NetworkParams& p, const NetworkConfig& c,
               const std::vector<CharIndex>& window, CharIndex target, std::uint64_t mask_seed) {
  Rng rng(mask_seed);
  return cross_entropy(forward_window(p, c, window, Mode::kTrain, rng).probs, target);
}

// Central differences of `loss`, one coordinate at a time.
template <typename LossFn>
Gradients finite_differences(NetworkParams p, LossFn loss, double delta) {
  Gradients g = p;
  auto params = tensors(p);
  auto grads = tensors(g);
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k].values.size(); ++i) {
      double& x = params[k].values.data()[i];
      const double saved = x;
      x = saved + delta;
      const double up = loss(p);
      x = saved - delta;
      const double down = loss(p);
      x = saved;
      grads[k].values.data()[i] = (up - down) / (2.0 * delta);
    }
  }
  return g;
}

double max_relative_error(const Gradients& analytic, const Gradients& numeric) {
  const auto a = tensors(analytic);
  const auto n = tensors(numeric);
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (Eigen::Index i = 0; i < a[k].values.size(); ++i) {
      const double x = a[k].values.data()[i];
      const double y = n[k].values.data()[i];
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-6}));
    }
  }
  return worst;
}

PatternDataset dataset_from(const std::u32string& text, std::size_t window, Vocabulary& vocab) {
  const CorpusText corpus{text, ""};
  vocab = build_vocabulary(corpus);
  return extract_patterns(corpus, vocab, {window});
}

}  // namespace

TEST_CASE("cross_entropy") {
  const Vector uniform = Vector::Constant(4, 0.25);
  for (CharIndex t = 0; t < 4; ++t) CHECK(std::abs(cross_entropy(uniform, t) - 1.3862943611198906) < 1e-15);
  Vector certain = Vector::Zero(3);
  certain(1) = 1.0;
  CHECK(cross_entropy(certain, 1) == 0.0);
  CHECK(std::isfinite(cross_entropy(certain, 0)));
  CHECK(cross_entropy(certain, 0) == -std::log(1e-300));
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vector p(6);
    for (Eigen::Index i = 0; i < 6; ++i) p(i) = rng.uniform() + 0.01;
    p /= p.sum();
    const auto t = static_cast<CharIndex>(rng.uniform_index(6));
    CHECK(std::abs(cross_entropy(p, t) + std::log(p(t))) <= 1e-15);
  }
  CHECK_THROWS_AS(cross_entropy(uniform, 4), Error);
  CHECK_THROWS_AS(cross_entropy(uniform, -1), Error);
}

TEST_CASE("backward_window gradients have parameter shapes") {
  for (Preset preset : {Preset::kBaseline, Preset::kDeep}) {
    for (CellType cell : {CellType::kGru, CellType::kLstm}) {
      const NetworkConfig c = tiny(preset, cell, 0.3);
      Rng rng(1);
      const NetworkParams p = init_params(c, rng);
      const std::vector<CharIndex> window{1, 2, 3};
      const auto fwd = forward_window(p, c, window, Mode::kTrain, rng);
      const Gradients g = backward_window(p, c, fwd.tape, 4);
      CHECK_NOTHROW(check_params(g, c));
      for (const auto& t : tensors(g)) CHECK(t.values.allFinite());
      CHECK_THROWS_AS(backward_window(p, c, fwd.tape, 5), Error);
    }
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  for (Preset preset : {Preset::kBaseline, Preset::kDeep}) {
    for (CellType cell : {CellType::kGru, CellType::kLstm}) {
      const NetworkConfig c = tiny(preset, cell);
      for (std::uint64_t point = 0; point < 3; ++point) {
        CAPTURE(to_string(preset));
        CAPTURE(to_string(cell));
        CAPTURE(point);
        Rng rng(100 + point);
        NetworkParams p = zero_params(c);
        randomize(p, rng);
        const std::vector<CharIndex> window{static_cast<CharIndex>(rng.uniform_index(5)),
                                            static_cast<CharIndex>(rng.uniform_index(5)),
                                            static_cast<CharIndex>(rng.uniform_index(5))};
        const auto target = static_cast<CharIndex>(rng.uniform_index(5));
        Rng unused(0);
        const auto fwd = forward_window(p, c, window, Mode::kTrain, unused);
        const Gradients analytic = backward_window(p, c, fwd.tape, target);
        const Gradients numeric = finite_differences(
            p, [&](const NetworkParams& q) { return loss_at(q, c, window, target, 0); }, 1e-5);
        CHECK(max_relative_error(analytic, numeric) < 1e-4);
      }
    }
  }
}

TEST_CASE("gradients flow through recorded dropout masks") {
  for (CellType cell : {CellType::kGru, CellType::kLstm}) {
    NetworkConfig c = tiny(Preset::kDeep, cell, 0.3);
    Rng rng(7);
    NetworkParams p = zero_params(c);
    randomize(p, rng);
    const std::vector<CharIndex> window{0, 4, 2};
    const std::uint64_t mask_seed = 99;
    Rng masks(mask_seed);
    const auto fwd = forward_window(p, c, window, Mode::kTrain, masks);
    const Gradients analytic = backward_window(p, c, fwd.tape, 1);
    const Gradients numeric = finite_differences(
        p, [&](const NetworkParams& q) { return loss_at(q, c, window, 1, mask_seed); }, 1e-5);
    CHECK(max_relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("library gradient check agrees") {
  for (Preset preset : {Preset::kBaseline, Preset::kDeep}) {
    for (CellType cell : {CellType::kGru, CellType::kLstm}) {
      const auto r = gradient_check(gradcheck_config(preset, cell), 5, 1e-5);
      CHECK(r.max_relative_error < 1e-4);
      CHECK(r.coordinates == parameter_count(gradcheck_config(preset, cell)));
    }
  }
}

TEST_CASE("gradients of a two-window loss add up") {
  const NetworkConfig c = tiny(Preset::kDeep, CellType::kGru);
  Rng rng(11);
  NetworkParams p = zero_params(c);
  randomize(p, rng);
  const std::vector<CharIndex> w1{0, 1, 2};
  const std::vector<CharIndex> w2{3, 3, 4};
  Rng unused(0);
  const Gradients g1 = backward_window(p, c, forward_window(p, c, w1, Mode::kTrain, unused).tape, 3);
  const Gradients g2 = backward_window(p, c, forward_window(p, c, w2, Mode::kTrain, unused).tape, 0);

  Gradients sum = zero_params(c);
  add_to(sum, g1);
  add_to(sum, g2);
  const auto s = tensors(sum);
  const auto a = tensors(g1);
  const auto b = tensors(g2);
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(s[k].values == a[k].values + b[k].values);

  const Gradients numeric = finite_differences(
      p,
      [&](const NetworkParams& q) {
        return loss_at(q, c, w1, 3, 0) + loss_at(q, c, w2, 0, 0);
      },
      1e-5);
  CHECK(max_relative_error(sum, numeric) < 1e-4);
}

TEST_CASE("clip_global_norm") {
  const NetworkConfig c = tiny(Preset::kBaseline, CellType::kGru);
  Rng rng(2);
  Gradients g = zero_params(c);
  randomize(g, rng);
  scale(g, 10.0 / global_norm(g));
  CHECK(std::abs(global_norm(g) - 10.0) < 1e-12);

  const Gradients clipped = clip_global_norm(g, 5.0);
  CHECK(std::abs(global_norm(clipped) - 5.0) <= 1e-12);
  double dot = 0.0;
  const auto a = tensors(g);
  const auto b = tensors(clipped);
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k].values.cwiseProduct(b[k].values).sum();
  CHECK(std::abs(dot / (global_norm(g) * global_norm(clipped)) - 1.0) <= 1e-12);

  Gradients small = g;
  scale(small, 0.1);
  const Gradients unchanged = clip_global_norm(small, 5.0);
  const auto u = tensors(unchanged);
  const auto s = tensors(small);
  for (std::size_t k = 0; k < u.size(); ++k) CHECK(u[k].values == s[k].values);
  CHECK_THROWS_AS(clip_global_norm(g, 0.0), Error);
}

TEST_CASE("adam_step") {
  const NetworkConfig c = tiny(Preset::kDeep, CellType::kLstm);
  Rng rng(4);
  const NetworkParams start = init_params(c, rng);
  const AdamHyper hyper;

  SUBCASE("zero gradient leaves parameters alone and decays moments") {
    NetworkParams p = start;
    AdamState state = AdamState::zeros(c);
    adam_step(p, zero_params(c), state, hyper);
    const auto before = tensors(start);
    const auto after = tensors(p);
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(before[k].values == after[k].values);
    CHECK(state.step == 1);

    Gradients g = zero_params(c);
    randomize(g, rng);
    adam_step(p, g, state, hyper);
    const AdamState previous = state;
    adam_step(p, zero_params(c), state, hyper);
    const auto m0 = tensors(previous.m);
    const auto m1 = tensors(state.m);
    const auto v0 = tensors(previous.v);
    const auto v1 = tensors(state.v);
    for (std::size_t k = 0; k < m0.size(); ++k) {
      CHECK(m1[k].values == (hyper.beta1 * m0[k].values.array()).matrix());
      CHECK(v1[k].values == (hyper.beta2 * v0[k].values.array()).matrix());
    }
    CHECK(state.step == 3);
  }

  SUBCASE("first step moves by lr * g / (|g| + eps)") {
    NetworkParams p = start;
    AdamState state = AdamState::zeros(c);
    Gradients g = zero_params(c);
    randomize(g, rng);
    adam_step(p, g, state, hyper);
    const auto before = tensors(start);
    const auto after = tensors(p);
    const auto grad = tensors(g);
    for (std::size_t k = 0; k < before.size(); ++k) {
      for (Eigen::Index i = 0; i < grad[k].values.size(); ++i) {
        const double gi = grad[k].values.data()[i];
        const double expected = -hyper.learning_rate * gi / (std::abs(gi) + hyper.epsilon);
        const double actual = after[k].values.data()[i] - before[k].values.data()[i];
        REQUIRE(std::abs(actual - expected) <= 1e-12 * hyper.learning_rate);
      }
    }
  }

  SUBCASE("bit-identical across runs") {
    NetworkParams a = start;
    NetworkParams b = start;
    AdamState sa = AdamState::zeros(c);
    AdamState sb = AdamState::zeros(c);
    Rng ga(5);
    Rng gb(5);
    for (int step = 0; step < 5; ++step) {
      Gradients g1 = zero_params(c);
      Gradients g2 = zero_params(c);
      randomize(g1, ga);
      randomize(g2, gb);
      adam_step(a, g1, sa, hyper);
      adam_step(b, g2, sb, hyper);
    }
    const auto ta = tensors(a);
    const auto tb = tensors(b);
    for (std::size_t k = 0; k < ta.size(); ++k) CHECK(ta[k].values == tb[k].values);
  }
}

TEST_CASE("train_epoch reduces loss and is reproducible") {
  std::u32string text;
  const std::u32string verse = U"the moon over the sea and the wind in the trees ";
  while (text.size() < 200) text += verse;
  text.resize(200);
  Vocabulary vocab;
  const PatternDataset ds = dataset_from(text, 8, vocab);

  NetworkConfig c;
  c.preset = Preset::kDeep;
  c.cell = CellType::kGru;
  c.vocab_size = vocab.size();
  c.hidden1 = c.hidden2 = 16;
  c.dense1 = c.dense2 = 16;
  c.window_length = 8;
  TrainConfig tc;
  tc.batch_size = 8;
  tc.adam.learning_rate = 3e-3;
  tc.shuffle_seed = 5;

  auto run = [&]() {
    TrainState state = TrainState::fresh(c, 42);
    std::vector<EpochReport> reports;
    for (int e = 0; e < 10; ++e) reports.push_back(train_epoch(ds, state, c, tc));
    return std::make_pair(reports, state);
  };
  const auto [first, state] = run();
  const auto [second, state2] = run();
  CHECK(first.back().mean_loss < first.front().mean_loss);
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].epoch_index == i + 1);
    CHECK(first[i].mean_loss == second[i].mean_loss);
    CHECK(first[i].accuracy == second[i].accuracy);
    CHECK(first[i].accuracy >= 0.0);
    CHECK(first[i].accuracy <= 1.0);
    CHECK(first[i].mean_loss >= 0.0);
  }
  CHECK(state.epoch == 10);
  CHECK(state.rng == state2.rng);
  CHECK(state.adam.step == state2.adam.step);
}

TEST_CASE("train_epoch preconditions and holdout") {
  Vocabulary vocab;
  const PatternDataset ds = dataset_from(U"abcabcabcabcabcabcab", 3, vocab);
  NetworkConfig c = tiny(Preset::kBaseline, CellType::kGru);
  c.vocab_size = vocab.size();
  TrainState state = TrainState::fresh(c, 1);
  TrainConfig tc;
  tc.batch_size = 100;
  CHECK_THROWS_AS(train_epoch(ds, state, c, tc), Error);
  CHECK_THROWS_AS(train_epoch(PatternDataset(), state, c, TrainConfig{}), Error);
  tc.batch_size = 4;
  tc.holdout_fraction = 0.25;
  const EpochReport r = train_epoch(ds, state, c, tc);
  CHECK(r.holdout_accuracy.has_value());
  CHECK(training_rows(ds.size(), 0.25) == 13);
}

TEST_CASE("epoch order is a permutation that changes between epochs") {
  const auto a = epoch_order(50, 3, 1);
  const auto b = epoch_order(50, 3, 2);
  CHECK(a != b);
  CHECK(a == epoch_order(50, 3, 1));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("evaluate_accuracy") {
  SUBCASE("single window predicted correctly") {
    Vocabulary vocab;
    const PatternDataset ds = dataset_from(U"abca", 3, vocab);
    NetworkConfig c = tiny(Preset::kBaseline, CellType::kGru);
    c.vocab_size = vocab.size();
    NetworkParams p = zero_params(c);
    p.dense[0].b(ds.target(0)) = 5.0;
    CHECK(evaluate_accuracy(ds, p, c) == 1.0);
  }

  SUBCASE("untrained model on uniform random text is at chance") {
    const std::u32string alphabet = U"abcdefgh";
    Rng rng(31);
    std::u32string text;
    for (int i = 0; i < 3000; ++i) text.push_back(alphabet[rng.uniform_index(8)]);
    Vocabulary vocab;
    const PatternDataset ds = dataset_from(text, 5, vocab);
    NetworkConfig c = tiny(Preset::kDeep, CellType::kGru);
    c.vocab_size = vocab.size();
    c.window_length = 5;
    Rng init(8);
    const NetworkParams p = init_params(c, init);
    const double n = static_cast<double>(ds.size());
    const double chance = 1.0 / 8.0;
    const double sigma = std::sqrt(chance * (1.0 - chance) / n);
    CHECK(std::abs(evaluate_accuracy(ds, p, c) - chance) <= 3.0 * sigma);
  }

  SUBCASE("overfit model memorizes a short text") {
    Vocabulary vocab;
    const PatternDataset ds = dataset_from(U"a quiet lake at dawn, mist rising slowly", 4, vocab);
    NetworkConfig c;
    c.preset = Preset::kDeep;
    c.cell = CellType::kGru;
    c.vocab_size = vocab.size();
    c.hidden1 = c.hidden2 = 24;
    c.dense1 = c.dense2 = 24;
    c.dropout = 0.0;
    c.window_length = 4;
    TrainConfig tc;
    tc.batch_size = 4;
    tc.adam.learning_rate = 1e-2;
    TrainState state = TrainState::fresh(c, 3);
    double accuracy = 0.0;
    for (int e = 0; e < 400 && accuracy < 1.0; ++e) {
      train_epoch(ds, state, c, tc);
      accuracy = evaluate_accuracy(ds, state.params, c);
    }
    CHECK(accuracy == 1.0);
  }
}
