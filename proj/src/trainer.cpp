#include "pgen/trainer.hpp"

#include <chrono>
#include <cmath>

#include "pgen/error.hpp"

namespace pgen {

namespace {

// Input gradient sink for one recurrent step. The first layer sees one-hot
// characters; deeper layers see dense vectors and pass gradients further down.
struct OneHotInput {
  CharIndex index;

  void accumulate(Matrix& gw, const Vector& da) const { gw.col(index) += da; }
};

struct DenseInput {
  const Vector* x;

  void accumulate(Matrix& gw, const Vector& da) const { gw.noalias() += da * x->transpose(); }
};

Vector sigmoid_grad(const Vector& s, const Vector& upstream) {
  return (upstream.array() * s.array() * (1.0 - s.array())).matrix();
}

Vector tanh_grad(const Vector& t, const Vector& upstream) {
  return (upstream.array() * (1.0 - t.array().square())).matrix();
}

// Backpropagates one recurrent layer. `external[t]` is the loss gradient
// arriving at the step-t output from above. Fills `input_grads` when given.
template <typename Input>
void backward_gru(const GruLayerParams& p, const RecurrentTape& tape,
                  const std::vector<Input>& inputs, const std::vector<Vector>& external,
                  GruLayerParams& g, std::vector<Vector>* input_grads) {
  const std::size_t steps = tape.gru.size();
  Vector carry = Vector::Zero(p.hidden());
  if (input_grads) input_grads->assign(steps, Vector());
  for (std::size_t t = steps; t-- > 0;) {
    const GruStepCache& s = tape.gru[t];
    const Vector dh = external[t] + carry;

    const Vector d_candidate = dh.cwiseProduct(s.z);
    const Vector dz = dh.cwiseProduct(s.candidate - s.h_prev);
    Vector dh_prev = (dh.array() * (1.0 - s.z.array())).matrix();

    const Vector da_h = tanh_grad(s.candidate, d_candidate);
    const Vector da_z = sigmoid_grad(s.z, dz);
    const Vector d_reset_h = p.u_h.transpose() * da_h;
    const Vector dr = d_reset_h.cwiseProduct(s.h_prev);
    const Vector da_r = sigmoid_grad(s.r, dr);
    const Vector reset_h = s.r.cwiseProduct(s.h_prev);

    dh_prev += d_reset_h.cwiseProduct(s.r);
    dh_prev.noalias() += p.u_z.transpose() * da_z;
    dh_prev.noalias() += p.u_r.transpose() * da_r;

    inputs[t].accumulate(g.w_z, da_z);
    inputs[t].accumulate(g.w_r, da_r);
    inputs[t].accumulate(g.w_h, da_h);
    g.u_z.noalias() += da_z * s.h_prev.transpose();
    g.u_r.noalias() += da_r * s.h_prev.transpose();
    g.u_h.noalias() += da_h * reset_h.transpose();
    g.b_z += da_z;
    g.b_r += da_r;
    g.b_h += da_h;

    if (input_grads) {
      Vector dx = p.w_z.transpose() * da_z;
      dx.noalias() += p.w_r.transpose() * da_r;
      dx.noalias() += p.w_h.transpose() * da_h;
      (*input_grads)[t] = std::move(dx);
    }
    carry = std::move(dh_prev);
  }
}

template <typename Input>
void backward_lstm(const LstmLayerParams& p, const RecurrentTape& tape,
                   const std::vector<Input>& inputs, const std::vector<Vector>& external,
                   LstmLayerParams& g, std::vector<Vector>* input_grads) {
  const std::size_t steps = tape.lstm.size();
  Vector carry_h = Vector::Zero(p.hidden());
  Vector carry_c = Vector::Zero(p.hidden());
  if (input_grads) input_grads->assign(steps, Vector());
  for (std::size_t t = steps; t-- > 0;) {
    const LstmStepCache& s = tape.lstm[t];
    const Vector dh = external[t] + carry_h;

    const Vector d_o = dh.cwiseProduct(s.tanh_c);
    const Vector dc = carry_c + tanh_grad(s.tanh_c, dh.cwiseProduct(s.o));
    const Vector da_i = sigmoid_grad(s.i, dc.cwiseProduct(s.g));
    const Vector da_f = sigmoid_grad(s.f, dc.cwiseProduct(s.c_prev));
    const Vector da_o = sigmoid_grad(s.o, d_o);
    const Vector da_g = tanh_grad(s.g, dc.cwiseProduct(s.i));

    Vector dh_prev = p.u_i.transpose() * da_i;
    dh_prev.noalias() += p.u_f.transpose() * da_f;
    dh_prev.noalias() += p.u_o.transpose() * da_o;
    dh_prev.noalias() += p.u_g.transpose() * da_g;

    inputs[t].accumulate(g.w_i, da_i);
    inputs[t].accumulate(g.w_f, da_f);
    inputs[t].accumulate(g.w_o, da_o);
    inputs[t].accumulate(g.w_g, da_g);
    g.u_i.noalias() += da_i * s.h_prev.transpose();
    g.u_f.noalias() += da_f * s.h_prev.transpose();
    g.u_o.noalias() += da_o * s.h_prev.transpose();
    g.u_g.noalias() += da_g * s.h_prev.transpose();
    g.b_i += da_i;
    g.b_f += da_f;
    g.b_o += da_o;
    g.b_g += da_g;

    if (input_grads) {
      Vector dx = p.w_i.transpose() * da_i;
      dx.noalias() += p.w_f.transpose() * da_f;
      dx.noalias() += p.w_o.transpose() * da_o;
      dx.noalias() += p.w_g.transpose() * da_g;
      (*input_grads)[t] = std::move(dx);
    }
    carry_h = std::move(dh_prev);
    carry_c = dc.cwiseProduct(s.f);
  }
}

template <typename Input>
void backward_recurrent(const RecurrentParams& p, const RecurrentTape& tape,
                        const std::vector<Input>& inputs, const std::vector<Vector>& external,
                        RecurrentParams& g, std::vector<Vector>* input_grads) {
  if (const auto* gru = std::get_if<GruLayerParams>(&p)) {
    if (tape.gru.size() != inputs.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "tape does not match GRU layer");
    }
    backward_gru(*gru, tape, inputs, external, std::get<GruLayerParams>(g), input_grads);
  } else {
    if (tape.lstm.size() != inputs.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "tape does not match LSTM layer");
    }
    backward_lstm(std::get<LstmLayerParams>(p), tape, inputs, external,
                  std::get<LstmLayerParams>(g), input_grads);
  }
}

}  // namespace

double cross_entropy(const Vector& probs, CharIndex target) {
  if (target < 0 || target >= probs.size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "target " + std::to_string(target) + " outside distribution of " +
                    std::to_string(probs.size()));
  }
  return -std::log(std::max(probs(target), kProbabilityFloor));
}

Gradients backward_window(const NetworkParams& params, const NetworkConfig& config,
                          const Tape& tape, CharIndex target) {
  const auto vocab = static_cast<Eigen::Index>(config.vocab_size);
  if (target < 0 || target >= vocab) {
    throw Error(ErrorCode::kIndexOutOfRange, "target outside vocabulary");
  }
  if (tape.probs.size() != vocab || tape.window.size() != config.window_length ||
      tape.recurrent.size() != params.recurrent.size() ||
      tape.dense_out.size() != params.dense.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "tape does not match parameters");
  }
  Gradients g = zero_params(config);

  // Softmax + cross-entropy: d loss / d logits = p - onehot(target).
  Vector d = tape.probs;
  d(target) -= 1.0;
  for (std::size_t k = params.dense.size(); k-- > 0;) {
    const DenseParams& layer = params.dense[k];
    if (layer.activation == Activation::kRelu) {
      d = (tape.dense_pre[k].array() > 0.0).select(d, 0.0);
    }
    const Vector& input = k == 0 ? tape.dense_input : tape.dense_out[k - 1];
    if (layer.w.cols() != input.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "tape does not match dense layer");
    }
    g.dense[k].w.noalias() += d * input.transpose();
    g.dense[k].b += d;
    d = layer.w.transpose() * d;
  }
  d = d.cwiseProduct(tape.final_mask);

  const std::size_t steps = config.window_length;
  std::vector<OneHotInput> characters;
  characters.reserve(steps);
  for (CharIndex c : tape.window) characters.push_back({c});

  const std::size_t top = params.recurrent.size() - 1;
  std::vector<Vector> external(steps, Vector::Zero(d.size()));
  external.back() = d;

  if (top == 0) {
    backward_recurrent(params.recurrent[0], tape.recurrent[0], characters, external,
                       g.recurrent[0], nullptr);
    return g;
  }

  std::vector<DenseInput> layer2_inputs;
  layer2_inputs.reserve(steps);
  for (const Vector& x : tape.layer2_input) layer2_inputs.push_back({&x});
  std::vector<Vector> d_inputs;
  backward_recurrent(params.recurrent[1], tape.recurrent[1], layer2_inputs, external,
                     g.recurrent[1], &d_inputs);
  for (std::size_t t = 0; t < steps; ++t) {
    d_inputs[t] = d_inputs[t].cwiseProduct(tape.step_masks[t]);
  }
  backward_recurrent(params.recurrent[0], tape.recurrent[0], characters, d_inputs,
                     g.recurrent[0], nullptr);
  return g;
}

void add_to(Gradients& accumulator, const Gradients& g) {
  auto acc = tensors(accumulator);
  const auto add = tensors(g);
  if (acc.size() != add.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient sets differ in tensor count");
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i].values += add[i].values;
}

void scale(Gradients& g, double factor) {
  for (auto& t : tensors(g)) t.values *= factor;
}

double global_norm(const Gradients& g) {
  double sum = 0.0;
  for (const auto& t : tensors(g)) sum += t.values.squaredNorm();
  return std::sqrt(sum);
}

Gradients clip_global_norm(Gradients g, double threshold) {
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "clip threshold must be positive");
  }
  const double norm = global_norm(g);
  if (norm > threshold) scale(g, threshold / norm);
  return g;
}

AdamState AdamState::zeros(const NetworkConfig& config) {
  return AdamState{zero_params(config), zero_params(config), 0};
}

void adam_step(NetworkParams& params, const Gradients& g, AdamState& state,
               const AdamHyper& hyper) {
  auto p = tensors(params);
  const auto grad = tensors(g);
  auto m = tensors(state.m);
  auto v = tensors(state.v);
  if (grad.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "optimizer state does not match parameters");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double m_correction = 1.0 - std::pow(hyper.beta1, t);
  const double v_correction = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto gi = grad[i].values.array();
    m[i].values.array() = hyper.beta1 * m[i].values.array() + (1.0 - hyper.beta1) * gi;
    v[i].values.array() = hyper.beta2 * v[i].values.array() + (1.0 - hyper.beta2) * gi.square();
    p[i].values.array() -= hyper.learning_rate * (m[i].values.array() / m_correction) /
                           ((v[i].values.array() / v_correction).sqrt() + hyper.epsilon);
  }
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
  };
  require(epochs >= 1, "epochs must be at least 1");
  require(batch_size >= 1, "batch size must be at least 1");
  require(adam.learning_rate > 0.0, "learning rate must be positive");
  require(clip_norm > 0.0, "clip norm must be positive");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0,
          "holdout fraction must lie in [0, 1)");
}

TrainState TrainState::fresh(const NetworkConfig& config, std::uint64_t seed) {
  Rng init_rng(derive_seed(seed, 0));
  TrainState state;
  state.params = init_params(config, init_rng);
  state.adam = AdamState::zeros(config);
  state.rng = Rng(derive_seed(seed, 1));
  return state;
}

std::size_t training_rows(std::size_t dataset_size, double holdout_fraction) {
  const auto held = static_cast<std::size_t>(
      std::floor(static_cast<double>(dataset_size) * holdout_fraction));
  return dataset_size - held;
}

std::vector<std::size_t> epoch_order(std::size_t rows, std::uint64_t shuffle_seed,
                                     std::size_t epoch_index) {
  std::vector<std::size_t> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = i;
  Rng rng(derive_seed(shuffle_seed, epoch_index));
  for (std::size_t i = rows; i-- > 1;) {
    std::swap(order[i], order[rng.uniform_index(i + 1)]);
  }
  return order;
}

EpochReport train_epoch(const PatternDataset& dataset, TrainState& state,
                        const NetworkConfig& config, const TrainConfig& train_cfg) {
  train_cfg.validate();
  if (dataset.empty()) throw Error(ErrorCode::kInvalidArgument, "empty dataset");
  if (dataset.window_length() != config.window_length ||
      dataset.vocab_size() != config.vocab_size) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset does not match network config");
  }
  const std::size_t rows = training_rows(dataset.size(), train_cfg.holdout_fraction);
  if (rows == 0 || train_cfg.batch_size > rows) {
    throw Error(ErrorCode::kInvalidArgument,
                "batch size " + std::to_string(train_cfg.batch_size) +
                    " exceeds the " + std::to_string(rows) + " training patterns");
  }

  const auto started = std::chrono::steady_clock::now();
  const std::size_t epoch_index = state.epoch + 1;
  const auto order = epoch_order(rows, train_cfg.shuffle_seed, epoch_index);

  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < rows; begin += train_cfg.batch_size) {
    const std::size_t end = std::min(rows, begin + train_cfg.batch_size);
    Gradients batch = zero_params(config);
    for (std::size_t b = begin; b < end; ++b) {
      const std::size_t row = order[b];
      Rng window_rng(state.rng.next_u64());
      const auto result =
          forward_window(state.params, config, dataset.window(row), Mode::kTrain, window_rng);
      const CharIndex target = dataset.target(row);
      loss_sum += cross_entropy(result.probs, target);
      if (argmax(result.probs) == target) ++correct;
      add_to(batch, backward_window(state.params, config, result.tape, target));
    }
    scale(batch, 1.0 / static_cast<double>(end - begin));
    adam_step(state.params, clip_global_norm(std::move(batch), train_cfg.clip_norm),
              state.adam, train_cfg.adam);
  }
  state.epoch = epoch_index;

  EpochReport report;
  report.epoch_index = epoch_index;
  report.mean_loss = loss_sum / static_cast<double>(rows);
  report.accuracy = static_cast<double>(correct) / static_cast<double>(rows);
  if (rows < dataset.size()) {
    report.holdout_accuracy =
        evaluate_accuracy(dataset.slice(rows, dataset.size()), state.params, config);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

double evaluate_accuracy(const PatternDataset& dataset, const NetworkParams& params,
                         const NetworkConfig& config) {
  if (dataset.empty()) throw Error(ErrorCode::kInvalidArgument, "empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (argmax(predict(params, config, dataset.window(i))) == dataset.target(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

}  // namespace pgen
