#include "pgen/network.hpp"

#include <cmath>

#include "pgen/error.hpp"

namespace pgen {

namespace {

struct OneHot {
  CharIndex index;
};

// W x for a one-hot x is a column lookup; equal to matvec on the expanded
// vector since every other product contributes an exact zero.
Vector project(const Matrix& w, const OneHot& x) { return w.col(x.index); }
Vector project(const Matrix& w, const Vector& x) { return matvec(w, x); }

template <typename Input>
GruStepCache gru_cell(const GruLayerParams& p, const Input& x, const Vector& h_prev) {
  GruStepCache s;
  s.h_prev = h_prev;
  s.z = sigmoid(Vector(project(p.w_z, x) + matvec(p.u_z, h_prev) + p.b_z));
  s.r = sigmoid(Vector(project(p.w_r, x) + matvec(p.u_r, h_prev) + p.b_r));
  const Vector reset_h = s.r.cwiseProduct(h_prev);
  s.candidate = tanh(Vector(project(p.w_h, x) + matvec(p.u_h, reset_h) + p.b_h));
  s.h = ((1.0 - s.z.array()) * h_prev.array() + s.z.array() * s.candidate.array()).matrix();
  return s;
}

template <typename Input>
LstmStepCache lstm_cell(const LstmLayerParams& p, const Input& x, const Vector& h_prev,
                        const Vector& c_prev) {
  LstmStepCache s;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  s.i = sigmoid(Vector(project(p.w_i, x) + matvec(p.u_i, h_prev) + p.b_i));
  s.f = sigmoid(Vector(project(p.w_f, x) + matvec(p.u_f, h_prev) + p.b_f));
  s.o = sigmoid(Vector(project(p.w_o, x) + matvec(p.u_o, h_prev) + p.b_o));
  s.g = tanh(Vector(project(p.w_g, x) + matvec(p.u_g, h_prev) + p.b_g));
  s.c = (s.f.array() * c_prev.array() + s.i.array() * s.g.array()).matrix();
  s.tanh_c = tanh(s.c);
  s.h = s.o.cwiseProduct(s.tanh_c);
  return s;
}

void check_step_dims(Eigen::Index hidden, Eigen::Index input, const Vector& x,
                     const Vector& h_prev, const char* cell) {
  if (x.size() != input || h_prev.size() != hidden) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(cell) + " step expects input " + std::to_string(input) +
                    " and state " + std::to_string(hidden) + ", got " +
                    std::to_string(x.size()) + " and " + std::to_string(h_prev.size()));
  }
}

// Runs one recurrent layer over a full sequence from the zero state.
template <typename Input>
RecurrentTape run_recurrent(const RecurrentParams& layer, const std::vector<Input>& inputs) {
  RecurrentTape tape;
  if (const auto* gru = std::get_if<GruLayerParams>(&layer)) {
    Vector h = Vector::Zero(gru->hidden());
    tape.gru.reserve(inputs.size());
    for (const auto& x : inputs) {
      tape.gru.push_back(gru_cell(*gru, x, h));
      h = tape.gru.back().h;
    }
  } else {
    const auto& lstm = std::get<LstmLayerParams>(layer);
    Vector h = Vector::Zero(lstm.hidden());
    Vector c = Vector::Zero(lstm.hidden());
    tape.lstm.reserve(inputs.size());
    for (const auto& x : inputs) {
      tape.lstm.push_back(lstm_cell(lstm, x, h, c));
      h = tape.lstm.back().h;
      c = tape.lstm.back().c;
    }
  }
  return tape;
}

const Vector& step_output(const RecurrentTape& tape, std::size_t t) {
  return tape.gru.empty() ? tape.lstm[t].h : tape.gru[t].h;
}

std::size_t step_count(const RecurrentTape& tape) {
  return tape.gru.empty() ? tape.lstm.size() : tape.gru.size();
}

Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return m;
}

RecurrentParams zero_recurrent(CellType cell, Eigen::Index hidden, Eigen::Index input) {
  const Matrix w = Matrix::Zero(hidden, input);
  const Matrix u = Matrix::Zero(hidden, hidden);
  const Vector b = Vector::Zero(hidden);
  if (cell == CellType::kGru) return GruLayerParams{w, w, w, u, u, u, b, b, b};
  return LstmLayerParams{w, w, w, w, u, u, u, u, b, b, b, b};
}

DenseParams zero_dense(Eigen::Index out, Eigen::Index in, Activation activation) {
  return DenseParams{Matrix::Zero(out, in), Vector::Zero(out), activation};
}

template <typename Ref, typename Params>
std::vector<Ref> collect_tensors(Params& params) {
  std::vector<Ref> out;
  auto add = [&out](std::string name, auto& t) {
    out.push_back(Ref{std::move(name), {t.data(), t.rows(), t.cols()}});
  };
  for (std::size_t k = 0; k < params.recurrent.size(); ++k) {
    const std::string n = std::to_string(k + 1);
    std::visit(
        [&](auto& layer) {
          using Layer = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<Layer, GruLayerParams>) {
            const std::string p = "gru" + n + ".";
            add(p + "W_z", layer.w_z); add(p + "W_r", layer.w_r); add(p + "W_h", layer.w_h);
            add(p + "U_z", layer.u_z); add(p + "U_r", layer.u_r); add(p + "U_h", layer.u_h);
            add(p + "b_z", layer.b_z); add(p + "b_r", layer.b_r); add(p + "b_h", layer.b_h);
          } else {
            const std::string p = "lstm" + n + ".";
            add(p + "W_i", layer.w_i); add(p + "W_f", layer.w_f);
            add(p + "W_o", layer.w_o); add(p + "W_g", layer.w_g);
            add(p + "U_i", layer.u_i); add(p + "U_f", layer.u_f);
            add(p + "U_o", layer.u_o); add(p + "U_g", layer.u_g);
            add(p + "b_i", layer.b_i); add(p + "b_f", layer.b_f);
            add(p + "b_o", layer.b_o); add(p + "b_g", layer.b_g);
          }
        },
        params.recurrent[k]);
  }
  for (std::size_t k = 0; k < params.dense.size(); ++k) {
    const std::string p = "dense" + std::to_string(k + 1) + ".";
    add(p + "W", params.dense[k].w);
    add(p + "b", params.dense[k].b);
  }
  return out;
}

}  // namespace

std::string to_string(Preset preset) {
  return preset == Preset::kDeep ? "deep" : "baseline";
}

std::string to_string(CellType cell) { return cell == CellType::kGru ? "gru" : "lstm"; }

Preset parse_preset(std::string_view text) {
  if (text == "deep") return Preset::kDeep;
  if (text == "baseline") return Preset::kBaseline;
  throw Error(ErrorCode::kInvalidArgument, "unknown preset '" + std::string(text) + "'");
}

CellType parse_cell(std::string_view text) {
  if (text == "gru") return CellType::kGru;
  if (text == "lstm") return CellType::kLstm;
  throw Error(ErrorCode::kInvalidArgument, "unknown cell '" + std::string(text) + "'");
}

std::vector<LayerKind> NetworkConfig::layers() const {
  using enum LayerKind;
  if (preset == Preset::kBaseline) return {kRecurrent, kDropout, kDense};
  return {kRecurrent, kDropout, kRecurrent, kDropout, kDense, kDense, kDense};
}

void NetworkConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
  };
  require(vocab_size >= 1, "vocabulary size must be positive");
  require(hidden1 >= 1, "recurrent width must be positive");
  require(window_length >= 1, "window length must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout rate must lie in [0, 1)");
  if (preset == Preset::kDeep) {
    require(hidden2 >= 1 && dense1 >= 1 && dense2 >= 1, "deep layer widths must be positive");
  }
}

std::vector<TensorRef> tensors(NetworkParams& params) {
  return collect_tensors<TensorRef>(params);
}

std::vector<ConstTensorRef> tensors(const NetworkParams& params) {
  return collect_tensors<ConstTensorRef>(params);
}

std::size_t parameter_count(const NetworkConfig& config) {
  const std::size_t gates = config.cell == CellType::kGru ? 3 : 4;
  auto recurrent = [gates](std::size_t hidden, std::size_t input) {
    return gates * (hidden * input + hidden * hidden + hidden);
  };
  auto dense = [](std::size_t out, std::size_t in) { return out * in + out; };
  const std::size_t v = config.vocab_size;
  if (config.preset == Preset::kBaseline) {
    return recurrent(config.hidden1, v) + dense(v, config.hidden1);
  }
  return recurrent(config.hidden1, v) + recurrent(config.hidden2, config.hidden1) +
         dense(config.dense1, config.hidden2) + dense(config.dense2, config.dense1) +
         dense(v, config.dense2);
}

std::size_t parameter_count(const NetworkParams& params) {
  std::size_t n = 0;
  for (const auto& t : tensors(params)) n += static_cast<std::size_t>(t.values.size());
  return n;
}

NetworkParams zero_params(const NetworkConfig& config) {
  config.validate();
  const auto v = static_cast<Eigen::Index>(config.vocab_size);
  const auto h1 = static_cast<Eigen::Index>(config.hidden1);
  NetworkParams p;
  p.recurrent.push_back(zero_recurrent(config.cell, h1, v));
  if (config.preset == Preset::kBaseline) {
    p.dense.push_back(zero_dense(v, h1, Activation::kNone));
    return p;
  }
  const auto h2 = static_cast<Eigen::Index>(config.hidden2);
  const auto d1 = static_cast<Eigen::Index>(config.dense1);
  const auto d2 = static_cast<Eigen::Index>(config.dense2);
  p.recurrent.push_back(zero_recurrent(config.cell, h2, h1));
  p.dense.push_back(zero_dense(d1, h2, Activation::kRelu));
  p.dense.push_back(zero_dense(d2, d1, Activation::kRelu));
  p.dense.push_back(zero_dense(v, d2, Activation::kNone));
  return p;
}

NetworkParams init_params(const NetworkConfig& config, Rng& rng) {
  NetworkParams p = zero_params(config);
  for (auto& t : tensors(p)) {
    const bool is_bias = t.name.ends_with(".b") || t.name.find(".b_") != std::string::npos;
    if (!is_bias) t.values = glorot(t.values.rows(), t.values.cols(), rng);
  }
  return p;
}

void check_params(const NetworkParams& params, const NetworkConfig& config) {
  const NetworkParams expected = zero_params(config);
  const auto want = tensors(expected);
  const auto have = tensors(params);
  if (want.size() != have.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "parameter set has " + std::to_string(have.size()) + " tensors, config needs " +
                    std::to_string(want.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].name != have[i].name || want[i].values.rows() != have[i].values.rows() ||
        want[i].values.cols() != have[i].values.cols()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "tensor " + have[i].name + " " +
                      shape_string(have[i].values.rows(), have[i].values.cols()) +
                      " does not match " + want[i].name + " " +
                      shape_string(want[i].values.rows(), want[i].values.cols()));
    }
  }
  for (std::size_t k = 0; k < params.dense.size(); ++k) {
    if (params.dense[k].activation != expected.dense[k].activation) {
      throw Error(ErrorCode::kDimensionMismatch, "dense activation does not match preset");
    }
  }
}

Vector gru_step(const GruLayerParams& params, const Vector& x, const Vector& h_prev) {
  check_step_dims(params.hidden(), params.w_z.cols(), x, h_prev, "GRU");
  return gru_cell(params, x, h_prev).h;
}

LstmState lstm_step(const LstmLayerParams& params, const Vector& x, const Vector& h_prev,
                    const Vector& c_prev) {
  check_step_dims(params.hidden(), params.w_i.cols(), x, h_prev, "LSTM");
  if (c_prev.size() != params.hidden()) {
    throw Error(ErrorCode::kDimensionMismatch, "LSTM cell state has wrong size");
  }
  auto s = lstm_cell(params, x, h_prev, c_prev);
  return {std::move(s.h), std::move(s.c)};
}

Vector dropout_mask(Eigen::Index size, double p, Rng& rng, Mode mode) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "dropout rate must lie in [0, 1)");
  }
  if (mode == Mode::kInfer || p == 0.0) return Vector::Ones(size);
  const double scale = 1.0 / (1.0 - p);
  Vector mask(size);
  for (Eigen::Index i = 0; i < size; ++i) mask(i) = rng.uniform() < p ? 0.0 : scale;
  return mask;
}

Vector apply_dropout(const Vector& v, double p, Rng& rng, Mode mode) {
  return v.cwiseProduct(dropout_mask(v.size(), p, rng, mode));
}

ForwardResult forward_window(const NetworkParams& params, const NetworkConfig& config,
                             std::span<const CharIndex> window, Mode mode, Rng& rng) {
  if (window.size() != config.window_length) {
    throw Error(ErrorCode::kDimensionMismatch,
                "window of " + std::to_string(window.size()) + " characters, expected " +
                    std::to_string(config.window_length));
  }
  if (params.recurrent.size() != config.recurrent_layers() ||
      params.dense.size() != (config.preset == Preset::kDeep ? 3u : 1u)) {
    throw Error(ErrorCode::kDimensionMismatch, "parameters do not match the preset");
  }
  Tape tape;
  tape.window.assign(window.begin(), window.end());
  std::vector<OneHot> one_hot;
  one_hot.reserve(window.size());
  for (CharIndex c : window) {
    if (c < 0 || static_cast<std::size_t>(c) >= config.vocab_size) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "character index " + std::to_string(c) + " outside vocabulary");
    }
    one_hot.push_back({c});
  }

  tape.recurrent.push_back(run_recurrent(params.recurrent[0], one_hot));
  if (config.preset == Preset::kDeep) {
    const RecurrentTape& first = tape.recurrent[0];
    const std::size_t steps = step_count(first);
    tape.step_masks.reserve(steps);
    tape.layer2_input.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      const Vector& h = step_output(first, t);
      tape.step_masks.push_back(dropout_mask(h.size(), config.dropout, rng, mode));
      tape.layer2_input.push_back(h.cwiseProduct(tape.step_masks.back()));
    }
    tape.recurrent.push_back(run_recurrent(params.recurrent[1], tape.layer2_input));
  }

  const RecurrentTape& last = tape.recurrent.back();
  const Vector& final_state = step_output(last, step_count(last) - 1);
  tape.final_mask = dropout_mask(final_state.size(), config.dropout, rng, mode);
  tape.dense_input = final_state.cwiseProduct(tape.final_mask);

  tape.dense_pre.reserve(params.dense.size());
  tape.dense_out.reserve(params.dense.size());
  const Vector* input = &tape.dense_input;
  for (const DenseParams& layer : params.dense) {
    tape.dense_pre.push_back(matvec(layer.w, *input) + layer.b);
    tape.dense_out.push_back(layer.activation == Activation::kRelu
                                 ? Vector(relu(tape.dense_pre.back()))
                                 : tape.dense_pre.back());
    input = &tape.dense_out.back();
  }
  tape.probs = softmax(tape.dense_out.back());
  Vector probs = tape.probs;
  return {std::move(probs), std::move(tape)};
}

Vector predict(const NetworkParams& params, const NetworkConfig& config,
               std::span<const CharIndex> window) {
  Rng unused(0);
  return forward_window(params, config, window, Mode::kInfer, unused).probs;
}

}  // namespace pgen
