#pragma once

// Stacked recurrent next-character network.
//
//   baseline: recurrent -> dropout -> dense(V) -> softmax
//   deep:     recurrent -> dropout -> recurrent -> dropout
//             -> dense(relu) -> dense(relu) -> dense(V) -> softmax
//
// Each window is one-hot encoded and run from a zero recurrent state. In the
// deep preset dropout is applied to every output step of the first recurrent
// layer and once to the final state of the second.
//
// GRU:  z = s(Wz x + Uz h + bz)      r = s(Wr x + Ur h + br)
//       c = tanh(Wh x + Uh (r*h) + bh)
//       h' = (1 - z) * h + z * c
// LSTM: i, f, o = s(W. x + U. h + b.)   g = tanh(Wg x + Ug h + bg)
//       c' = f * c + i * g               h' = o * tanh(c')

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pgen/corpus.hpp"
#include "pgen/numerics.hpp"
#include "pgen/rng.hpp"

namespace pgen {

enum class Preset { kBaseline, kDeep };
enum class CellType { kGru, kLstm };
enum class Mode { kTrain, kInfer };
enum class LayerKind { kRecurrent, kDropout, kDense };
enum class Activation { kNone, kRelu };

std::string to_string(Preset preset);
std::string to_string(CellType cell);
Preset parse_preset(std::string_view text);
CellType parse_cell(std::string_view text);

struct NetworkConfig {
  Preset preset = Preset::kDeep;
  CellType cell = CellType::kGru;
  std::size_t vocab_size = 0;
  std::size_t hidden1 = 256;
  std::size_t hidden2 = 256;  // deep only
  std::size_t dense1 = 128;   // deep only
  std::size_t dense2 = 128;   // deep only
  double dropout = 0.2;
  std::size_t window_length = 20;

  std::vector<LayerKind> layers() const;
  std::size_t recurrent_layers() const { return preset == Preset::kDeep ? 2 : 1; }

  /// Throws kInvalidArgument on a zero size or a dropout rate outside [0, 1).
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct GruLayerParams {
  Matrix w_z, w_r, w_h;
  Matrix u_z, u_r, u_h;
  Vector b_z, b_r, b_h;

  Eigen::Index hidden() const { return u_z.rows(); }
};

struct LstmLayerParams {
  Matrix w_i, w_f, w_o, w_g;
  Matrix u_i, u_f, u_o, u_g;
  Vector b_i, b_f, b_o, b_g;

  Eigen::Index hidden() const { return u_i.rows(); }
};

struct DenseParams {
  Matrix w;
  Vector b;
  Activation activation = Activation::kNone;
};

using RecurrentParams = std::variant<GruLayerParams, LstmLayerParams>;

struct NetworkParams {
  std::vector<RecurrentParams> recurrent;
  std::vector<DenseParams> dense;
};

/// Named view over one parameter tensor. Vectors appear as n x 1.
template <typename MapType>
struct BasicTensorRef {
  std::string name;
  MapType values;
};
using TensorRef = BasicTensorRef<Eigen::Map<Matrix>>;
using ConstTensorRef = BasicTensorRef<Eigen::Map<const Matrix>>;

/// Every tensor in canonical order: per layer W.., U.., b.. then dense W, b.
std::vector<TensorRef> tensors(NetworkParams& params);
std::vector<ConstTensorRef> tensors(const NetworkParams& params);

std::size_t parameter_count(const NetworkConfig& config);
std::size_t parameter_count(const NetworkParams& params);

/// Correctly shaped, all entries zero.
NetworkParams zero_params(const NetworkConfig& config);

/// Glorot-uniform weights (bound from each tensor's own fan-in/fan-out),
/// zero biases, filled in canonical tensor order.
NetworkParams init_params(const NetworkConfig& config, Rng& rng);

/// Throws kDimensionMismatch when any tensor disagrees with the config.
void check_params(const NetworkParams& params, const NetworkConfig& config);

struct GruStepCache {
  Vector z, r, candidate, h_prev, h;
};

struct LstmStepCache {
  Vector i, f, o, g, c_prev, c, tanh_c, h_prev, h;
};

struct LstmState {
  Vector h, c;
};

Vector gru_step(const GruLayerParams& params, const Vector& x, const Vector& h_prev);
LstmState lstm_step(const LstmLayerParams& params, const Vector& x, const Vector& h_prev,
                    const Vector& c_prev);

/// Inverted dropout. Train mode zeroes each entry with probability p and
/// scales survivors by 1/(1-p); infer mode is the identity. Throws on p >= 1.
Vector apply_dropout(const Vector& v, double p, Rng& rng, Mode mode);

/// Mask whose elementwise product with v is apply_dropout(v).
Vector dropout_mask(Eigen::Index size, double p, Rng& rng, Mode mode);

struct RecurrentTape {
  std::vector<GruStepCache> gru;
  std::vector<LstmStepCache> lstm;
};

/// Everything backpropagation needs from one forward pass.
struct Tape {
  std::vector<CharIndex> window;
  std::vector<RecurrentTape> recurrent;
  std::vector<Vector> step_masks;    // deep: one per step, between recurrent layers
  std::vector<Vector> layer2_input;  // deep: masked outputs of the first layer
  Vector final_mask;
  Vector dense_input;
  std::vector<Vector> dense_pre;
  std::vector<Vector> dense_out;
  Vector probs;
};

struct ForwardResult {
  Vector probs;
  Tape tape;
};

ForwardResult forward_window(const NetworkParams& params, const NetworkConfig& config,
                             std::span<const CharIndex> window, Mode mode, Rng& rng);

/// Inference-mode distribution without keeping a tape.
Vector predict(const NetworkParams& params, const NetworkConfig& config,
               std::span<const CharIndex> window);

}  // namespace pgen
