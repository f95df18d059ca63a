#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "pgen/corpus.hpp"
#include "pgen/network.hpp"
#include "pgen/rng.hpp"

namespace pgen {

/// One tensor per parameter tensor, shape-congruent with NetworkParams.
using Gradients = NetworkParams;

inline constexpr double kProbabilityFloor = 1e-300;

/// -ln(max(p[target], 1e-300)).
double cross_entropy(const Vector& probs, CharIndex target);

/// Exact gradient of cross_entropy(forward_window(...), target) with respect
/// to every parameter, through the dense stack, the recorded dropout masks,
/// and all recurrent steps.
Gradients backward_window(const NetworkParams& params, const NetworkConfig& config,
                          const Tape& tape, CharIndex target);

void add_to(Gradients& accumulator, const Gradients& g);
void scale(Gradients& g, double factor);

/// L2 norm over all tensors jointly.
double global_norm(const Gradients& g);

/// Rescales to norm `threshold` when the joint norm exceeds it.
Gradients clip_global_norm(Gradients g, double threshold);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  NetworkParams m;
  NetworkParams v;
  std::uint64_t step = 0;

  static AdamState zeros(const NetworkConfig& config);
};

void adam_step(NetworkParams& params, const Gradients& g, AdamState& state,
               const AdamHyper& hyper);

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  AdamHyper adam;
  double clip_norm = 5.0;
  std::uint64_t shuffle_seed = 0;
  std::size_t checkpoint_every = 0;  // 0: only at the end
  double holdout_fraction = 0.0;

  void validate() const;
};

struct EpochReport {
  std::size_t epoch_index = 0;  // 1-based
  double mean_loss = 0.0;       // nats per character
  double accuracy = 0.0;        // training-time argmax accuracy
  double wall_seconds = 0.0;
  std::optional<double> holdout_accuracy;
};

/// Mutable state owned by one training run.
struct TrainState {
  NetworkParams params;
  AdamState adam;
  std::size_t epoch = 0;  // completed epochs
  Rng rng;

  static TrainState fresh(const NetworkConfig& config, std::uint64_t seed);
};

/// Leading rows used for training; the trailing `fraction` is held out.
std::size_t training_rows(std::size_t dataset_size, double holdout_fraction);

/// Pattern visiting order for a given epoch (Fisher-Yates, epoch-derived seed).
std::vector<std::size_t> epoch_order(std::size_t rows, std::uint64_t shuffle_seed,
                                     std::size_t epoch_index);

/// One pass over every training pattern: shuffled minibatches, mean gradient
/// accumulated in window order, global-norm clipping, one Adam step per batch.
EpochReport train_epoch(const PatternDataset& dataset, TrainState& state,
                        const NetworkConfig& config, const TrainConfig& train_cfg);

/// Fraction of windows whose inference-mode argmax equals the target.
double evaluate_accuracy(const PatternDataset& dataset, const NetworkParams& params,
                         const NetworkConfig& config);

}  // namespace pgen
