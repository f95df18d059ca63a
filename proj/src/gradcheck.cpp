#include "pgen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pgen/trainer.hpp"

namespace pgen {

NetworkConfig gradcheck_config(Preset preset, CellType cell) {
  NetworkConfig c;
  c.preset = preset;
  c.cell = cell;
  c.vocab_size = 5;
  c.hidden1 = c.hidden2 = 4;
  c.dense1 = c.dense2 = 4;
  c.dropout = 0.0;
  c.window_length = 3;
  return c;
}

GradCheckResult gradient_check(const NetworkConfig& config, std::uint64_t seed,
                               double epsilon) {
  Rng rng(seed);
  NetworkParams params = zero_params(config);
  for (auto& t : tensors(params)) {
    for (Eigen::Index i = 0; i < t.values.size(); ++i) {
      t.values.data()[i] = 1.6 * rng.uniform() - 0.8;
    }
  }
  std::vector<CharIndex> window(config.window_length);
  for (auto& c : window) c = static_cast<CharIndex>(rng.uniform_index(config.vocab_size));
  const auto target = static_cast<CharIndex>(rng.uniform_index(config.vocab_size));

  auto loss = [&](const NetworkParams& p) {
    Rng unused(0);
    return cross_entropy(forward_window(p, config, window, Mode::kTrain, unused).probs,
                         target);
  };

  Rng unused(0);
  const auto forward = forward_window(params, config, window, Mode::kTrain, unused);
  const Gradients analytic = backward_window(params, config, forward.tape, target);

  GradCheckResult result;
  auto param_refs = tensors(params);
  const auto grad_refs = tensors(analytic);
  for (std::size_t k = 0; k < param_refs.size(); ++k) {
    auto& values = param_refs[k].values;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      double& x = values.data()[i];
      const double saved = x;
      x = saved + epsilon;
      const double up = loss(params);
      x = saved - epsilon;
      const double down = loss(params);
      x = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = grad_refs[k].values.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (rel > result.max_relative_error || result.worst_tensor.empty()) {
        result.max_relative_error = std::max(rel, result.max_relative_error);
        result.worst_tensor = param_refs[k].name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace pgen
