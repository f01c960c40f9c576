#pragma once

// Background-denoising attention: a feature-pyramid level P is gated by a
// per-pixel, per-channel importance map z and by a single-channel similarity
// map s between a projected target embedding and a global scene embedding u
// taken from the deepest backbone map C5:
//
//   z      = sigmoid(conv_z(P))
//   P~     = relu(bn(conv_proj(P)))
//   u      = spatial mean of conv_scene(C5)
//   s      = sigmoid(sum_k P~[k] * u[k])
//   P_out  = (1 + z) * P * s            (s broadcast over channels)

#include <cstdint>
#include <optional>
#include <vector>

#include "detkit/random.hpp"
#include "detkit/tensor.hpp"

namespace detkit::bda {

struct Params {
  Conv1x1Params conv_z;      // C -> C
  Conv1x1Params conv_proj;   // C -> C'
  BNParams bn_proj;          // C'
  Conv1x1Params conv_scene;  // C5 -> C'

  std::size_t channels() const noexcept { return conv_z.in_channels; }
  std::size_t scene_channels() const noexcept { return conv_scene.in_channels; }
  std::size_t embed_channels() const noexcept { return conv_proj.out_channels; }

  /// Checks every shape constraint between the four operators.
  void validate() const;
};

struct Output {
  FeatureMap p_bd;        // C x H x W
  FeatureMap z;           // C x H x W
  FeatureMap s;           // 1 x H x W
  std::vector<double> u;  // C'
  FeatureMap p_tilde;     // C' x H x W
};

Output forward(const FeatureMap& p_i, const FeatureMap& c5, const Params& params);

struct InputGradients {
  FeatureMap p_i;
  FeatureMap c5;
};

/// Vector-Jacobian product of forward() with respect to both inputs.
InputGradients grad_input(const FeatureMap& p_i, const FeatureMap& c5, const Params& params,
                          const FeatureMap& upstream);

struct GradCheckOptions {
  double step = 1e-6;
  double abs_floor = 1e-8;
  /// Cotangent applied to the output; a seeded uniform [-1, 1) map when unset.
  std::optional<FeatureMap> upstream;
  std::uint64_t upstream_seed = 0x5eed;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool pass = false;
  std::size_t probes = 0;
};

/// Compares grad_input() against central differences of the scalar loss
/// <upstream, forward(P, C5)>, one input coordinate at a time. The loss is
/// evaluated in extended precision so that the difference quotient is not
/// dominated by cancellation. pass iff max_rel_error < tolerance.
GradCheckReport grad_check(const FeatureMap& p_i, const FeatureMap& c5, const Params& params,
                           double tolerance, const GradCheckOptions& options = {});

/// All weights and biases zero, batch norm the identity (scale 1, shift 0,
/// mean 0, var 1, eps 0).
Params zero_params(std::size_t channels, std::size_t scene_channels, std::size_t embed_channels);

/// Weights, biases, bn scale/shift/mean uniform in [-0.5, 0.5); running_var
/// uniform in [0.5, 1.5); eps 1e-5.
Params random_params(std::size_t channels, std::size_t scene_channels, std::size_t embed_channels,
                     Rng& rng);

/// Uniform [lo, hi) fill.
FeatureMap random_map(std::size_t c, std::size_t h, std::size_t w, Rng& rng, double lo = -1.0,
                      double hi = 1.0);

namespace detail {

/// <upstream, forward(P, C5)> computed with plain loops in long double. Used
/// as the finite-difference probe.
long double loss_extended(const std::vector<long double>& p_i, const FeatureMap& p_shape,
                          const std::vector<long double>& c5, const FeatureMap& c5_shape,
                          const Params& params, const FeatureMap& upstream);

}  // namespace detail

}  // namespace detkit::bda
