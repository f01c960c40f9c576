#include "detkit/bda.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "detkit/errors.hpp"
#include "detkit/simd.hpp"

namespace detkit::bda {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError("bda: " + what);
}

void check_inputs(const FeatureMap& p_i, const FeatureMap& c5, const Params& params) {
  params.validate();
  require(p_i.channels() == params.channels(),
          "P has " + std::to_string(p_i.channels()) + " channels, parameters expect " +
              std::to_string(params.channels()));
  require(c5.channels() == params.scene_channels(),
          "C5 has " + std::to_string(c5.channels()) + " channels, parameters expect " +
              std::to_string(params.scene_channels()));
}

Conv1x1Params random_conv(std::size_t out, std::size_t in, Rng& rng) {
  Conv1x1Params p{out, in, std::vector<double>(out * in), std::vector<double>(out)};
  for (double& v : p.weight) v = rng.uniform(-0.5, 0.5);
  for (double& v : p.bias) v = rng.uniform(-0.5, 0.5);
  return p;
}

}  // namespace

void Params::validate() const {
  conv_z.validate();
  conv_proj.validate();
  bn_proj.validate();
  conv_scene.validate();
  require(conv_z.out_channels == conv_z.in_channels, "conv_z must map C -> C");
  require(conv_proj.in_channels == conv_z.in_channels,
          "conv_proj input channels must equal conv_z input channels");
  require(conv_scene.out_channels == conv_proj.out_channels,
          "conv_scene and conv_proj must share the embedding width");
  require(bn_proj.channels() == conv_proj.out_channels,
          "bn_proj channel count must equal the embedding width");
}

Output forward(const FeatureMap& p_i, const FeatureMap& c5, const Params& params) {
  check_inputs(p_i, c5, params);
  const auto& k = simd::kernels();
  const std::size_t channels = p_i.channels();
  const std::size_t embed = params.embed_channels();
  const std::size_t n = p_i.pixels();

  Output out;
  out.z = sigmoid(conv1x1(p_i, params.conv_z));
  out.p_tilde = relu(bn_inference(conv1x1(p_i, params.conv_proj), params.bn_proj));

  const FeatureMap scene = conv1x1(c5, params.conv_scene);
  out.u.assign(embed, 0.0);
  for (std::size_t e = 0; e < embed; ++e) {
    double sum = 0.0;
    for (double v : scene.plane(e)) sum += v;
    out.u[e] = sum / static_cast<double>(scene.pixels());
  }

  out.s = FeatureMap(1, p_i.height(), p_i.width());
  auto s = out.s.plane(0);
  for (std::size_t e = 0; e < embed; ++e) k.axpy(out.u[e], out.p_tilde.plane(e).data(), s.data(), n);
  for (double& v : s) v = sigmoid(v);

  out.p_bd = FeatureMap(channels, p_i.height(), p_i.width());
  for (std::size_t c = 0; c < channels; ++c) {
    const auto x = p_i.plane(c);
    const auto z = out.z.plane(c);
    auto dst = out.p_bd.plane(c);
    for (std::size_t i = 0; i < n; ++i) dst[i] = (1.0 + z[i]) * x[i] * s[i];
  }
  return out;
}

InputGradients grad_input(const FeatureMap& p_i, const FeatureMap& c5, const Params& params,
                          const FeatureMap& upstream) {
  check_inputs(p_i, c5, params);
  require(upstream.same_shape(p_i), "upstream gradient must have the shape of P");

  const Output fwd = forward(p_i, c5, params);
  const auto& k = simd::kernels();
  const std::size_t channels = p_i.channels();
  const std::size_t embed = params.embed_channels();
  const std::size_t n = p_i.pixels();
  const auto s = fwd.s.plane(0);

  InputGradients grad{FeatureMap(channels, p_i.height(), p_i.width()),
                      FeatureMap(c5.channels(), c5.height(), c5.width())};

  // Through s: d loss / d s[i] = sum_c g * (1 + z) * P, then the sigmoid.
  std::vector<double> dt(n, 0.0);
  // Through z: d loss / d a where z = sigmoid(a).
  FeatureMap da(channels, p_i.height(), p_i.width());
  for (std::size_t c = 0; c < channels; ++c) {
    const auto g = upstream.plane(c);
    const auto x = p_i.plane(c);
    const auto z = fwd.z.plane(c);
    auto dp = grad.p_i.plane(c);
    auto dac = da.plane(c);
    for (std::size_t i = 0; i < n; ++i) {
      dp[i] = g[i] * (1.0 + z[i]) * s[i];
      dac[i] = g[i] * x[i] * s[i] * z[i] * (1.0 - z[i]);
      dt[i] += g[i] * (1.0 + z[i]) * x[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) dt[i] *= s[i] * (1.0 - s[i]);

  // P += conv_z^T da
  for (std::size_t o = 0; o < channels; ++o) {
    for (std::size_t c = 0; c < channels; ++c) {
      k.axpy(params.conv_z.w(o, c), da.plane(o).data(), grad.p_i.plane(c).data(), n);
    }
  }

  // Through P~ = relu(bn(q)): gradient reaches q only where the relu is
  // active, scaled by the bn slope scale / sqrt(var + eps).
  const std::vector<double> inv_std = params.bn_proj.inv_std();
  std::vector<double> du(embed, 0.0);
  std::vector<double> dq(n);
  for (std::size_t e = 0; e < embed; ++e) {
    const auto pt = fwd.p_tilde.plane(e);
    const double slope = params.bn_proj.scale[e] * inv_std[e];
    for (std::size_t i = 0; i < n; ++i) {
      du[e] += dt[i] * pt[i];
      dq[i] = pt[i] > 0.0 ? dt[i] * fwd.u[e] * slope : 0.0;
    }
    for (std::size_t c = 0; c < channels; ++c) {
      k.axpy(params.conv_proj.w(e, c), dq.data(), grad.p_i.plane(c).data(), n);
    }
  }

  // Through u = mean(conv_scene(C5)): every C5 pixel receives du / pixels.
  const double inv_pixels = 1.0 / static_cast<double>(c5.pixels());
  for (std::size_t c = 0; c < c5.channels(); ++c) {
    double acc = 0.0;
    for (std::size_t e = 0; e < embed; ++e) acc += params.conv_scene.w(e, c) * du[e];
    auto dc = grad.c5.plane(c);
    std::fill(dc.begin(), dc.end(), acc * inv_pixels);
  }
  return grad;
}

namespace detail {

long double loss_extended(const std::vector<long double>& p_i, const FeatureMap& p_shape,
                          const std::vector<long double>& c5, const FeatureMap& c5_shape,
                          const Params& params, const FeatureMap& upstream) {
  using ld = long double;
  const std::size_t channels = p_shape.channels();
  const std::size_t n = p_shape.pixels();
  const std::size_t scene_channels = c5_shape.channels();
  const std::size_t n5 = c5_shape.pixels();
  const std::size_t embed = params.embed_channels();
  const auto sig = [](ld v) { return 1.0L / (1.0L + std::exp(-v)); };

  std::vector<ld> u(embed, 0.0L);
  for (std::size_t e = 0; e < embed; ++e) {
    ld sum = 0.0L;
    for (std::size_t i = 0; i < n5; ++i) {
      ld v = params.conv_scene.bias[e];
      for (std::size_t c = 0; c < scene_channels; ++c) {
        v += static_cast<ld>(params.conv_scene.w(e, c)) * c5[c * n5 + i];
      }
      sum += v;
    }
    u[e] = sum / static_cast<ld>(n5);
  }

  const auto& bn = params.bn_proj;
  ld loss = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    ld t = 0.0L;
    for (std::size_t e = 0; e < embed; ++e) {
      ld q = params.conv_proj.bias[e];
      for (std::size_t c = 0; c < channels; ++c) {
        q += static_cast<ld>(params.conv_proj.w(e, c)) * p_i[c * n + i];
      }
      const ld norm = static_cast<ld>(bn.scale[e]) * (q - bn.running_mean[e]) /
                          std::sqrt(static_cast<ld>(bn.running_var[e]) + bn.eps) +
                      bn.shift[e];
      t += (norm > 0.0L ? norm : 0.0L) * u[e];
    }
    const ld s = sig(t);
    for (std::size_t o = 0; o < channels; ++o) {
      ld a = params.conv_z.bias[o];
      for (std::size_t c = 0; c < channels; ++c) {
        a += static_cast<ld>(params.conv_z.w(o, c)) * p_i[c * n + i];
      }
      loss += static_cast<ld>(upstream.data()[o * n + i]) * (1.0L + sig(a)) * p_i[o * n + i] * s;
    }
  }
  return loss;
}

}  // namespace detail

GradCheckReport grad_check(const FeatureMap& p_i, const FeatureMap& c5, const Params& params,
                           double tolerance, const GradCheckOptions& options) {
  check_inputs(p_i, c5, params);
  FeatureMap upstream;
  if (options.upstream) {
    upstream = *options.upstream;
  } else {
    Rng rng(options.upstream_seed);
    upstream = random_map(p_i.channels(), p_i.height(), p_i.width(), rng);
  }
  const InputGradients analytic = grad_input(p_i, c5, params, upstream);

  using ld = long double;
  std::vector<ld> p(p_i.data().begin(), p_i.data().end());
  std::vector<ld> q(c5.data().begin(), c5.data().end());
  const ld step = options.step;

  GradCheckReport report;
  const auto probe = [&](std::vector<ld>& coords, std::size_t idx, double exact) {
    const ld saved = coords[idx];
    coords[idx] = saved + step;
    const ld plus = detail::loss_extended(p, p_i, q, c5, params, upstream);
    coords[idx] = saved - step;
    const ld minus = detail::loss_extended(p, p_i, q, c5, params, upstream);
    coords[idx] = saved;
    const double numeric = static_cast<double>((plus - minus) / (2.0L * step));
    const double denom = std::max({std::abs(exact), std::abs(numeric), options.abs_floor});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(exact - numeric) / denom);
    ++report.probes;
  };
  for (std::size_t i = 0; i < p.size(); ++i) probe(p, i, analytic.p_i.data()[i]);
  for (std::size_t i = 0; i < q.size(); ++i) probe(q, i, analytic.c5.data()[i]);

  report.pass = report.max_rel_error < tolerance;
  return report;
}

Params zero_params(std::size_t channels, std::size_t scene_channels, std::size_t embed_channels) {
  Params p;
  p.conv_z = {channels, channels, std::vector<double>(channels * channels, 0.0),
              std::vector<double>(channels, 0.0)};
  p.conv_proj = {embed_channels, channels, std::vector<double>(embed_channels * channels, 0.0),
                 std::vector<double>(embed_channels, 0.0)};
  p.bn_proj.scale.assign(embed_channels, 1.0);
  p.bn_proj.shift.assign(embed_channels, 0.0);
  p.bn_proj.running_mean.assign(embed_channels, 0.0);
  p.bn_proj.running_var.assign(embed_channels, 1.0);
  p.bn_proj.eps = 0.0;
  p.conv_scene = {embed_channels, scene_channels,
                  std::vector<double>(embed_channels * scene_channels, 0.0),
                  std::vector<double>(embed_channels, 0.0)};
  return p;
}

Params random_params(std::size_t channels, std::size_t scene_channels, std::size_t embed_channels,
                     Rng& rng) {
  Params p;
  p.conv_z = random_conv(channels, channels, rng);
  p.conv_proj = random_conv(embed_channels, channels, rng);
  for (std::size_t e = 0; e < embed_channels; ++e) {
    p.bn_proj.scale.push_back(rng.uniform(-0.5, 0.5));
    p.bn_proj.shift.push_back(rng.uniform(-0.5, 0.5));
    p.bn_proj.running_mean.push_back(rng.uniform(-0.5, 0.5));
    p.bn_proj.running_var.push_back(rng.uniform(0.5, 1.5));
  }
  p.bn_proj.eps = 1e-5;
  p.conv_scene = random_conv(embed_channels, scene_channels, rng);
  return p;
}

FeatureMap random_map(std::size_t c, std::size_t h, std::size_t w, Rng& rng, double lo, double hi) {
  FeatureMap m(c, h, w);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace detkit::bda
