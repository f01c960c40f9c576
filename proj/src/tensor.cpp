#include "detkit/tensor.hpp"

#include <algorithm>
#include <string>

#include "detkit/errors.hpp"
#include "detkit/simd.hpp"

namespace detkit {

namespace {

void check_dims(std::size_t c, std::size_t h, std::size_t w) {
  if (c == 0 || h == 0 || w == 0) {
    throw DimensionError("feature map dimensions must be positive, got " + std::to_string(c) +
                         "x" + std::to_string(h) + "x" + std::to_string(w));
  }
}

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
}

}  // namespace

FeatureMap::FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill)
    : channels_(channels), height_(height), width_(width) {
  check_dims(channels, height, width);
  data_.assign(channels * height * width, fill);
}

FeatureMap::FeatureMap(std::size_t channels, std::size_t height, std::size_t width,
                       std::vector<double> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  check_dims(channels, height, width);
  if (data_.size() != channels * height * width) {
    throw DimensionError("feature map data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(channels) + "x" +
                         std::to_string(height) + "x" + std::to_string(width));
  }
}

bool FeatureMap::all_finite() const noexcept { return finite(data_); }

void Conv1x1Params::validate() const {
  if (out_channels == 0 || in_channels == 0) {
    throw DimensionError("conv1x1: channel counts must be positive");
  }
  if (weight.size() != out_channels * in_channels || bias.size() != out_channels) {
    throw DimensionError("conv1x1: weight/bias lengths do not match " +
                         std::to_string(out_channels) + "x" + std::to_string(in_channels));
  }
  if (!finite(weight) || !finite(bias)) throw DomainError("conv1x1: non-finite parameter");
}

std::vector<double> BNParams::inv_std() const {
  std::vector<double> out(running_var.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = 1.0 / std::sqrt(running_var[c] + eps);
  return out;
}

void BNParams::validate() const {
  const std::size_t n = scale.size();
  if (n == 0 || shift.size() != n || running_mean.size() != n || running_var.size() != n) {
    throw DimensionError("batch norm: parameter vectors must be non-empty and equal length");
  }
  if (!finite(scale) || !finite(shift) || !finite(running_mean) || !finite(running_var)) {
    throw DomainError("batch norm: non-finite parameter");
  }
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("batch norm: eps must be >= 0");
  for (std::size_t c = 0; c < n; ++c) {
    if (running_var[c] < 0.0) throw DomainError("batch norm: running_var must be >= 0");
    if (running_var[c] + eps <= 0.0) {
      throw DomainError("batch norm: running_var + eps must be positive");
    }
  }
}

FeatureMap conv1x1(const FeatureMap& x, const Conv1x1Params& p) {
  p.validate();
  if (x.channels() != p.in_channels) {
    throw DimensionError("conv1x1: input has " + std::to_string(x.channels()) +
                         " channels, weights expect " + std::to_string(p.in_channels));
  }
  const auto& k = simd::kernels();
  FeatureMap out(p.out_channels, x.height(), x.width());
  for (std::size_t o = 0; o < p.out_channels; ++o) {
    auto dst = out.plane(o);
    std::fill(dst.begin(), dst.end(), p.bias[o]);
    for (std::size_t c = 0; c < p.in_channels; ++c) {
      k.axpy(p.w(o, c), x.plane(c).data(), dst.data(), dst.size());
    }
  }
  return out;
}

FeatureMap bn_inference(const FeatureMap& x, const BNParams& p) {
  p.validate();
  if (x.channels() != p.channels()) {
    throw DimensionError("batch norm: input has " + std::to_string(x.channels()) +
                         " channels, parameters have " + std::to_string(p.channels()));
  }
  FeatureMap out = x;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const double denom = std::sqrt(p.running_var[c] + p.eps);
    for (double& v : out.plane(c)) v = p.scale[c] * (v - p.running_mean[c]) / denom + p.shift[c];
  }
  return out;
}

FeatureMap relu(const FeatureMap& x) {
  FeatureMap out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

FeatureMap sigmoid(const FeatureMap& x) {
  FeatureMap out = x;
  for (double& v : out.data()) v = sigmoid(v);
  return out;
}

}  // namespace detkit
