#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace detkit {

/// Dense channels x height x width array of doubles, channel-major then
/// row-major, so each channel is a contiguous plane.
class FeatureMap {
 public:
  FeatureMap() = default;

  /// Throws DimensionError when any dimension is zero.
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0);
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<double> plane(std::size_t c) noexcept { return {data_.data() + c * pixels(), pixels()}; }
  std::span<const double> plane(std::size_t c) const noexcept {
    return {data_.data() + c * pixels(), pixels()};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const FeatureMap& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }
  bool all_finite() const noexcept;

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Pointwise (1x1) convolution. `weight` is row-major out_channels x in_channels.
struct Conv1x1Params {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  double w(std::size_t o, std::size_t c) const noexcept { return weight[o * in_channels + c]; }

  /// Throws DimensionError on length mismatch, DomainError on non-finite values.
  void validate() const;
};

/// Inference-mode batch normalization with fixed running statistics.
struct BNParams {
  std::vector<double> scale;
  std::vector<double> shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;

  std::size_t channels() const noexcept { return scale.size(); }

  /// Per-channel 1 / sqrt(running_var + eps).
  std::vector<double> inv_std() const;

  void validate() const;
};

FeatureMap conv1x1(const FeatureMap& x, const Conv1x1Params& p);
FeatureMap bn_inference(const FeatureMap& x, const BNParams& p);
FeatureMap relu(const FeatureMap& x);
FeatureMap sigmoid(const FeatureMap& x);

inline double sigmoid(double v) noexcept { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace detkit
