#pragma once

// Runtime-selected inner loops. Every backend produces results bit-identical
// to the scalar reference (no FMA contraction, same operation order).

#include <cstddef>
#include <string_view>
#include <vector>

namespace detkit::simd {

enum class Backend { scalar, avx2, neon };

std::string_view name(Backend b) noexcept;

/// Whether the backend was compiled in and the running CPU supports it.
bool supported(Backend b) noexcept;

/// Fastest supported backend.
Backend best() noexcept;

/// All supported backends, scalar first.
std::vector<Backend> available();

struct CornerBox {
  double x1, y1, x2, y2, area;
};

struct BoxColumns {
  const double* x1;
  const double* y1;
  const double* x2;
  const double* y2;
  const double* area;
  std::size_t n;
};

struct Kernels {
  // out[j] = iou(a, b[j])
  void (*iou_row)(const CornerBox& a, const BoxColumns& b, double* out);
  // y[i] = y[i] + alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

/// Kernels for a given backend; throws std::invalid_argument if unsupported.
const Kernels& kernels(Backend b);

/// Kernels of best().
const Kernels& kernels() noexcept;

}  // namespace detkit::simd
