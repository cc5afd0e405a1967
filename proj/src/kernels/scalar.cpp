#include <algorithm>

#include "concord/kernels/kernels.hpp"

namespace concord::kernels {
namespace {

void widest_path_scalar(int32_t* m, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const int32_t via = m[j * n + i];
      for (size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        m[j * n + k] = std::max(m[j * n + k], std::min(via, m[i * n + k]));
      }
    }
  }
  for (size_t i = 0; i < n; ++i) m[i * n + i] = 0;
}

void accumulate_pairwise_scalar(const int32_t* position, int32_t* m, size_t n) {
  for (size_t x = 0; x < n; ++x) {
    const int32_t px = position[x];
    int32_t* row = m + x * n;
    for (size_t y = 0; y < n; ++y) row[y] += px < position[y] ? 1 : 0;
  }
}

// Four interleaved partial sums, combined as (l0 + l1) + (l2 + l3), then the
// tail in order. The SIMD variants follow exactly this order.
double dot_scalar(const double* a, const double* b, size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (size_t l = 0; l < 4; ++l) {
      double p = a[i + l] * b[i + l];
      lane[l] = lane[l] + p;
    }
  }
  double sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) {
    double p = a[i] * b[i];
    sum = sum + p;
  }
  return sum;
}

double squared_distance_scalar(const double* a, const double* b, size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (size_t l = 0; l < 4; ++l) {
      double d = a[i + l] - b[i + l];
      double p = d * d;
      lane[l] = lane[l] + p;
    }
  }
  double sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) {
    double d = a[i] - b[i];
    double p = d * d;
    sum = sum + p;
  }
  return sum;
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::scalar, widest_path_scalar, accumulate_pairwise_scalar,
                               dot_scalar, squared_distance_scalar};
}  // namespace detail

}  // namespace concord::kernels
