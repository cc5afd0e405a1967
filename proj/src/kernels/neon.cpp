#include <arm_neon.h>

#include "concord/kernels/kernels.hpp"

namespace concord::kernels {
namespace {

// Same unrestricted row update as the AVX2 variant, four lanes wide.
void widest_path_neon(int32_t* m, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    const int32_t* row_i = m + i * n;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      int32_t* row_j = m + j * n;
      const int32_t via = row_j[i];
      const int32x4_t via4 = vdupq_n_s32(via);
      size_t k = 0;
      for (; k + 4 <= n; k += 4) {
        int32x4_t cur = vld1q_s32(row_j + k);
        cur = vmaxq_s32(cur, vminq_s32(via4, vld1q_s32(row_i + k)));
        vst1q_s32(row_j + k, cur);
      }
      for (; k < n; ++k) {
        int32_t cand = via < row_i[k] ? via : row_i[k];
        if (cand > row_j[k]) row_j[k] = cand;
      }
    }
  }
  for (size_t i = 0; i < n; ++i) m[i * n + i] = 0;
}

void accumulate_pairwise_neon(const int32_t* position, int32_t* m, size_t n) {
  for (size_t x = 0; x < n; ++x) {
    const int32_t px = position[x];
    const int32x4_t px4 = vdupq_n_s32(px);
    int32_t* row = m + x * n;
    size_t y = 0;
    for (; y + 4 <= n; y += 4) {
      uint32x4_t less = vcltq_s32(px4, vld1q_s32(position + y));
      int32x4_t acc = vld1q_s32(row + y);
      acc = vsubq_s32(acc, vreinterpretq_s32_u32(less));
      vst1q_s32(row + y, acc);
    }
    for (; y < n; ++y) row[y] += px < position[y] ? 1 : 0;
  }
}

// Lanes 0-1 live in lo, lanes 2-3 in hi, matching the scalar lane layout.
double dot_neon(const double* a, const double* b, size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double sum = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
               (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (; i < n; ++i) {
    double p = a[i] * b[i];
    sum = sum + p;
  }
  return sum;
}

double squared_distance_neon(const double* a, const double* b, size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float64x2_t dl = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    float64x2_t dh = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    lo = vaddq_f64(lo, vmulq_f64(dl, dl));
    hi = vaddq_f64(hi, vmulq_f64(dh, dh));
  }
  double sum = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
               (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (; i < n; ++i) {
    double d = a[i] - b[i];
    double p = d * d;
    sum = sum + p;
  }
  return sum;
}

}  // namespace

namespace detail {
const KernelTable kNeonTable{Isa::neon, widest_path_neon, accumulate_pairwise_neon, dot_neon,
                             squared_distance_neon};
}  // namespace detail

}  // namespace concord::kernels
