#include <immintrin.h>

#include "concord/kernels/kernels.hpp"

namespace concord::kernels {
namespace {

// Row update without the i/j/k exclusions of the scalar loop: updates with
// k == i cannot raise m[j][i] (the candidate is min(m[j][i], m[i][i])) and updates with
// k == j only touch the diagonal, which never feeds an off-diagonal entry and
// is cleared at the end.
void widest_path_avx2(int32_t* m, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    const int32_t* row_i = m + i * n;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      int32_t* row_j = m + j * n;
      const int32_t via = row_j[i];
      const __m256i via8 = _mm256_set1_epi32(via);
      size_t k = 0;
      for (; k + 8 <= n; k += 8) {
        __m256i cur = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(row_j + k));
        __m256i ik = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(row_i + k));
        cur = _mm256_max_epi32(cur, _mm256_min_epi32(via8, ik));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(row_j + k), cur);
      }
      for (; k < n; ++k) {
        int32_t cand = via < row_i[k] ? via : row_i[k];
        if (cand > row_j[k]) row_j[k] = cand;
      }
    }
  }
  for (size_t i = 0; i < n; ++i) m[i * n + i] = 0;
}

void accumulate_pairwise_avx2(const int32_t* position, int32_t* m, size_t n) {
  for (size_t x = 0; x < n; ++x) {
    const int32_t px = position[x];
    const __m256i px8 = _mm256_set1_epi32(px);
    int32_t* row = m + x * n;
    size_t y = 0;
    for (; y + 8 <= n; y += 8) {
      __m256i py = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(position + y));
      __m256i acc = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(row + y));
      // mask lanes are -1 where px < py
      acc = _mm256_sub_epi32(acc, _mm256_cmpgt_epi32(py, px8));
      _mm256_storeu_si256(reinterpret_cast<__m256i*>(row + y), acc);
    }
    for (; y < n; ++y) row[y] += px < position[y] ? 1 : 0;
  }
}

double reduce_lanes(__m256d acc) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double dot_avx2(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d p = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, p);
  }
  double sum = reduce_lanes(acc);
  for (; i < n; ++i) {
    double p = a[i] * b[i];
    sum = sum + p;
  }
  return sum;
}

double squared_distance_avx2(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double sum = reduce_lanes(acc);
  for (; i < n; ++i) {
    double d = a[i] - b[i];
    double p = d * d;
    sum = sum + p;
  }
  return sum;
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{Isa::avx2, widest_path_avx2, accumulate_pairwise_avx2, dot_avx2,
                             squared_distance_avx2};
}  // namespace detail

}  // namespace concord::kernels
