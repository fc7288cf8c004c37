// Compiled with -mavx2 -mfma; reached only through the runtime dispatch
// table, never called directly on CPUs without AVX2.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

#include "kernels_detail.hpp"

namespace pathkit::kernels::detail {

namespace {

inline float reduce_add(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

}  // namespace

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
  }
  float sum = reduce_add(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

float squared_norm_avx2(const float* a, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(a + i);
    acc = _mm256_fmadd_ps(v, v, acc);
  }
  float sum = reduce_add(acc);
  for (; i < n; ++i) sum += a[i] * a[i];
  return sum;
}

void scale_avx2(float* a, std::size_t n, float s) {
  __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(a + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), vs));
  }
  for (; i < n; ++i) a[i] *= s;
}

void add_avx2(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(acc + i,
                     _mm256_add_ps(_mm256_loadu_ps(acc + i),
                                   _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) acc[i] += x[i];
}

}  // namespace pathkit::kernels::detail

#endif  // x86-64
