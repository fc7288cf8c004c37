#pragma once

#include <cstddef>

// Per-arch kernel entry points. Each lives in its own translation unit so the
// arch flags (-mavx2 -mfma) never leak into generic code; they are only ever
// reached through the dispatch table after a runtime CPU check.
namespace pathkit::kernels::detail {

#if defined(__x86_64__) || defined(_M_X64)
float dot_avx2(const float* a, const float* b, std::size_t n);
float squared_norm_avx2(const float* a, std::size_t n);
void scale_avx2(float* a, std::size_t n, float s);
void add_avx2(float* acc, const float* x, std::size_t n);
#endif

#if defined(__aarch64__)
float dot_neon(const float* a, const float* b, std::size_t n);
float squared_norm_neon(const float* a, std::size_t n);
void scale_neon(float* a, std::size_t n, float s);
void add_neon(float* acc, const float* x, std::size_t n);
#endif

}  // namespace pathkit::kernels::detail
