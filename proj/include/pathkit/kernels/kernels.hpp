#pragma once

#include <cstddef>

namespace pathkit::kernels {

// Scalar reference kernels. These define the semantics; the SIMD variants
// are equivalence-tested against them (within float accumulation tolerance,
// since vector lanes reorder the sums).
float dot_scalar(const float* a, const float* b, std::size_t n);
float squared_norm_scalar(const float* a, std::size_t n);
void scale_scalar(float* a, std::size_t n, float s);
void add_scalar(float* acc, const float* x, std::size_t n);

// Runtime-dispatched variants. The backend is resolved once per process:
// AVX2+FMA on x86-64 when the CPU has it, NEON on aarch64, scalar otherwise.
// Setting PATHKIT_KERNELS=scalar in the environment forces the scalar path.
// Within one process the same backend serves every call, so two code paths
// scoring the same vectors produce bitwise-identical floats.
float dot(const float* a, const float* b, std::size_t n);
float squared_norm(const float* a, std::size_t n);
void scale(float* a, std::size_t n, float s);
void add(float* acc, const float* x, std::size_t n);

// "scalar", "avx2" or "neon".
const char* active_backend();

}  // namespace pathkit::kernels
