#include "pathkit/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "kernels_detail.hpp"

namespace pathkit::kernels {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float sum = 0.0f;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

float squared_norm_scalar(const float* a, std::size_t n) {
  float sum = 0.0f;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * a[i];
  return sum;
}

void scale_scalar(float* a, std::size_t n, float s) {
  for (std::size_t i = 0; i < n; ++i) a[i] *= s;
}

void add_scalar(float* acc, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i];
}

namespace {

struct Backend {
  const char* name;
  float (*dot)(const float*, const float*, std::size_t);
  float (*squared_norm)(const float*, std::size_t);
  void (*scale)(float*, std::size_t, float);
  void (*add)(float*, const float*, std::size_t);
};

constexpr Backend kScalar = {"scalar", dot_scalar, squared_norm_scalar,
                             scale_scalar, add_scalar};

Backend resolve() {
  const char* forced = std::getenv("PATHKIT_KERNELS");
  if (forced && std::strcmp(forced, "scalar") == 0) return kScalar;
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return {"avx2", detail::dot_avx2, detail::squared_norm_avx2,
            detail::scale_avx2, detail::add_avx2};
  }
#endif
#if defined(__aarch64__)
  return {"neon", detail::dot_neon, detail::squared_norm_neon,
          detail::scale_neon, detail::add_neon};
#endif
  return kScalar;
}

const Backend& active() {
  static const Backend backend = resolve();
  return backend;
}

}  // namespace

float dot(const float* a, const float* b, std::size_t n) {
  return active().dot(a, b, n);
}

float squared_norm(const float* a, std::size_t n) {
  return active().squared_norm(a, n);
}

void scale(float* a, std::size_t n, float s) { active().scale(a, n, s); }

void add(float* acc, const float* x, std::size_t n) {
  active().add(acc, x, n);
}

const char* active_backend() { return active().name; }

}  // namespace pathkit::kernels
