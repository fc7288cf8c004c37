#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "pathkit/kernels/kernels.hpp"

using namespace pathkit;

namespace {

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST_CASE("dispatched dot matches the scalar reference") {
  // sizes straddling the vector width, including tails and tiny inputs
  for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 9u, 16u, 31u, 64u, 515u}) {
    auto a = random_floats(n, 11 + n);
    auto b = random_floats(n, 77 + n);
    float expect = kernels::dot_scalar(a.data(), b.data(), n);
    float got = kernels::dot(a.data(), b.data(), n);
    CHECK(got == doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("dispatched squared_norm matches the scalar reference") {
  for (std::size_t n : {1u, 8u, 13u, 256u, 1023u}) {
    auto a = random_floats(n, 5 + n);
    float expect = kernels::squared_norm_scalar(a.data(), n);
    float got = kernels::squared_norm(a.data(), n);
    CHECK(got == doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("dispatched scale matches the scalar reference") {
  for (std::size_t n : {1u, 9u, 24u, 100u}) {
    auto a = random_floats(n, 3 + n);
    auto b = a;
    kernels::scale(a.data(), n, 0.37f);
    kernels::scale_scalar(b.data(), n, 0.37f);
    for (std::size_t i = 0; i < n; ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("dispatched add matches the scalar reference") {
  for (std::size_t n : {1u, 8u, 25u, 300u}) {
    auto acc1 = random_floats(n, 40 + n);
    auto acc2 = acc1;
    auto x = random_floats(n, 50 + n);
    kernels::add(acc1.data(), x.data(), n);
    kernels::add_scalar(acc2.data(), x.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(acc1[i] == acc2[i]);
  }
}

TEST_CASE("dot is exact on small integer-valued inputs") {
  std::vector<float> a = {3.0f, 4.0f, 0.0f};
  std::vector<float> b = {1.0f, 2.0f, 5.0f};
  CHECK(kernels::dot(a.data(), b.data(), 3) == 11.0f);
  CHECK(kernels::squared_norm(a.data(), 3) == 25.0f);
}

TEST_CASE("a backend was selected") {
  std::string name = kernels::active_backend();
  CHECK((name == "scalar" || name == "avx2" || name == "neon"));
#if defined(__x86_64__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma") &&
      std::getenv("PATHKIT_KERNELS") == nullptr) {
    CHECK(name == "avx2");
  }
#endif
}

TEST_CASE("dot accumulation stays accurate on long inputs") {
  std::size_t n = 4096;
  std::vector<float> a(n, 0.5f), b(n, 0.25f);
  double expect = 0.5 * 0.25 * static_cast<double>(n);
  CHECK(kernels::dot(a.data(), b.data(), n) ==
        doctest::Approx(expect).epsilon(1e-5));
}
