#include <doctest.h>

#include <cmath>
#include <vector>

#include "ssdau/simd/kernels.hpp"
#include "ssdau/util.hpp"

using namespace ssdau;
using namespace ssdau::simd;

namespace {

std::vector<float> random_floats(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

std::vector<double> random_doubles(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  Rng rng(1);
  for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 17u, 64u, 100u}) {
    auto a = random_floats(rng, n), b = random_floats(rng, n);
    double expect = 0.0;
    for (std::size_t i = 0; i < n; ++i) expect += static_cast<double>(a[i]) * b[i];
    CHECK(scalar::dot_f32(a.data(), b.data(), n) == doctest::Approx(expect).epsilon(1e-12));

    auto x = random_doubles(rng, n), y = random_doubles(rng, n), z = random_doubles(rng, n);
    std::vector<double> out(n);
    scalar::relu_sum3_f64(x.data(), y.data(), z.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(out[i] == std::max(0.0, x[i] + y[i] + z[i]));
  }
}

#if defined(SSDAU_HAVE_AVX2)
TEST_CASE("avx2 kernels agree with scalar references") {
  if (!isa_supported(Isa::avx2)) {
    MESSAGE("avx2 not supported on this host; skipping");
    return;
  }
  Rng rng(2);
  for (std::size_t n = 0; n < 70; ++n) {
    auto a = random_floats(rng, n), b = random_floats(rng, n);
    CHECK(rel_err(avx2::dot_f32(a.data(), b.data(), n), scalar::dot_f32(a.data(), b.data(), n)) < 1e-12);

    auto x = random_doubles(rng, n), y = random_doubles(rng, n), z = random_doubles(rng, n);
    CHECK(rel_err(avx2::dot_f64(x.data(), y.data(), n), scalar::dot_f64(x.data(), y.data(), n)) < 1e-12);

    std::vector<double> acc1 = x, acc2 = x;
    scalar::accumulate_f32(acc1.data(), a.data(), n);
    avx2::accumulate_f32(acc2.data(), a.data(), n);
    CHECK(acc1 == acc2);

    std::vector<double> y1 = y, y2 = y;
    scalar::axpy_f64(0.37, x.data(), y1.data(), n);
    avx2::axpy_f64(0.37, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(rel_err(y1[i], y2[i]) < 1e-15);

    std::vector<double> o1(n), o2(n);
    scalar::relu_sum3_f64(x.data(), y.data(), z.data(), o1.data(), n);
    avx2::relu_sum3_f64(x.data(), y.data(), z.data(), o2.data(), n);
    CHECK(o1 == o2);
  }
}

TEST_CASE("dispatch switches tables and gemv agrees across ISAs") {
  if (!isa_supported(Isa::avx2)) return;
  Rng rng(3);
  const std::size_t rows = 13, cols = 29;
  auto a = random_doubles(rng, rows * cols), x = random_doubles(rng, cols), xt = random_doubles(rng, rows);
  std::vector<double> y_s(rows), y_v(rows), t_s(cols), t_v(cols);
  const Isa before = active_isa();
  set_active_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  gemv(a, rows, cols, x, y_s);
  gemv_t(a, rows, cols, xt, t_s);
  set_active_isa(Isa::avx2);
  gemv(a, rows, cols, x, y_v);
  gemv_t(a, rows, cols, xt, t_v);
  set_active_isa(before);
  for (std::size_t i = 0; i < rows; ++i) CHECK(rel_err(y_s[i], y_v[i]) < 1e-12);
  for (std::size_t j = 0; j < cols; ++j) CHECK(rel_err(t_s[j], t_v[j]) < 1e-12);
}
#endif

TEST_CASE("gemv matches a hand loop") {
  Rng rng(4);
  const std::size_t rows = 5, cols = 9;
  auto a = random_doubles(rng, rows * cols), x = random_doubles(rng, cols);
  std::vector<double> y(rows);
  gemv(a, rows, cols, x, y);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += a[r * cols + c] * x[c];
    CHECK(y[r] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("cosine edge cases") {
  std::vector<float> zero(4, 0.0f), v{1, 2, 3, 4}, w{-1, -2, -3, -4};
  CHECK(cosine(zero, v) == 0.0);
  CHECK(cosine(v, v) == doctest::Approx(1.0));
  CHECK(cosine(v, w) == doctest::Approx(-1.0));
  CHECK(cosine(v, v) <= 1.0);
}
