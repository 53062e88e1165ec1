#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference in
// ssdau::simd::scalar; vector variants live in per-ISA translation units and
// are selected once at runtime. The SSDAU_SIMD environment variable
// ("scalar" or "avx2") overrides detection.

#include <cstddef>
#include <span>

namespace ssdau::simd {

enum class Isa { scalar, avx2 };

const char* to_string(Isa isa);

struct KernelTable {
  // Sum of a[i]*b[i], accumulated in double.
  double (*dot_f32)(const float* a, const float* b, std::size_t n);
  double (*dot_f64)(const double* a, const double* b, std::size_t n);
  // acc[i] += x[i]
  void (*accumulate_f32)(double* acc, const float* x, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = max(0, a[i] + b[i] + c[i])
  void (*relu_sum3_f64)(const double* a, const double* b, const double* c, double* out,
                        std::size_t n);
};

namespace scalar {
double dot_f32(const float* a, const float* b, std::size_t n);
double dot_f64(const double* a, const double* b, std::size_t n);
void accumulate_f32(double* acc, const float* x, std::size_t n);
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);
void relu_sum3_f64(const double* a, const double* b, const double* c, double* out, std::size_t n);
}  // namespace scalar

#if defined(SSDAU_HAVE_AVX2)
namespace avx2 {
double dot_f32(const float* a, const float* b, std::size_t n);
double dot_f64(const double* a, const double* b, std::size_t n);
void accumulate_f32(double* acc, const float* x, std::size_t n);
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);
void relu_sum3_f64(const double* a, const double* b, const double* c, double* out, std::size_t n);
}  // namespace avx2
#endif

bool isa_supported(Isa isa);
const KernelTable& table_for(Isa isa);

// The table in use. Chosen on first call.
const KernelTable& active();
Isa active_isa();
// Test hook; throws if the ISA is not supported on this host.
void set_active_isa(Isa isa);

inline double dot(std::span<const float> a, std::span<const float> b) {
  return active().dot_f32(a.data(), b.data(), a.size());
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot_f64(a.data(), b.data(), a.size());
}
inline void accumulate(std::span<double> acc, std::span<const float> x) {
  active().accumulate_f32(acc.data(), x.data(), acc.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy_f64(alpha, x.data(), y.data(), y.size());
}

// y = A x, A row-major rows x cols.
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
// y = A^T x, A row-major rows x cols, x of length rows, y of length cols.
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);

// Cosine similarity clamped to [-1, 1]; 0 when either vector is zero.
double cosine(std::span<const float> a, std::span<const float> b);

}  // namespace ssdau::simd
