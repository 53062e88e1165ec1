#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string_view>

#include "ssdau/error.hpp"
#include "ssdau/simd/kernels.hpp"

namespace ssdau::simd {

namespace {

constexpr KernelTable kScalarTable{
    scalar::dot_f32, scalar::dot_f64, scalar::accumulate_f32, scalar::axpy_f64,
    scalar::relu_sum3_f64,
};

#if defined(SSDAU_HAVE_AVX2)
constexpr KernelTable kAvx2Table{
    avx2::dot_f32, avx2::dot_f64, avx2::accumulate_f32, avx2::axpy_f64, avx2::relu_sum3_f64,
};
#endif

Isa detect() {
  if (const char* env = std::getenv("SSDAU_SIMD")) {
    const std::string_view want(env);
    if (want == "scalar") return Isa::scalar;
    if (want == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
  }
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<const KernelTable*> g_active{nullptr};
std::atomic<Isa> g_isa{Isa::scalar};

}  // namespace

const char* to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) {
  if (isa == Isa::scalar) return true;
#if defined(SSDAU_HAVE_AVX2)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& table_for(Isa isa) {
#if defined(SSDAU_HAVE_AVX2)
  if (isa == Isa::avx2) return kAvx2Table;
#endif
  (void)isa;
  return kScalarTable;
}

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    const Isa isa = detect();
    g_isa.store(isa);
    t = &table_for(isa);
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

Isa active_isa() {
  active();
  return g_isa.load();
}

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw Error(ErrorKind::config, std::string("ISA not supported on this host: ") + to_string(isa));
  }
  g_isa.store(isa);
  g_active.store(&table_for(isa), std::memory_order_release);
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  const auto& k = active();
  for (std::size_t r = 0; r < rows; ++r) y[r] = k.dot_f64(a.data() + r * cols, x.data(), cols);
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  const auto& k = active();
  std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(cols), 0.0);
  for (std::size_t r = 0; r < rows; ++r) k.axpy_f64(x[r], a.data() + r * cols, y.data(), cols);
}

double cosine(std::span<const float> a, std::span<const float> b) {
  const auto& k = active();
  const double ab = k.dot_f32(a.data(), b.data(), a.size());
  const double aa = k.dot_f32(a.data(), a.data(), a.size());
  const double bb = k.dot_f32(b.data(), b.data(), b.size());
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

}  // namespace ssdau::simd
