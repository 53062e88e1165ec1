#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssdau {

// Portable seeded generator. std::mt19937_64 output is fixed by the
// standard; the distributions below are ours so streams match across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, bound), rejection sampled.
  std::uint64_t below(std::uint64_t bound);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::string sha256_hex(std::string_view data);
std::uint64_t sha256_u64(std::string_view data);

// Derive an independent stage seed from a run seed and a stage label.
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view stage);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::string to_lower(std::string_view s);

// Levenshtein distance over arbitrary comparable sequences.
template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Jaccard index of two token multisets treated as sets; 1 when both empty.
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace ssdau
