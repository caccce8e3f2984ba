#pragma once

#include "ipr/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ipr {

/// Deterministic random stream. All draws go through hand-pinned mappings
/// (never std:: distributions, whose output is implementation-defined), so a
/// seed reproduces the same bytes on any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform_range(double lo, double hi) { return lo + uniform() * (hi - lo); }

  /// Uniform index in [0, n). Consumes exactly one engine draw regardless of
  /// n, which keeps per-slot stream consumption fixed where that matters.
  int uniform_index(int n) {
    int k = static_cast<int>(uniform() * static_cast<double>(n));
    return k >= n ? n - 1 : k;
  }

  /// Standard normal via basic Box-Muller; always consumes two draws.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vec normal_vec(Index n) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
      const int j = uniform_index(i + 1);
      std::swap(items[static_cast<std::size_t>(i)], items[static_cast<std::size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// FNV-1a over the bytes of a label.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (const char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

/// Substream seed derivation: FNV-1a-64(label) XOR master.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  return fnv1a64(label) ^ master;
}

/// Derives labelled substreams from a master seed and records every label it
/// hands out, so a run can persist its full lineage manifest.
class SeedLineage {
 public:
  explicit SeedLineage(std::uint64_t master) : master_(master) {}

  std::uint64_t master() const { return master_; }

  Rng stream(const std::string& label) {
    labels_.push_back(label);
    return Rng(derive_seed(master_, label));
  }

  /// Substream without recording; for loops where the label pattern is
  /// already covered by a recorded prefix entry.
  Rng stream_unrecorded(const std::string& label) const {
    return Rng(derive_seed(master_, label));
  }

  void record(const std::string& label) { labels_.push_back(label); }

  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::uint64_t master_;
  std::vector<std::string> labels_;
};

}  // namespace ipr
