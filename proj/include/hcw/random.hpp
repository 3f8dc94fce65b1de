#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace hcw {

/// Explicitly seeded 64-bit random stream.
///
/// All variates are produced by hand-written transforms on top of
/// std::mt19937_64 (whose output sequence is fixed by the standard), so a
/// given seed yields the same draws with every standard library. The
/// std:: distributions are implementation-defined and are not used.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Stream derived from a seed and a list of sub-stream tags, e.g.
  /// `RandomStream::derive(seed, {kRewardStream})`.
  static RandomStream derive(std::uint64_t seed, std::initializer_list<std::uint32_t> tags) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed & 0xffffffffu),
                                     static_cast<std::uint32_t>(seed >> 32)};
    words.insert(words.end(), tags.begin(), tags.end());
    std::seed_seq tagged(words.begin(), words.end());
    RandomStream out(0);
    out.engine_.seed(tagged);
    return out;
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  /// Poisson variate by sequential inversion. Means of 30 or more are split
  /// into equal chunks below 30 and summed.
  std::int64_t poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    if (mean >= kInversionLimit) {
      const auto chunks = static_cast<int>(std::ceil(mean / kInversionLimit)) + 1;
      std::int64_t total = 0;
      for (int i = 0; i < chunks; ++i) total += poisson(mean / chunks);
      return total;
    }
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

  /// Binomial(n, p) as a sum of n Bernoulli trials (n is small here).
  std::int64_t binomial(std::int64_t n, double p) {
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
    return k;
  }

 private:
  static constexpr double kInversionLimit = 30.0;

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hcw
