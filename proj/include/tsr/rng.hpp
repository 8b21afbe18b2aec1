#ifndef TSR_RNG_HPP
#define TSR_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace tsr {

// All randomness in the library flows from a single u64 root seed through
// seed_split(root, label[, index]); nothing reads ambient entropy. The split
// is splitmix64(root ^ fnv1a64(label)) with the index folded in by another
// splitmix round, so streams for distinct labels are independent and every
// stream is reproducible across platforms.
std::uint64_t fnv1a64(std::string_view s);
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t seed_split(std::uint64_t root, std::string_view label);
std::uint64_t seed_split(std::uint64_t root, std::string_view label, std::uint64_t index);

// xoshiro256** seeded via splitmix64. std:: distributions are
// implementation-defined, so sampling is done by hand here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [lo, hi) via Lemire reduction.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Standard normal, Box-Muller with a cached spare.
  double normal();
  double normal(double mean, double stddev);

  bool bernoulli(double p);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
      const std::int64_t j = uniform_int(0, i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

  // Distinct index subset of size k drawn from [0, n), in draw order.
  std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k);

 private:
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tsr

#endif
