#include "tomsim/rng.hpp"

#include <limits>
#include <numeric>

#include "tomsim/error.hpp"

namespace tomsim {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(seed + stream);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::PreconditionViolation, "uniform_index over an empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // 2^64 mod n; accept x < 2^64 - rem, i.e. x <= max - rem.
  const std::uint64_t rem = (std::uint64_t{0} - bound) % bound;
  const std::uint64_t last = std::numeric_limits<std::uint64_t>::max() - rem;
  std::uint64_t x;
  do {
    x = rng();
  } while (x > last);
  return static_cast<std::size_t>(x % bound);
}

double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed) {
  if (n > size) throw Error(ErrorCode::InsufficientCorpus, "cannot draw more items than available");
  std::vector<std::size_t> perm(size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto j = i + uniform_index(rng, size - i);
    std::swap(perm[i], perm[j]);
  }
  perm.resize(n);
  return perm;
}

}  // namespace tomsim
