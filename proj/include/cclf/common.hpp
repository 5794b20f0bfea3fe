#ifndef CCLF_COMMON_HPP_
#define CCLF_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cclf {

// Error categories, mapped to CLI exit codes (1 usage, 2 numerical, 3 verification).
enum class ErrorCode { Usage = 1, Numerical = 2, Verification = 3 };

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

// splitmix64: the mixing primitive behind all seeded randomness in this project.
// Chosen for trivial cross-language reproducibility.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator: value = mix(seed, stream, counter). Stateless draws,
// so trajectories and samples are reproducible independent of evaluation order.
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t next() { return at(counter_++); }

  std::uint64_t at(std::uint64_t counter) const {
    return splitmix64(seed_ ^ splitmix64(stream_ ^ splitmix64(counter)));
  }

  // uniform double in [0, 1) from the top 53 bits
  double next_double() { return double(next() >> 11) * 0x1.0p-53; }

  // uniform double in [lo, hi)
  double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // uniform integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) { return next() % n; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

// FNV-1a, used for template/model/config fingerprints embedded in outputs.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string hex64(std::uint64_t v);

}  // namespace cclf

#endif  // CCLF_COMMON_HPP_
