#pragma once

// Shared plumbing: error types, exact rational mesh sizes, seeded RNG policy.

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cardylab {

// ---------------------------------------------------------------------------
// Errors. Each spec-level error condition gets its own type so tests can
// match on it; all derive from Error so the CLI can map them to exit code 2.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define CARDYLAB_ERROR(Name)                       \
  struct Name : Error {                            \
    explicit Name(const std::string& msg = #Name)  \
        : Error(std::string(#Name) + ": " + msg) {}\
  }

CARDYLAB_ERROR(EmptyApproximation);
CARDYLAB_ERROR(UnknownVertex);
CARDYLAB_ERROR(SamePosition);
CARDYLAB_ERROR(CapExceeded);
CARDYLAB_ERROR(TailCutoffExceeded);
CARDYLAB_ERROR(ZeroInnerVertices);
CARDYLAB_ERROR(BoundaryConditionMismatch);
CARDYLAB_ERROR(InconsistentLoops);
CARDYLAB_ERROR(TooManyVertices);
CARDYLAB_ERROR(NegativeInput);
CARDYLAB_ERROR(QueryTooCloseToCorner);
CARDYLAB_ERROR(BoundaryVertex);
CARDYLAB_ERROR(VertexOutsideBox);
CARDYLAB_ERROR(SingularLaplacian);
CARDYLAB_ERROR(RegularizationTooFine);
CARDYLAB_ERROR(ZeroTotalRate);
CARDYLAB_ERROR(TooManyStates);
CARDYLAB_ERROR(NonSimpleBoundary);
CARDYLAB_ERROR(InvalidInput);

#undef CARDYLAB_ERROR

// ---------------------------------------------------------------------------
// Exact rational, used for mesh sizes so "--delta 1/64" never drifts.
// ---------------------------------------------------------------------------

struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0) throw InvalidInput("rational with zero denominator");
    if (den < 0) { num = -num; den = -den; }
    long long g = gcd_(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
  }
  double value() const { return double(num) / double(den); }
  std::string str() const {
    return den == 1 ? std::to_string(num)
                    : std::to_string(num) + "/" + std::to_string(den);
  }
  static Rational parse(std::string_view s) {
    auto slash = s.find('/');
    try {
      if (slash == std::string_view::npos)
        return Rational(std::stoll(std::string(s)), 1);
      return Rational(std::stoll(std::string(s.substr(0, slash))),
                      std::stoll(std::string(s.substr(slash + 1))));
    } catch (const std::logic_error&) {
      throw InvalidInput("cannot parse rational: " + std::string(s));
    }
  }

 private:
  static long long gcd_(long long a, long long b) {
    while (b) { long long t = a % b; a = b; b = t; }
    return a;
  }
};

// ---------------------------------------------------------------------------
// RNG. std::mt19937_64 output is bit-specified by the standard; the
// distributions are not, so the transforms live here.
// Seed derivation: seed_split(master, id) = splitmix64(master ^ fnv1a64(id)).
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::uint64_t seed_split(std::uint64_t master, std::string_view stream_id) {
  return splitmix64(master ^ fnv1a64(stream_id));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed) {
    // splitmix64-expanded state; equivalent quality to seed_seq for our use
    for (auto& w : state_) w = s_ = splitmix64(s_);
    i_ = 4;  // force refill discipline off; xoshiro256** core below
  }

  std::uint64_t u64() {
    std::uint64_t* s = state_;
    std::uint64_t result = rotl_(s[1] * 5, 7) * 9;
    std::uint64_t t = s[1] << 17;
    s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl_(s[3], 45);
    return result;
  }

  // uniform in [0,1)
  double u01() { return double(u64() >> 11) * 0x1.0p-53; }

  // uniform in (0,1]
  double u01_open0() { return double((u64() >> 11) + 1) * 0x1.0p-53; }

  bool coin() { return (u64() >> 63) != 0; }

  std::uint64_t below(std::uint64_t n) {  // uniform in [0, n)
    // rejection to kill modulo bias
    std::uint64_t lim = (~std::uint64_t(0)) - (~std::uint64_t(0)) % n;
    std::uint64_t x;
    do { x = u64(); } while (x >= lim);
    return x % n;
  }

  double exponential(double rate) { return -std::log(u01_open0()) / rate; }

  double normal() {
    if (have_spare_) { have_spare_ = false; return spare_; }
    double u, v, s;
    do {
      u = 2.0 * u01() - 1.0;
      v = 2.0 * u01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

 private:
  static std::uint64_t rotl_(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_;
  std::uint64_t state_[4];
  int i_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline Rng make_rng(std::uint64_t master, std::string_view stream_id) {
  return Rng(seed_split(master, stream_id));
}

}  // namespace cardylab
