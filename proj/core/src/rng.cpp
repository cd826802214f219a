#include "gbt/rng.hpp"

#include <cmath>

#include "gbt/errors.hpp"

namespace gbt {

namespace {

uint64_t splitmix64(uint64_t& x) {
  uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) : root_(seed) { seed_state(seed); }

void Rng::seed_state(uint64_t seed) {
  uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

Rng Rng::substream(std::string_view label) const {
  Rng r;
  r.root_ = root_;
  uint64_t mix = root_ ^ rotl(fnv1a(label), 17);
  r.seed_state(mix);
  return r;
}

Rng Rng::substream(std::string_view label, uint64_t index) const {
  Rng r;
  r.root_ = root_;
  uint64_t mix = root_ ^ rotl(fnv1a(label), 17) ^ rotl(index + 0x9e3779b97f4a7c15ULL, 31);
  r.seed_state(mix);
  return r;
}

uint64_t Rng::next_u64() {
  uint64_t result = rotl(s_[1] * 5, 7) * 9;
  uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

uint64_t Rng::below(uint64_t n) {
  if (n == 0) throw BadArgument("Rng::below(0)");
  uint64_t limit = ~uint64_t(0) - ~uint64_t(0) % n;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

double Rng::normal() {
  // Polar rejection; the pair's second value is discarded so that each call
  // consumes a deterministic draw sequence regardless of call sites.
  for (;;) {
    double u = 2.0 * next_unit() - 1.0;
    double v = 2.0 * next_unit() - 1.0;
    double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

double Rng::trunc_normal(double sigma, double clip) {
  if (sigma < 0.0 || clip <= 0.0) throw BadArgument("trunc_normal(sigma >= 0, clip > 0)");
  for (;;) {
    double z = normal();
    if (std::fabs(z) <= clip) return z * sigma;
  }
}

}  // namespace gbt
