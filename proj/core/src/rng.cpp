#include "synaug/rng.hpp"

#include <cmath>

#include "synaug/error.hpp"

namespace synaug {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t RngStream::key() const {
  std::uint64_t k = mix64(seed + 0x9e3779b97f4a7c15ULL);
  for (std::uint64_t index : path) {
    k = mix64(k ^ mix64(index + 0x632be59bd9b4e019ULL));
  }
  return k;
}

std::string RngStream::label() const {
  std::string out = std::to_string(seed);
  if (!path.empty()) out += ":";
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0) out += "/";
    out += std::to_string(path[i]);
  }
  return out;
}

RngStream derive_stream(const RngStream& base, std::uint64_t index) {
  RngStream child = base;
  child.path.push_back(index);
  return child;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "uniform_index requires n > 0");
  // Rejection on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = max() - (max() % n + 1) % n;
  std::uint64_t x = (*this)();
  while (x > limit) x = (*this)();
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

}  // namespace synaug
