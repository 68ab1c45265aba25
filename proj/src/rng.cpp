#include "dcmmi/rng.hpp"

#include <cmath>

namespace dcmmi {

double Rng::next_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0,1] x [0,1): u1 = 1 - next_unit() keeps log() finite.
  const double u1 = 1.0 - next_unit();
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double two_pi_u2 = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(two_pi_u2);
  has_spare_ = true;
  return r * std::cos(two_pi_u2);
}

std::uint64_t Rng::mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dcmmi
