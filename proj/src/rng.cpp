#include "mntk/numerics.hpp"

#include <numbers>

namespace mntk {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t key = mix64(seed_ ^ 0x6A09E667F3BCC909ULL);
  const std::uint64_t x = mix64(key + kGolden * (counter_ + 1));
  ++counter_;
  return mix64(x ^ key);
}

double Rng::uniform() noexcept {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double Rng::normal() noexcept {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

int Rng::rademacher() noexcept { return (next_u64() >> 63) != 0 ? 1 : -1; }

VectorX<double> sample_normal(Rng& rng, Eigen::Index count) {
  if (count < 0) throw InvalidInput("sample_normal: negative count");
  VectorX<double> out(count);
  for (Eigen::Index i = 0; i < count; ++i) out(i) = rng.normal();
  return out;
}

VectorX<double> sample_rademacher(Rng& rng, Eigen::Index count) {
  if (count < 0) throw InvalidInput("sample_rademacher: negative count");
  VectorX<double> out(count);
  for (Eigen::Index i = 0; i < count; ++i) out(i) = static_cast<double>(rng.rademacher());
  return out;
}

}  // namespace mntk
