#pragma once

// The desk-scale synthetic benchmark: n = 20 unit vectors in R^10.

#include <cstdint>

#include "mntk/data.hpp"
#include "mntk/kernel.hpp"
#include "mntk/model.hpp"

namespace bench {

inline constexpr Eigen::Index kSamples = 20;
inline constexpr Eigen::Index kDim = 10;
inline constexpr std::uint64_t kDataSeed = 2024;

inline mntk::Dataset<double> dataset(std::uint64_t seed = kDataSeed) {
  mntk::Rng rng(seed);
  return mntk::gen_synthetic(kSamples, kDim, rng);
}

/// Frozen kernel H(0) and initial residual of a width-m network.
struct FrozenSetup {
  mntk::Dataset<double> data;
  mntk::NetworkState<double> net0;
  mntk::GramMatrix<double> H0;
  Eigen::VectorXd delta0;
  mntk::SpectrumReport spectrum;  // of H(0) itself
};

inline FrozenSetup frozen_setup(Eigen::Index m = 2000, std::uint64_t init_seed = 1) {
  FrozenSetup s{dataset(), {}, {}, {}, {}};
  mntk::Rng rng(init_seed);
  s.net0 = mntk::init_network(m, kDim, rng);
  s.H0 = mntk::gram_at(s.net0, s.data.X);
  s.delta0 = mntk::forward(s.net0, s.data.X) - s.data.y;
  s.spectrum = mntk::spectrum_report(s.H0);
  return s;
}

}  // namespace bench
