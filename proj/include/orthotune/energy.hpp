#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>

#include "orthotune/common.hpp"

namespace orthotune {

/// Result of a hyperspherical-energy evaluation.
struct EnergyReport {
  double energy = 0.0;               // sum over ordered pairs of 1/distance
  std::int64_t pair_count = 0;       // N*(N-1) ordered pairs
  double min_pair_distance = 0.0;    // unclamped minimum pairwise distance
  std::int64_t clipped_pairs = 0;    // pairs whose distance hit the guard
};

/// Distance guard: pair distances below this are clamped (and counted)
/// instead of producing an infinite energy.
inline constexpr double kEnergyDistanceGuard = 1e-12;

/// Hyperspherical energy of a weight matrix. Neurons are the COLUMNS of W,
/// normalized to the unit sphere; the energy is the sum of inverse pairwise
/// distances over ordered pairs (i, j), i != j, accumulated in fixed
/// row-major (i, j) order for bit-reproducibility.
inline EnergyReport hyperspherical_energy(const Eigen::MatrixXd& w) {
  const Eigen::Index n = w.cols();
  detail::require(n >= 2, "hyperspherical_energy requires >= 2 neurons");

  Eigen::MatrixXd unit(w.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = w.col(i).norm();
    detail::require(norm > 0.0, "hyperspherical_energy: zero-norm neuron");
    unit.col(i) = w.col(i) / norm;
  }

  EnergyReport rep;
  rep.pair_count = static_cast<std::int64_t>(n) * (n - 1);
  rep.min_pair_distance = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dist = (unit.col(i) - unit.col(j)).norm();
      if (dist < rep.min_pair_distance) rep.min_pair_distance = dist;
      if (dist < kEnergyDistanceGuard) {
        ++rep.clipped_pairs;
        rep.energy += 1.0 / kEnergyDistanceGuard;
      } else {
        rep.energy += 1.0 / dist;
      }
    }
  }
  return rep;
}

/// |HE(W) - HE(W0)|; zero exactly when the two matrices differ by a common
/// orthogonal transform of all neurons.
inline double energy_gap(const Eigen::MatrixXd& w, const Eigen::MatrixXd& w0) {
  detail::require(w.rows() == w0.rows() && w.cols() == w0.cols(),
                  "energy_gap: shape mismatch");
  return std::abs(hyperspherical_energy(w).energy - hyperspherical_energy(w0).energy);
}

}  // namespace orthotune
