#pragma once

#include <Eigen/Dense>
#include <vector>

#include "orthotune/ortho.hpp"
#include "orthotune/rng.hpp"
#include "orthotune/tensor.hpp"

namespace testsup {

inline orthotune::TensorP random_tensor(orthotune::Rng& rng,
                                        std::vector<std::size_t> dims) {
  orthotune::TensorP t(std::move(dims));
  for (auto& v : t.data()) v = rng.gaussian();
  return t;
}

inline Eigen::MatrixXd random_matrix(orthotune::Rng& rng, Eigen::Index rows,
                                     Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

inline orthotune::SkewParam random_skew(orthotune::Rng& rng, std::size_t q,
                                        double scale = 1.0) {
  orthotune::SkewParam p = orthotune::SkewParam::zeros(q);
  for (Eigen::Index i = 0; i < p.upper.size(); ++i) p.upper[i] = scale * rng.gaussian();
  return p;
}

/// Random rotation via the Cayley map; exact orthogonality up to roundoff.
inline Eigen::MatrixXd random_rotation(orthotune::Rng& rng, std::size_t q) {
  return orthotune::cayley(orthotune::to_skew(random_skew(rng, q)));
}

/// Well-conditioned random invertible matrix (identity plus a small bump).
inline Eigen::MatrixXd random_invertible(orthotune::Rng& rng, std::size_t n,
                                         double bump = 0.4) {
  const auto ni = static_cast<Eigen::Index>(n);
  return Eigen::MatrixXd::Identity(ni, ni) +
         bump * random_matrix(rng, ni, ni) / std::sqrt(static_cast<double>(n));
}

}  // namespace testsup
