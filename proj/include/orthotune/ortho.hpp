#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "orthotune/common.hpp"

namespace orthotune {

enum class Modality { text, image };

inline const char* modality_name(Modality m) {
  return m == Modality::text ? "text" : "image";
}

/// Minimal parameterization of a q x q skew-symmetric matrix: the strict
/// upper triangle, stored row-major (i < j), q*(q-1)/2 reals.
struct SkewParam {
  std::size_t q = 0;
  Eigen::VectorXd upper;

  static std::size_t param_count(std::size_t q) { return q * (q - 1) / 2; }

  static SkewParam zeros(std::size_t q) {
    SkewParam p;
    p.q = q;
    p.upper = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(q)));
    return p;
  }
};

/// Unconstrained q x q deviation block for the image tower; the realized
/// transform is I + G, so zero parameters give the identity.
struct GeneralBlockParam {
  std::size_t q = 0;
  Eigen::MatrixXd g;

  static GeneralBlockParam zeros(std::size_t q) {
    GeneralBlockParam p;
    p.q = q;
    p.g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
    return p;
  }
};

using BlockParam = std::variant<SkewParam, GeneralBlockParam>;

/// Q = U - U^T; exactly skew-symmetric with exact zero diagonal.
inline Eigen::MatrixXd to_skew(const SkewParam& p) {
  detail::require(p.upper.size() == static_cast<Eigen::Index>(SkewParam::param_count(p.q)),
                  "to_skew: parameter length does not match block extent");
  const auto q = static_cast<Eigen::Index>(p.q);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q, q);
  Eigen::Index t = 0;
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = i + 1; j < q; ++j) {
      out(i, j) = p.upper[t];
      out(j, i) = -p.upper[t];
      ++t;
    }
  }
  return out;
}

/// Cayley map R = (I + Q)(I - Q)^{-1}. For real skew Q the factor (I - Q) is
/// always invertible and R is a rotation; computed by a dense solve, using
/// the fact that (I + Q) and (I - Q)^{-1} commute.
inline Eigen::MatrixXd cayley(const Eigen::MatrixXd& q) {
  detail::require(q.rows() == q.cols(), "cayley: matrix must be square");
  const double skew_resid = (q + q.transpose()).cwiseAbs().maxCoeff();
  detail::require(skew_resid <= 1e-12, "cayley: input is not skew-symmetric");
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(q.rows(), q.cols());
  return (eye - q).partialPivLu().solve(eye + q);
}

/// Realizes one adapter block under the tower policy: text blocks are Cayley
/// images of skew parameters (strictly orthogonal), image blocks are I + G.
inline Eigen::MatrixXd pop_block(const BlockParam& param, Modality modality) {
  if (modality == Modality::text) {
    detail::require(std::holds_alternative<SkewParam>(param),
                    "pop_block: text blocks require skew parameters");
    return cayley(to_skew(std::get<SkewParam>(param)));
  }
  detail::require(std::holds_alternative<GeneralBlockParam>(param),
                  "pop_block: image blocks require general parameters");
  const auto& g = std::get<GeneralBlockParam>(param).g;
  detail::require(g.rows() == g.cols(), "pop_block: block must be square");
  return Eigen::MatrixXd::Identity(g.rows(), g.cols()) + g;
}

/// Block-diagonal assembly from uniform q x q blocks. The assembled matrix is
/// orthogonal iff every block is.
inline Eigen::MatrixXd assemble_block_diag(const std::vector<Eigen::MatrixXd>& blocks) {
  detail::require(!blocks.empty(), "assemble_block_diag: need at least one block");
  const Eigen::Index q = blocks.front().rows();
  for (const auto& b : blocks)
    detail::require(b.rows() == q && b.cols() == q,
                    "assemble_block_diag: inconsistent block shapes");
  const Eigen::Index d = q * static_cast<Eigen::Index>(blocks.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto o = static_cast<Eigen::Index>(i) * q;
    out.block(o, o, q, q) = blocks[i];
  }
  return out;
}

/// One tower's per-layer transform: b blocks of extent q on the diagonal.
struct BlockDiagTransform {
  std::vector<Eigen::MatrixXd> blocks;
  Modality modality = Modality::text;
  std::size_t layer = 0;

  Eigen::MatrixXd assemble() const { return assemble_block_diag(blocks); }

  /// Largest per-block orthogonality residual ||R^T R - I||_F.
  double orthogonality_residual() const {
    double worst = 0.0;
    for (const auto& b : blocks) {
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(b.rows(), b.cols());
      worst = std::max(worst, (b.transpose() * b - eye).norm());
    }
    return worst;
  }
};

/// ||R^T R - I||_F of a single matrix.
inline double orthogonality_residual(const Eigen::MatrixXd& r) {
  return (r.transpose() * r - Eigen::MatrixXd::Identity(r.rows(), r.cols())).norm();
}

/// Closed-form trainable-parameter counts for the block parameterization.
struct PopCounts {
  std::int64_t text_skew = 0;      // L * m * (d_e/q) * q(q-1)/2
  std::int64_t image_general = 0;  // L * m * (d_v/q) * q^2
};

inline PopCounts pop_param_counts(std::size_t d_v, std::size_t d_e, std::size_t q,
                                  std::size_t layers, std::size_t m) {
  detail::require(q >= 1 && layers >= 1 && m >= 1, "pop_param_counts: invalid config");
  detail::require(d_v % q == 0 && d_e % q == 0,
                  "pop_param_counts: block extent must divide both tower widths");
  PopCounts c;
  c.text_skew = static_cast<std::int64_t>(layers * m * (d_e / q) * SkewParam::param_count(q));
  c.image_general = static_cast<std::int64_t>(layers * m * (d_v / q) * q * q);
  return c;
}

}  // namespace orthotune
