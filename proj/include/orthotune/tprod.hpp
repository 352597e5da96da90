#pragma once

#include <complex>
#include <vector>

#include "orthotune/tensor.hpp"

namespace orthotune {

namespace detail {

// Generic circulant product: order 2 bottoms out at the ordinary matrix
// product, higher orders expand one trailing mode per recursion step.
template <typename Scalar>
Tensor<Scalar> tprod_rec(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.order() == 2) {
    detail::require(b.order() == 2, "t-product: operand order mismatch");
    detail::require(a.dim(1) == b.dim(0), "t-product: inner extents differ");
    using Mat = typename Tensor<Scalar>::MatrixT;
    const Mat c = a.frontal_slice(0) * b.frontal_slice(0);
    Tensor<Scalar> out({static_cast<std::size_t>(c.rows()), static_cast<std::size_t>(c.cols())});
    out.set_frontal_slice(0, c);
    return out;
  }
  detail::require(a.order() == b.order(), "t-product: operand order mismatch");
  detail::require(a.dim(1) == b.dim(0), "t-product: inner extents differ");
  for (std::size_t m = 2; m < a.order(); ++m)
    detail::require(a.dim(m) == b.dim(m), "t-product: trailing extent mismatch");
  const std::size_t np = a.dim(a.order() - 1);
  return fold(tprod_rec(circ(a), unfold(b)), np);
}

}  // namespace detail

/// 3-order T-product: C = fold(circ(A) . unfold(B)),
/// A (n0,n1,n2) * B (n1,l,n2) -> C (n0,l,n2).
template <typename Scalar>
Tensor<Scalar> tprod3(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.order() == 3 && b.order() == 3, "tprod3 requires 3-order operands");
  return detail::tprod_rec(a, b);
}

/// Higher-order T-product; the circulant/unfold expansion recurses on the
/// (p-1)-order blocks and bottoms out at the 3-order definition.
template <typename Scalar>
Tensor<Scalar> tprodN(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.order() >= 3, "tprodN requires order >= 3");
  return detail::tprod_rec(a, b);
}

/// Invertible transforms S_2..S_{p-1} for the trailing modes of a p-order
/// tensor (mats[i] acts on mode 2+i). Inverses are cached at construction;
/// a transform whose inverse residual exceeds 1e-8 is rejected.
template <typename Scalar>
class TransformSet {
 public:
  using MatrixT = typename Tensor<Scalar>::MatrixT;

  explicit TransformSet(std::vector<MatrixT> mats) : mats_(std::move(mats)) {
    detail::require(!mats_.empty(), "transform set must not be empty");
    invs_.reserve(mats_.size());
    for (const auto& s : mats_) {
      detail::require(s.rows() == s.cols(), "transform matrices must be square");
      MatrixT inv = s.partialPivLu().solve(MatrixT::Identity(s.rows(), s.cols()));
      const double resid = (s * inv - MatrixT::Identity(s.rows(), s.cols())).norm();
      detail::require(resid <= 1e-8, "transform matrix is numerically singular");
      invs_.push_back(std::move(inv));
    }
  }

  std::size_t count() const { return mats_.size(); }
  const MatrixT& mat(std::size_t i) const { return mats_.at(i); }
  const MatrixT& inv(std::size_t i) const { return invs_.at(i); }

  void check_matches(const std::vector<std::size_t>& dims) const {
    detail::require(dims.size() == mats_.size() + 2,
                    "transform count does not match tensor order");
    for (std::size_t i = 0; i < mats_.size(); ++i)
      detail::require(static_cast<std::size_t>(mats_[i].rows()) == dims[2 + i],
                      "transform extent does not match tensor mode");
  }

 private:
  std::vector<MatrixT> mats_;
  std::vector<MatrixT> invs_;
};

using TransformSetD = TransformSet<double>;
using TransformSetC = TransformSet<std::complex<double>>;

/// Applies A x_2 S_2 x_3 S_3 ... x_{p-1} S_{p-1}.
template <typename Scalar>
Tensor<Scalar> transform_forward(const Tensor<Scalar>& a, const TransformSet<Scalar>& s) {
  s.check_matches(a.dims());
  Tensor<Scalar> out = a;
  for (std::size_t i = 0; i < s.count(); ++i) out = mode_n_product(out, s.mat(i), 2 + i);
  return out;
}

/// Applies the cached inverses in the same mode order; inverse of
/// transform_forward up to conditioning.
template <typename Scalar>
Tensor<Scalar> transform_inverse(const Tensor<Scalar>& abar, const TransformSet<Scalar>& s) {
  s.check_matches(abar.dims());
  Tensor<Scalar> out = abar;
  for (std::size_t i = 0; i < s.count(); ++i) out = mode_n_product(out, s.inv(i), 2 + i);
  return out;
}

/// Transform-domain tensor product: S~^{-1}( S~(A) facewise* S~(B) ).
/// For an arbitrary invertible real transform this is the generalized
/// product; it coincides with the circulant T-product exactly when the
/// transforms diagonalize the circulant structure (the DFT).
template <typename Scalar>
Tensor<Scalar> transform_tprod(const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                               const TransformSet<Scalar>& s) {
  s.check_matches(a.dims());
  s.check_matches(b.dims());
  return transform_inverse(facewise_product(transform_forward(a, s), transform_forward(b, s)), s);
}

namespace detail {

inline TensorC to_complex(const TensorP& a) {
  TensorC out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i];
  return out;
}

}  // namespace detail

/// Complex-transform path over real operands. The result of a
/// circulant-diagonalizing transform is real up to roundoff; the imaginary
/// residue is checked against `imag_tol` and discarded.
inline TensorP transform_tprod(const TensorP& a, const TensorP& b, const TransformSetC& s,
                               double imag_tol = 1e-9) {
  const TensorC c = transform_tprod(detail::to_complex(a), detail::to_complex(b), s);
  TensorP out(c.dims());
  double resid = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    resid = std::max(resid, std::abs(c.data()[i].imag()));
    out.data()[i] = c.data()[i].real();
  }
  if (resid > imag_tol)
    throw std::runtime_error("transform_tprod: imaginary residue " + std::to_string(resid) +
                             " exceeds tolerance");
  return out;
}

/// Unnormalized DFT matrix, F(j,k) = exp(-2*pi*i*j*k/n); its inverse is
/// conj(F)/n, matching the circulant diagonalization C = F^{-1} diag(F a) F.
inline Eigen::MatrixXcd dft_matrix(std::size_t n) {
  detail::require(n >= 1, "dft_matrix: size must be >= 1");
  const double two_pi = 2.0 * 3.141592653589793238462643383279502884;
  Eigen::MatrixXcd f(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      const double ang = -two_pi * static_cast<double>(j * k) / static_cast<double>(n);
      f(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          std::complex<double>(std::cos(ang), std::sin(ang));
    }
  return f;
}

/// DFT transforms for every trailing mode of a tensor with the given dims.
inline TransformSetC dft_transform_set(const std::vector<std::size_t>& dims) {
  detail::require(dims.size() >= 3, "dft_transform_set requires order >= 3");
  std::vector<Eigen::MatrixXcd> mats;
  for (std::size_t m = 2; m < dims.size(); ++m) mats.push_back(dft_matrix(dims[m]));
  return TransformSetC(std::move(mats));
}

}  // namespace orthotune
