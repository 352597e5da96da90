#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <numeric>
#include <vector>

#include "orthotune/common.hpp"

namespace orthotune {

/// Dense p-order tensor over a real or complex scalar.
///
/// Canonical storage order (normative for every operation in this library,
/// including serialization): the FIRST index varies fastest. Element
/// (i0, i1, ..., i_{p-1}) lives at flat offset
///
///   i0 + n0*(i1 + n1*(i2 + ...)).
///
/// All indices and modes in this API are 0-based; "mode 2" is the third
/// tensor mode. Frontal slices of a p-order tensor are indexed linearly over
/// the trailing modes with mode 2 fastest, which under the canonical order
/// makes face k the contiguous chunk data[k*n0*n1, (k+1)*n0*n1). A face is
/// therefore laid out exactly like an Eigen column-major matrix.
template <typename Scalar>
class Tensor {
 public:
  using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> dims)
      : dims_(std::move(dims)), data_(checked_size(dims_), Scalar(0)) {}

  Tensor(std::vector<std::size_t> dims, std::vector<Scalar> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    detail::require(data_.size() == checked_size(dims_),
                    "tensor data length does not match dims product");
  }

  std::size_t order() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const {
    detail::require(i < dims_.size(), "dim index out of range");
    return dims_[i];
  }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  const std::vector<Scalar>& data() const { return data_; }
  std::vector<Scalar>& data() { return data_; }

  template <typename... Idx>
  Scalar operator()(Idx... idx) const {
    return data_[offset(idx...)];
  }
  template <typename... Idx>
  Scalar& operator()(Idx... idx) {
    return data_[offset(idx...)];
  }

  /// Number of frontal faces: product of extents of modes >= 2.
  std::size_t face_count() const {
    detail::require(order() >= 2, "face_count requires order >= 2");
    std::size_t n = 1;
    for (std::size_t i = 2; i < dims_.size(); ++i) n *= dims_[i];
    return n;
  }

  std::size_t face_rows() const { return dims_[0]; }
  std::size_t face_cols() const { return dims_[1]; }

  /// k-th frontal slice (0-based, trailing modes linearized mode-2 fastest).
  MatrixT frontal_slice(std::size_t k) const {
    detail::require(order() >= 2, "frontal_slice requires order >= 2");
    detail::require(k < face_count(), "frontal slice index out of range");
    const auto r = static_cast<Eigen::Index>(dims_[0]);
    const auto c = static_cast<Eigen::Index>(dims_[1]);
    return Eigen::Map<const MatrixT>(data_.data() + k * dims_[0] * dims_[1], r, c);
  }

  void set_frontal_slice(std::size_t k, const MatrixT& m) {
    detail::require(order() >= 2, "set_frontal_slice requires order >= 2");
    detail::require(k < face_count(), "frontal slice index out of range");
    detail::require(m.rows() == static_cast<Eigen::Index>(dims_[0]) &&
                        m.cols() == static_cast<Eigen::Index>(dims_[1]),
                    "frontal slice shape mismatch");
    Eigen::Map<MatrixT>(data_.data() + k * dims_[0] * dims_[1], m.rows(), m.cols()) = m;
  }

  bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

 private:
  static std::size_t checked_size(const std::vector<std::size_t>& dims) {
    detail::require(!dims.empty(), "tensor order must be >= 1");
    std::size_t n = 1;
    for (std::size_t d : dims) {
      detail::require(d >= 1, "tensor extents must be >= 1");
      n *= d;
    }
    return n;
  }

  template <typename... Idx>
  std::size_t offset(Idx... idx) const {
    const std::size_t ind[] = {static_cast<std::size_t>(idx)...};
    detail::require(sizeof...(idx) == dims_.size(),
                    "index arity does not match tensor order");
    std::size_t off = 0;
    std::size_t stride = 1;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (ind[i] >= dims_[i]) throw std::out_of_range("tensor index out of range");
      off += ind[i] * stride;
      stride *= dims_[i];
    }
    return off;
  }

  std::vector<std::size_t> dims_;
  std::vector<Scalar> data_;
};

using TensorP = Tensor<double>;
using TensorC = Tensor<std::complex<double>>;

/// Builds an order-(dims.size()) tensor from its frontal slices in face order.
template <typename Scalar>
Tensor<Scalar> from_frontal_slices(
    std::vector<std::size_t> dims,
    const std::vector<typename Tensor<Scalar>::MatrixT>& faces) {
  Tensor<Scalar> t(std::move(dims));
  detail::require(faces.size() == t.face_count(),
                  "face count does not match dims");
  for (std::size_t k = 0; k < faces.size(); ++k) t.set_frontal_slice(k, faces[k]);
  return t;
}

namespace detail {

// Iterates the multi-index of `dims` in canonical (first-fastest) order,
// calling fn(flat_offset, index_array).
template <typename Fn>
void for_each_index(const std::vector<std::size_t>& dims, Fn&& fn) {
  std::vector<std::size_t> idx(dims.size(), 0);
  const std::size_t total =
      std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  for (std::size_t off = 0; off < total; ++off) {
    fn(off, idx);
    for (std::size_t m = 0; m < dims.size(); ++m) {
      if (++idx[m] < dims[m]) break;
      idx[m] = 0;
    }
  }
}

}  // namespace detail

/// (p-1)-order block A_i: the p-order tensor with the last index held at i.
template <typename Scalar>
Tensor<Scalar> last_mode_block(const Tensor<Scalar>& a, std::size_t i) {
  detail::require(a.order() >= 2, "last_mode_block requires order >= 2");
  const std::size_t np = a.dim(a.order() - 1);
  detail::require(i < np, "block index out of range");
  std::vector<std::size_t> bdims(a.dims().begin(), a.dims().end() - 1);
  const std::size_t bsize = a.size() / np;
  std::vector<Scalar> bdata(a.data().begin() + static_cast<std::ptrdiff_t>(i * bsize),
                            a.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * bsize));
  return Tensor<Scalar>(std::move(bdims), std::move(bdata));
}

/// Block-circulant arrangement of the last-mode blocks A_0..A_{np-1}.
///
/// Row pattern of block row r, block column c is A_{(r-c) mod np}, so the
/// first block row reads [A_0, A_{np-1}, ..., A_1]. Result dims:
/// (n0*np, n1*np, n2, ..., n_{p-2}) for p >= 3, and (n0*n1, n1) for p == 2
/// (blocks are columns).
template <typename Scalar>
Tensor<Scalar> circ(const Tensor<Scalar>& a) {
  const std::size_t p = a.order();
  detail::require(p >= 2, "circ requires order >= 2");
  const std::size_t np = a.dim(p - 1);
  const std::size_t n0 = a.dim(0);
  const std::size_t block_cols = (p >= 3) ? a.dim(1) : 1;

  std::vector<std::size_t> out_dims;
  if (p == 2) {
    out_dims = {n0 * np, np};
  } else {
    out_dims.push_back(n0 * np);
    out_dims.push_back(a.dim(1) * np);
    for (std::size_t m = 2; m + 1 < p; ++m) out_dims.push_back(a.dim(m));
  }
  Tensor<Scalar> out(out_dims);

  std::vector<std::size_t> block_dims(a.dims().begin(), a.dims().end() - 1);
  const std::size_t block_size = a.size() / np;
  detail::for_each_index(block_dims, [&](std::size_t boff, const std::vector<std::size_t>& idx) {
    for (std::size_t r = 0; r < np; ++r) {
      for (std::size_t c = 0; c < np; ++c) {
        const std::size_t s = (r + np - c) % np;
        const std::size_t src = boff + s * block_size;
        std::size_t dst = (r * n0 + idx[0]);
        std::size_t dstride = out.dim(0);
        if (p == 2) {
          dst += c * dstride;
        } else {
          dst += (c * block_cols + idx[1]) * dstride;
          dstride *= out.dim(1);
          for (std::size_t m = 2; m + 1 < p; ++m) {
            dst += idx[m] * dstride;
            dstride *= out.dim(m);
          }
        }
        out.data()[dst] = a.data()[src];
      }
    }
  });
  return out;
}

/// Stacks the last-mode blocks along mode 0:
/// dims (n0*np, n1, ..., n_{p-2}); for p == 2 the result is 1-order (n0*n1).
template <typename Scalar>
Tensor<Scalar> unfold(const Tensor<Scalar>& a) {
  const std::size_t p = a.order();
  detail::require(p >= 2, "unfold requires order >= 2");
  const std::size_t np = a.dim(p - 1);
  const std::size_t n0 = a.dim(0);

  std::vector<std::size_t> out_dims;
  out_dims.push_back(n0 * np);
  for (std::size_t m = 1; m + 1 < p; ++m) out_dims.push_back(a.dim(m));
  Tensor<Scalar> out(out_dims);

  std::vector<std::size_t> block_dims(a.dims().begin(), a.dims().end() - 1);
  const std::size_t block_size = a.size() / np;
  detail::for_each_index(block_dims, [&](std::size_t boff, const std::vector<std::size_t>& idx) {
    for (std::size_t r = 0; r < np; ++r) {
      const std::size_t src = boff + r * block_size;
      std::size_t dst = r * n0 + idx[0];
      std::size_t dstride = out.dim(0);
      for (std::size_t m = 1; m + 1 < p; ++m) {
        dst += idx[m] * dstride;
        dstride *= out.dim(m);
      }
      out.data()[dst] = a.data()[src];
    }
  });
  return out;
}

/// Inverse of unfold: fold(unfold(A), np) == A bit-exactly.
template <typename Scalar>
Tensor<Scalar> fold(const Tensor<Scalar>& b, std::size_t np) {
  detail::require(np >= 1, "fold block count must be >= 1");
  detail::require(b.dim(0) % np == 0, "fold: leading extent not divisible by block count");
  const std::size_t n0 = b.dim(0) / np;

  std::vector<std::size_t> out_dims;
  out_dims.push_back(n0);
  for (std::size_t m = 1; m < b.order(); ++m) out_dims.push_back(b.dim(m));
  out_dims.push_back(np);
  Tensor<Scalar> out(out_dims);

  std::vector<std::size_t> block_dims(out_dims.begin(), out_dims.end() - 1);
  const std::size_t block_size = out.size() / np;
  detail::for_each_index(block_dims, [&](std::size_t boff, const std::vector<std::size_t>& idx) {
    for (std::size_t r = 0; r < np; ++r) {
      std::size_t src = r * n0 + idx[0];
      std::size_t sstride = b.dim(0);
      for (std::size_t m = 1; m < b.order(); ++m) {
        src += idx[m] * sstride;
        sstride *= b.dim(m);
      }
      out.data()[boff + r * block_size] = b.data()[src];
    }
  });
  return out;
}

/// Mode-n contraction with a matrix: the result has extent M.rows() along
/// `mode`, with C(..., j, ...) = sum_t M(j, t) * A(..., t, ...).
template <typename Scalar>
Tensor<Scalar> mode_n_product(const Tensor<Scalar>& a,
                              const typename Tensor<Scalar>::MatrixT& m,
                              std::size_t mode) {
  detail::require(mode < a.order(), "mode index out of range");
  const std::size_t dn = a.dim(mode);
  detail::require(m.cols() == static_cast<Eigen::Index>(dn),
                  "mode_n_product: matrix columns must match mode extent");
  const std::size_t dm = static_cast<std::size_t>(m.rows());

  std::vector<std::size_t> out_dims = a.dims();
  out_dims[mode] = dm;
  Tensor<Scalar> out(out_dims);

  std::size_t inner = 1;
  for (std::size_t i = 0; i < mode; ++i) inner *= a.dim(i);
  std::size_t outer = 1;
  for (std::size_t i = mode + 1; i < a.order(); ++i) outer *= a.dim(i);

  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t abase = o * inner * dn;
    const std::size_t cbase = o * inner * dm;
    for (std::size_t j = 0; j < dm; ++j) {
      for (std::size_t in = 0; in < inner; ++in) {
        Scalar acc(0);
        for (std::size_t t = 0; t < dn; ++t) {
          acc += m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) *
                 a.data()[abase + t * inner + in];
        }
        out.data()[cbase + j * inner + in] = acc;
      }
    }
  }
  return out;
}

/// Frontal-slice-wise product: every face of the result is the matrix product
/// of the corresponding faces. Trailing extents must match.
template <typename Scalar>
Tensor<Scalar> facewise_product(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.order() == b.order(), "facewise_product: order mismatch");
  detail::require(a.order() >= 2, "facewise_product requires order >= 2");
  for (std::size_t m = 2; m < a.order(); ++m)
    detail::require(a.dim(m) == b.dim(m), "facewise_product: trailing extent mismatch");
  detail::require(a.dim(1) == b.dim(0), "facewise_product: face shapes not composable");

  std::vector<std::size_t> out_dims = a.dims();
  out_dims[1] = b.dim(1);
  Tensor<Scalar> out(out_dims);
  using Mat = typename Tensor<Scalar>::MatrixT;
  const std::size_t faces = a.face_count();
  for (std::size_t k = 0; k < faces; ++k) {
    const Mat fa = a.frontal_slice(k);
    const Mat fb = b.frontal_slice(k);
    out.set_frontal_slice(k, fa * fb);
  }
  return out;
}

/// Largest elementwise absolute difference; shapes must match.
template <typename Scalar>
double max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.same_dims(b), "max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(a.data()[i] - b.data()[i])));
  return worst;
}

}  // namespace orthotune
