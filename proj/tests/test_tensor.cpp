#include <gtest/gtest.h>

#include "orthotune/tensor.hpp"

#include "test_support.hpp"

using namespace orthotune;

namespace {

// Naive mode-n contraction, element by element, for cross-checking.
TensorP mode_n_oracle(const TensorP& a, const Eigen::MatrixXd& m, std::size_t mode) {
  std::vector<std::size_t> out_dims = a.dims();
  out_dims[mode] = static_cast<std::size_t>(m.rows());
  TensorP out(out_dims);
  detail::for_each_index(out_dims, [&](std::size_t off, const std::vector<std::size_t>& idx) {
    double acc = 0.0;
    std::vector<std::size_t> src = idx;
    for (std::size_t t = 0; t < a.dim(mode); ++t) {
      src[mode] = t;
      std::size_t s = 0, stride = 1;
      for (std::size_t i = 0; i < a.order(); ++i) {
        s += src[i] * stride;
        stride *= a.dim(i);
      }
      acc += m(static_cast<Eigen::Index>(idx[mode]), static_cast<Eigen::Index>(t)) * a.data()[s];
    }
    out.data()[off] = acc;
  });
  return out;
}

}  // namespace

TEST(Tensor, ConstructionInvariants) {
  TensorP t({2, 3, 4});
  EXPECT_EQ(t.order(), 3u);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_THROW(TensorP(std::vector<std::size_t>{}), contract_error);
  EXPECT_THROW(TensorP({2, 0, 3}), contract_error);
  EXPECT_THROW(TensorP({2, 2}, std::vector<double>(3)), contract_error);
}

TEST(Tensor, ElementAccessIsCheckedAndCanonical) {
  TensorP t({2, 3});
  t(1, 2) = 7.0;
  // First index fastest: (1,2) -> offset 1 + 2*2.
  EXPECT_EQ(t.data()[5], 7.0);
  EXPECT_THROW(t(2, 0), std::out_of_range);
  EXPECT_THROW(t(0, 3), std::out_of_range);
}

TEST(Tensor, FrontalSliceOrder3) {
  Rng rng(1);
  TensorP a = testsup::random_tensor(rng, {2, 2, 3});
  // Second face in storage order.
  const Eigen::MatrixXd f = a.frontal_slice(1);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_EQ(f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), a(i, j, 1u));
  EXPECT_THROW(a.frontal_slice(3), contract_error);
}

TEST(Tensor, FrontalSliceOrder4ModeTwoFastest) {
  Rng rng(2);
  TensorP a = testsup::random_tensor(rng, {2, 2, 2, 2});
  // Face k=2 holds (i2, i3) = (0, 1): k = i2 + n2*i3.
  const Eigen::MatrixXd f = a.frontal_slice(2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_EQ(f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                a(i, j, 0u, 1u));
}

TEST(Tensor, SliceReassemblyRoundTrip) {
  Rng rng(3);
  TensorP a = testsup::random_tensor(rng, {3, 2, 4});
  std::vector<Eigen::MatrixXd> faces;
  for (std::size_t k = 0; k < a.face_count(); ++k) faces.push_back(a.frontal_slice(k));
  const TensorP b = from_frontal_slices<double>({3, 2, 4}, faces);
  EXPECT_EQ(max_abs_diff(a, b), 0.0);
}

TEST(Tensor, CircTwoBlockLayout) {
  Rng rng(4);
  TensorP a = testsup::random_tensor(rng, {2, 3, 2});
  const TensorP c = circ(a);
  ASSERT_EQ(c.dims(), (std::vector<std::size_t>{4, 6}));
  const Eigen::MatrixXd m = c.frontal_slice(0);
  const Eigen::MatrixXd a1 = a.frontal_slice(0), a2 = a.frontal_slice(1);
  // [[A1, A2], [A2, A1]]
  EXPECT_EQ(m.block(0, 0, 2, 3), a1);
  EXPECT_EQ(m.block(0, 3, 2, 3), a2);
  EXPECT_EQ(m.block(2, 0, 2, 3), a2);
  EXPECT_EQ(m.block(2, 3, 2, 3), a1);
}

TEST(Tensor, CircSingleBlock) {
  Rng rng(5);
  TensorP a = testsup::random_tensor(rng, {2, 3, 1});
  const TensorP c = circ(a);
  ASSERT_EQ(c.dims(), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(c.frontal_slice(0), a.frontal_slice(0));
}

TEST(Tensor, CircMatchesHandAssembledBlockCirculant) {
  Rng rng(6);
  TensorP a = testsup::random_tensor(rng, {2, 2, 3});
  // Direct 6x6 assembly from the three faces, row pattern [A1 A3 A2; ...].
  const Eigen::MatrixXd f0 = a.frontal_slice(0), f1 = a.frontal_slice(1),
                        f2 = a.frontal_slice(2);
  Eigen::MatrixXd expected(6, 6);
  expected.block(0, 0, 2, 2) = f0;
  expected.block(0, 2, 2, 2) = f2;
  expected.block(0, 4, 2, 2) = f1;
  expected.block(2, 0, 2, 2) = f1;
  expected.block(2, 2, 2, 2) = f0;
  expected.block(2, 4, 2, 2) = f2;
  expected.block(4, 0, 2, 2) = f2;
  expected.block(4, 2, 2, 2) = f1;
  expected.block(4, 4, 2, 2) = f0;
  EXPECT_EQ(circ(a).frontal_slice(0), expected);
}

TEST(Tensor, UnfoldShapeAndFoldInverse) {
  Rng rng(7);
  TensorP a = testsup::random_tensor(rng, {2, 3, 2});
  const TensorP u = unfold(a);
  ASSERT_EQ(u.dims(), (std::vector<std::size_t>{4, 3}));
  EXPECT_EQ(u.frontal_slice(0).block(0, 0, 2, 3), a.frontal_slice(0));
  EXPECT_EQ(u.frontal_slice(0).block(2, 0, 2, 3), a.frontal_slice(1));
  EXPECT_EQ(max_abs_diff(fold(u, 2), a), 0.0);

  TensorP b = testsup::random_tensor(rng, {2, 2, 3, 2});
  EXPECT_EQ(max_abs_diff(fold(unfold(b), 2), b), 0.0);
  EXPECT_THROW(fold(u, 3), contract_error);
}

TEST(Tensor, CircOnStackedIdentityBlocksRotatesUnfold) {
  // circ(A) times a one-hot block column reproduces unfold(A) rotated by
  // the block index.
  Rng rng(8);
  TensorP a = testsup::random_tensor(rng, {2, 2, 3});
  const Eigen::MatrixXd big = circ(a).frontal_slice(0);
  const Eigen::MatrixXd unf = unfold(a).frontal_slice(0);
  for (std::size_t k = 0; k < 3; ++k) {
    Eigen::MatrixXd picker = Eigen::MatrixXd::Zero(6, 2);
    picker.block(static_cast<Eigen::Index>(2 * k), 0, 2, 2) = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd got = big * picker;
    for (std::size_t r = 0; r < 3; ++r) {
      const auto dst = static_cast<Eigen::Index>(2 * ((r + k) % 3));
      EXPECT_EQ(got.block(dst, 0, 2, 2), unf.block(static_cast<Eigen::Index>(2 * r), 0, 2, 2));
    }
  }
}

TEST(Tensor, ModeNProductIdentityIsExact) {
  Rng rng(9);
  TensorP a = testsup::random_tensor(rng, {3, 2, 4});
  const TensorP c = mode_n_product(a, Eigen::MatrixXd::Identity(4, 4), 2);
  EXPECT_EQ(max_abs_diff(a, c), 0.0);
}

TEST(Tensor, ModeNProductPermutationReordersFaces) {
  Rng rng(10);
  TensorP a = testsup::random_tensor(rng, {2, 2, 3});
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
  p(0, 1) = p(1, 2) = p(2, 0) = 1.0;  // face j of result = face perm(j) of input
  const TensorP c = mode_n_product(a, p, 2);
  EXPECT_EQ(c.frontal_slice(0), a.frontal_slice(1));
  EXPECT_EQ(c.frontal_slice(1), a.frontal_slice(2));
  EXPECT_EQ(c.frontal_slice(2), a.frontal_slice(0));
}

TEST(Tensor, ModeNProductMatchesTripleLoopOracle) {
  Rng rng(11);
  const TensorP a = testsup::random_tensor(rng, {2, 2, 3});
  const Eigen::MatrixXd m = testsup::random_matrix(rng, 3, 3);
  EXPECT_LE(max_abs_diff(mode_n_product(a, m, 2), mode_n_oracle(a, m, 2)), 1e-12);

  const TensorP b = testsup::random_tensor(rng, {2, 3, 2, 4});
  for (std::size_t mode = 0; mode < 4; ++mode) {
    const Eigen::MatrixXd w =
        testsup::random_matrix(rng, static_cast<Eigen::Index>(b.dim(mode)) + 1,
                               static_cast<Eigen::Index>(b.dim(mode)));
    EXPECT_LE(max_abs_diff(mode_n_product(b, w, mode), mode_n_oracle(b, w, mode)), 1e-12);
  }
  EXPECT_THROW(mode_n_product(a, testsup::random_matrix(rng, 3, 4), 2), contract_error);
}

TEST(Tensor, ModeNProductInverseRoundTrip) {
  Rng rng(12);
  const TensorP a = testsup::random_tensor(rng, {3, 2, 4, 2});
  for (std::size_t mode = 0; mode < 4; ++mode) {
    const Eigen::MatrixXd m = testsup::random_invertible(rng, a.dim(mode));
    const Eigen::MatrixXd minv =
        m.partialPivLu().solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    const TensorP back = mode_n_product(mode_n_product(a, m, mode), minv, mode);
    EXPECT_LE(max_abs_diff(back, a), 1e-10);
  }
}

TEST(Tensor, FacewiseIdentityAndDegenerate) {
  Rng rng(13);
  const TensorP a = testsup::random_tensor(rng, {2, 3, 4});
  TensorP eye({3, 3, 4});
  for (std::size_t k = 0; k < 4; ++k) eye.set_frontal_slice(k, Eigen::MatrixXd::Identity(3, 3));
  EXPECT_EQ(max_abs_diff(facewise_product(a, eye), a), 0.0);

  const TensorP x = testsup::random_tensor(rng, {2, 3, 1});
  const TensorP y = testsup::random_tensor(rng, {3, 2, 1});
  EXPECT_EQ(facewise_product(x, y).frontal_slice(0),
            Eigen::MatrixXd(x.frontal_slice(0) * y.frontal_slice(0)));
}

TEST(Tensor, FacewiseMatchesPerFaceLoopOracle) {
  Rng rng(14);
  const TensorP a = testsup::random_tensor(rng, {2, 3, 4});
  const TensorP b = testsup::random_tensor(rng, {3, 2, 4});
  const TensorP c = facewise_product(a, b);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < 3; ++t) acc += a(i, t, k) * b(t, j, k);
        EXPECT_NEAR(c(i, j, k), acc, 1e-12);
      }
    }
  }
  EXPECT_THROW(facewise_product(a, testsup::random_tensor(rng, {3, 2, 5})), contract_error);
}

TEST(Tensor, FacewiseAssociativity) {
  Rng rng(15);
  const TensorP a = testsup::random_tensor(rng, {2, 3, 4});
  const TensorP b = testsup::random_tensor(rng, {3, 2, 4});
  const TensorP c = testsup::random_tensor(rng, {2, 3, 4});
  const TensorP left = facewise_product(facewise_product(a, b), c);
  const TensorP right = facewise_product(a, facewise_product(b, c));
  EXPECT_LE(max_abs_diff(left, right), 1e-12);
}
