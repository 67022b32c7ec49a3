#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sprune/nn_kernels.hpp"
#include "test_support.hpp"

using namespace sprune;

TEST_CASE("tensor shape bookkeeping") {
  Tensor<float> t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK_THROWS_AS(Tensor<float>({2, 3}, {1.f, 2.f}), DimensionError);
  CHECK_THROWS_AS(t.reshaped({4, 2}), DimensionError);
  CHECK(t.reshaped({3, 2}).dim(0) == 3);
  t(1, 2) = 5.f;
  CHECK(t[5] == 5.f);
  CHECK(t.all_finite());
  t[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("matmul identity and small cases") {
  Tensor<float> eye({2, 2}, {1, 0, 0, 1});
  Tensor<float> b({2, 2}, {5, 6, 7, 8});
  auto y = matmul(eye, b);
  for (Index i = 0; i < 4; ++i) CHECK(y[i] == b[i]);

  Tensor<float> a({1, 2}, {1, 2});
  Tensor<float> c({2, 1}, {3, 4});
  CHECK(matmul(a, c)[0] == doctest::Approx(11.0));

  CHECK_THROWS_AS(matmul(c, c), DimensionError);  // 2x1 times 2x1: inner dims differ
}

TEST_CASE("matmul matches the triple-loop oracle") {
  std::mt19937_64 rng(7);
  auto a = oracle::random_tensor<float>({4, 5}, rng);
  auto b = oracle::random_tensor<float>({5, 3}, rng);
  auto got = matmul(a, b);
  auto want = oracle::naive_matmul(a, b);
  for (Index i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-6));
}

TEST_CASE("conv2d all-ones 3x3 sums to 9") {
  Tensor<float> x = Tensor<float>::full({1, 1, 3, 3}, 1.f);
  Tensor<float> w = Tensor<float>::full({1, 1, 3, 3}, 1.f);
  auto y = conv2d(x, w, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y[0] == doctest::Approx(9.0));
}

TEST_CASE("conv2d output geometry") {
  std::mt19937_64 rng(3);
  auto x = oracle::random_tensor<float>({1, 1, 8, 8}, rng);
  auto w = oracle::random_tensor<float>({4, 1, 3, 3}, rng);
  CHECK(conv2d(x, w, 1, 0).shape() == Shape{1, 4, 6, 6});
  CHECK(conv2d(x, w, 2, 1).shape() == Shape{1, 4, 4, 4});
  auto big = oracle::random_tensor<float>({1, 1, 2, 2}, rng);
  CHECK_THROWS_AS(conv2d(big, w, 1, 0), DimensionError);
  CHECK_THROWS_AS(conv2d(x, w, 0, 0), DimensionError);
}

TEST_CASE("conv2d matches the direct convolution oracle") {
  std::mt19937_64 rng(11);
  auto x = oracle::random_tensor<float>({2, 3, 8, 8}, rng);
  auto w = oracle::random_tensor<float>({4, 3, 3, 3}, rng);
  for (auto [stride, pad] : {std::pair<Index, Index>{1, 0}, {1, 1}, {2, 1}, {3, 2}}) {
    auto got = conv2d(x, w, stride, pad);
    auto want = oracle::naive_conv2d(x, w, stride, pad);
    CHECK(got.same_shape(want));
    CHECK(oracle::max_abs_diff(got, want) < 1e-5);
  }
}

TEST_CASE("relu clamps negatives") {
  Tensor<float> x({3}, {-1, 0, 2});
  auto y = relu(x);
  CHECK(y[0] == 0.f);
  CHECK(y[1] == 0.f);
  CHECK(y[2] == 2.f);

  auto neg = Tensor<float>::full({2, 2}, -3.f);
  auto zeros = relu(neg);
  for (Index i = 0; i < zeros.size(); ++i) CHECK(zeros[i] == 0.f);
}

TEST_CASE("maxpool basics") {
  Tensor<float> x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto r = maxpool2d(x, 2, 2);
  CHECK(r.y.shape() == Shape{1, 1, 1, 1});
  CHECK(r.y[0] == 4.f);

  auto c = Tensor<float>::full({2, 3, 4, 4}, 0.5f);
  auto pooled = maxpool2d(c, 2, 2);
  CHECK(pooled.y.shape() == Shape{2, 3, 2, 2});
  for (Index i = 0; i < pooled.y.size(); ++i) CHECK(pooled.y[i] == 0.5f);

  CHECK_THROWS_AS(maxpool2d(x, 3, 1), DimensionError);
}

TEST_CASE("maxpool matches the window-scan oracle") {
  std::mt19937_64 rng(23);
  auto x = oracle::random_tensor<float>({2, 3, 7, 7}, rng);
  for (auto [k, stride] : {std::pair<Index, Index>{2, 2}, {3, 2}, {2, 1}}) {
    auto got = maxpool2d(x, k, stride).y;
    auto want = oracle::naive_maxpool(x, k, stride);
    CHECK(got.same_shape(want));
    CHECK(oracle::max_abs_diff(got, want) == 0.0);
  }
}

TEST_CASE("maxpool tie-break routes to the first occurrence") {
  Tensor<float> x = Tensor<float>::full({1, 1, 2, 2}, 1.f);
  auto r = maxpool2d(x, 2, 2);
  CHECK(r.argmax[0] == 0);  // row-major first element of the window
}

TEST_CASE("softmax cross-entropy analytic values") {
  Tensor<float> uniform = Tensor<float>::full({2, 10}, 0.f);
  auto r = softmax_xent(uniform, {3, 7});
  CHECK(r.loss == doctest::Approx(std::log(10.0)).epsilon(1e-6));

  Tensor<float> dominant = Tensor<float>::full({1, 10}, 0.f);
  dominant(0, 4) = 1e4f;
  auto d = softmax_xent(dominant, {4});
  CHECK(d.loss == doctest::Approx(0.0).epsilon(1e-6));

  CHECK_THROWS_AS(softmax_xent(uniform, {3, 10}), UsageError);
  CHECK_THROWS_AS(softmax_xent(uniform, std::vector<std::int32_t>{-1, 0}), UsageError);
}

TEST_CASE("linear matches matmul against the transposed weight") {
  std::mt19937_64 rng(5);
  auto x = oracle::random_tensor<float>({4, 6}, rng);
  auto w = oracle::random_tensor<float>({3, 6}, rng);
  Tensor<float> b({3}, {0.1f, -0.2f, 0.3f});
  auto y = linear(x, w, b);
  Tensor<float> wt({6, 3});
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 6; ++j) wt(j, i) = w(i, j);
  auto want = oracle::naive_matmul(x, wt);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j)
      CHECK(y(i, j) == doctest::Approx(want(i, j) + b[j]).epsilon(1e-5));
}
