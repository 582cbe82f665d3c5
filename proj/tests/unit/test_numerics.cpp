#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "helpers.hpp"
#include "lance/error.hpp"
#include "lance/numerics.hpp"

using namespace lance;
using testing::random_matrix;

TEST_CASE("l2_normalize_rows examples") {
  auto r = l2_normalize_rows(Matrix::from_rows({{3, 4}}));
  CHECK(r.matrix(0, 0) == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(r.matrix(0, 1) == doctest::Approx(0.8).epsilon(1e-7));
  CHECK(r.zero_rows.empty());

  r = l2_normalize_rows(Matrix::from_rows({{0, 0}}));
  CHECK(r.matrix == Matrix::from_rows({{0, 0}}));
  CHECK(r.zero_rows == std::vector<std::size_t>{0});

  r = l2_normalize_rows(Matrix::from_rows({{1, 1, 1, 1}}));
  for (float v : r.matrix.values()) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("l2_normalize_rows rejects non-finite input") {
  CHECK_THROWS_AS(l2_normalize_rows(Matrix::from_rows({{1, NAN}})), InvalidValue);
  CHECK_THROWS_AS(l2_normalize_rows(Matrix::from_rows({{INFINITY, 0}})), InvalidValue);
}

TEST_CASE("l2_normalize_rows gives unit rows and is idempotent") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const Matrix m = random_matrix(rng, 7, 1 + t, -5, 5);
    const Matrix once = l2_normalize_rows(m).matrix;
    const Matrix twice = l2_normalize_rows(once).matrix;
    for (std::size_t r = 0; r < m.rows(); ++r) CHECK(norm(once.row(r)) == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(std::abs(once.values()[i] - twice.values()[i]) <= 1e-6);
  }
}

TEST_CASE("cosine_similarity examples") {
  CHECK(cosine_similarity(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{1, 0}}))(0, 0) == doctest::Approx(1.0));
  CHECK(cosine_similarity(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{0, 1}}))(0, 0) == 0.0F);
  CHECK(cosine_similarity(Matrix::from_rows({{1, 1}}), Matrix::from_rows({{1, 0}}))(0, 0) ==
        doctest::Approx(0.70710678).epsilon(1e-7));
}

TEST_CASE("cosine_similarity errors") {
  CHECK_THROWS_AS(cosine_similarity(Matrix(1, 2, 1.0F), Matrix(1, 3, 1.0F)), ShapeError);
  try {
    cosine_similarity(Matrix::from_rows({{1, 0}, {0, 0}}), Matrix::from_rows({{1, 0}}));
    FAIL("expected DegenerateRow");
  } catch (const DegenerateRow& e) {
    CHECK(std::string(e.what()).find('1') != std::string::npos);
  }
  CHECK_THROWS_AS(cosine_similarity(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{0, 0}})), DegenerateRow);
}

TEST_CASE("cosine_similarity matches a double-loop oracle, is bounded, and scale-invariant") {
  std::mt19937_64 rng(2);
  const Matrix a = random_matrix(rng, 9, 13);
  const Matrix b = random_matrix(rng, 6, 13);
  const Matrix s = cosine_similarity(a, b);
  REQUIRE(s.rows() == 9);
  REQUIRE(s.cols() == 6);
  Matrix scaled = a;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (auto& v : scaled.row(r)) v *= static_cast<float>(0.1 + r * 3.7);
  }
  const Matrix s2 = cosine_similarity(scaled, b);
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      long double d = 0, na = 0, nb = 0;
      for (std::size_t k = 0; k < 13; ++k) {
        d += static_cast<long double>(a(i, k)) * b(j, k);
        na += static_cast<long double>(a(i, k)) * a(i, k);
        nb += static_cast<long double>(b(j, k)) * b(j, k);
      }
      const double expect = static_cast<double>(d / std::sqrt(na * nb));
      CHECK(std::abs(s(i, j) - expect) <= 1e-6);
      CHECK(std::abs(s(i, j)) <= 1.0F + 1e-6F);
      CHECK(std::abs(s2(i, j) - s(i, j)) <= 1e-5);
    }
  }
  const Matrix unit = l2_normalize_rows(a).matrix;
  const Matrix self = cosine_similarity(unit, unit);
  for (std::size_t i = 0; i < unit.rows(); ++i) CHECK(self(i, i) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("log_softmax_rows examples") {
  Matrix r = log_softmax_rows(Matrix::from_rows({{0, 0}}));
  CHECK(r(0, 0) == doctest::Approx(-std::log(2.0)));
  CHECK(r(0, 1) == doctest::Approx(-std::log(2.0)));

  r = log_softmax_rows(Matrix::from_rows({{1000, 0}}));
  CHECK(std::isfinite(r(0, 0)));
  CHECK(std::abs(r(0, 0)) < 1e-6);
  CHECK(r(0, 1) == doctest::Approx(-1000.0));

  r = log_softmax_rows(Matrix::from_rows({{1, 2, 3}}));
  const long double lse = std::log(std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L));
  for (int k = 0; k < 3; ++k) CHECK(std::abs(r(0, k) - static_cast<double>((k + 1) - lse)) <= 1e-6);
}

TEST_CASE("exp(log_softmax) rows sum to one even at large magnitude") {
  std::mt19937_64 rng(3);
  for (double scale : {1.0, 100.0, 1e4}) {
    const Matrix logits = random_matrix(rng, 5, 8, -scale, scale);
    const Matrix r = log_softmax_rows(logits);
    REQUIRE(r.all_finite());
    for (std::size_t i = 0; i < r.rows(); ++i) {
      double s = 0.0;
      for (float v : r.row(i)) s += std::exp(static_cast<double>(v));
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("adam_step examples") {
  AdamConfig cfg;
  AdamState zero_state(cfg, 2, 3);
  Matrix p = Matrix::from_rows({{1, -2, 3}, {0.5F, 0, 7}});
  const Matrix before = p;
  adam_step(zero_state, p, Matrix(2, 3));
  CHECK(p == before);
  CHECK(zero_state.step == 1);

  AdamConfig one;
  one.lr = 0.1;
  AdamState s(one, 1, 1);
  Matrix theta(1, 1, 1.0F);
  adam_step(s, theta, Matrix(1, 1, 1.0F));
  CHECK(theta(0, 0) == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-7));

  // hand-unrolled bias-corrected recursion on f(theta) = theta^2
  AdamState q(one, 1, 1);
  Matrix x(1, 1, 1.0F);
  double m = 0, v = 0, ref = 1.0;
  for (int t = 1; t <= 50; ++t) {
    const double g = 2.0 * ref;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    ref -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    adam_step(q, x, Matrix(1, 1, static_cast<float>(2.0 * x(0, 0))));
  }
  CHECK(std::abs(x(0, 0)) < 1.0F);
  CHECK(x(0, 0) == doctest::Approx(ref).epsilon(1e-4));
  for (float sm : q.second_moment.values()) CHECK(sm >= 0.0F);
}

TEST_CASE("adam config and shape validation") {
  AdamConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = AdamConfig{};
  bad.lr = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = AdamConfig{};
  bad.epsilon = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  AdamState s(AdamConfig{}, 2, 2);
  Matrix p(2, 3);
  CHECK_THROWS_AS(adam_step(s, p, Matrix(2, 3)), ShapeError);
}

TEST_CASE("parallel_for covers every index once and results are thread-count independent") {
  std::vector<int> hits(10007, 0);
  parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) ++hits[i];
  });
  for (int h : hits) CHECK(h == 1);

  std::mt19937_64 rng(4);
  const Matrix a = random_matrix(rng, 500, 37);
  const Matrix b = random_matrix(rng, 41, 37);
  set_thread_count(1);
  const Matrix one = matmul_transposed(a, b);
  set_thread_count(std::max<unsigned>(4, std::thread::hardware_concurrency()));
  const Matrix many = matmul_transposed(a, b);
  set_thread_count(0);
  CHECK(one == many);
}

TEST_CASE("derive_seed is deterministic and separates counters") {
  CHECK(derive_seed(7, 0) == derive_seed(7, 0));
  CHECK(derive_seed(7, 0) != derive_seed(7, 1));
  CHECK(derive_seed(7, 0) != derive_seed(8, 0));
}

TEST_CASE("matrix basics") {
  const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const std::vector<std::size_t> idx{2, 0};
  CHECK(m.select_rows(idx) == Matrix::from_rows({{5, 6}, {1, 2}}));
  CHECK(m.all_finite());
  Matrix n = m;
  n(1, 1) = NAN;
  CHECK_FALSE(n.all_finite());
  CHECK_THROWS(Matrix(2, 2, std::vector<float>(3)));
}
