#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pgen/numerics.hpp"

using pgen::Matrix;
using pgen::Rng;
using pgen::Vector;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 4.0 * rng.uniform() - 2.0;
  return m;
}

}  // namespace

TEST_CASE("matmul by identity returns the input") {
  Rng rng(3);
  const Matrix a = random_matrix(4, 6, rng);
  CHECK(pgen::matmul(a, Matrix::Identity(6, 6)) == a);
}

TEST_CASE("matmul hand example") {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Matrix b(2, 1);
  b << 5, 6;
  const Matrix c = pgen::matmul(a, b);
  CHECK(c(0, 0) == 17.0);
  CHECK(c(1, 0) == 39.0);
}

TEST_CASE("matmul equals the naive triple loop exactly") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Matrix a = random_matrix(7, 5, rng);
    const Matrix b = random_matrix(5, 3, rng);
    CHECK(pgen::matmul(a, b) == oracle::naive_matmul(a, b));
  }
}

TEST_CASE("matvec equals the naive loop exactly") {
  Rng rng(11);
  const Matrix a = random_matrix(9, 13, rng);
  const Matrix x = random_matrix(13, 1, rng);
  CHECK(pgen::matvec(a, Vector(x.col(0))) == oracle::naive_matmul(a, x).col(0));
}

TEST_CASE("matmul rejects mismatched shapes") {
  CHECK_THROWS_AS(pgen::matmul(Matrix::Zero(2, 3), Matrix::Zero(2, 3)), pgen::Error);
  CHECK_THROWS_AS(pgen::matvec(Matrix::Zero(2, 3), Vector::Zero(2)), pgen::Error);
}

TEST_CASE("softmax") {
  SUBCASE("uniform") {
    const Vector p = pgen::softmax(Vector::Zero(2));
    CHECK(p(0) == 0.5);
    CHECK(p(1) == 0.5);
  }
  SUBCASE("shift invariance and simplex") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      Vector v = random_matrix(8, 1, rng).col(0) * 10.0;
      const double c = 200.0 * rng.uniform() - 100.0;
      const Vector p = pgen::softmax(v);
      const Vector q = pgen::softmax(Vector(v.array() + c));
      CHECK((p - q).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
      CHECK(p.minCoeff() >= 0.0);
    }
  }
  SUBCASE("large logits do not overflow") {
    Vector v(2);
    v << 1000.0, 0.0;
    const Vector p = pgen::softmax(v);
    CHECK(p.allFinite());
    CHECK(p(0) >= 1.0 - 1e-12);
  }
}

TEST_CASE("activations") {
  CHECK(pgen::sigmoid(0.0) == 0.5);
  CHECK(std::tanh(0.0) == 0.0);
  CHECK(pgen::relu(-3.0) == 0.0);
  CHECK(pgen::relu(2.5) == 2.5);
  CHECK(std::abs(pgen::sigmoid(40.0) - 1.0) <= 1e-15);
  CHECK(std::abs(pgen::sigmoid(-40.0)) <= 1e-15);
  CHECK(std::isfinite(pgen::sigmoid(-1000.0)));
  CHECK(std::isfinite(pgen::sigmoid(1000.0)));

  Rng rng(8);
  const Vector x = random_matrix(50, 1, rng).col(0) * 5.0;
  const Vector t = pgen::tanh(x);
  const Vector t_neg = pgen::tanh(Vector(-x));
  CHECK(t == -t_neg);
  const Vector r = pgen::relu(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) CHECK(r(i) == std::max(0.0, x(i)));
}

TEST_CASE("rng matches the reference algorithm") {
  Rng rng(42);
  oracle::Xoshiro reference(42);
  for (int i = 0; i < 1000; ++i) CHECK(rng.next_u64() == reference.next());
}

TEST_CASE("rng known answers for seed 42") {
  // Computed with an independent Python transcription of the algorithm.
  Rng rng(42);
  CHECK(rng.next_u64() == 0x15780b2e0c2ec716ULL);
  CHECK(rng.next_u64() == 0x6104d9866d113a7eULL);
  Rng uniform(42);
  CHECK(uniform.uniform() == 0.08386297105988216);
  CHECK(uniform.uniform() == 0.3789802506626686);
  CHECK(uniform.uniform() == 0.6800434110281394);
}

TEST_CASE("rng determinism and range") {
  Rng a(7);
  Rng b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng c(123);
  for (int i = 0; i < 100000; ++i) {
    const double u = c.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  CHECK(Rng::from_state(a.state()) == a);
}

TEST_CASE("sample_categorical") {
  SUBCASE("degenerate distribution") {
    Rng rng(1);
    Vector p(3);
    p << 1.0, 0.0, 0.0;
    for (int i = 0; i < 1000; ++i) REQUIRE(pgen::sample_categorical(p, rng) == 0);
  }
  SUBCASE("deterministic under a fixed seed") {
    Vector p(4);
    p << 0.1, 0.2, 0.3, 0.4;
    Rng a(9);
    Rng b(9);
    for (int i = 0; i < 200; ++i) {
      REQUIRE(pgen::sample_categorical(p, a) == pgen::sample_categorical(p, b));
    }
  }
  SUBCASE("frequencies") {
    Vector p(3);
    p << 0.2, 0.3, 0.5;
    Rng rng(2024);
    std::array<int, 3> counts{};
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(pgen::sample_categorical(p, rng))];
    for (int i = 0; i < 3; ++i) CHECK(std::abs(counts[i] / double(draws) - p(i)) <= 0.01);
  }
  SUBCASE("rejects invalid input") {
    Rng rng(1);
    Vector bad(2);
    bad << 0.7, 0.7;
    CHECK_THROWS_AS(pgen::sample_categorical(bad, rng), pgen::Error);
    bad << 1.5, -0.5;
    CHECK_THROWS_AS(pgen::sample_categorical(bad, rng), pgen::Error);
  }
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  Vector v(4);
  v << 0.1, 0.4, 0.4, 0.1;
  CHECK(pgen::argmax(v) == 1);
}
