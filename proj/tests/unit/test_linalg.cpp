#include "doctest.h"
#include "gen.hpp"

#include "hessavg/linalg.hpp"

using namespace hessavg;

namespace {
Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}
}  // namespace

TEST_CASE("sym_eig basics") {
  auto e = sym_eig(Mat::Identity(3, 3));
  CHECK(e.eigenvalues.isApprox(Vec::Ones(3)));
  e = sym_eig(diag2(2, -3));
  CHECK(e.eigenvalues(0) == doctest::Approx(-3));
  CHECK(e.eigenvalues(1) == doctest::Approx(2));
}

TEST_CASE("sym_eig reconstructs random matrices") {
  RandomStream rng(1, "linalg-eig");
  for (int t = 0; t < 50; ++t) {
    const Index d = gen::size_in(rng, 1, 12);
    const Mat a = gen::symmetric(rng, d);
    const auto e = sym_eig(a);
    for (Index i = 1; i < d; ++i) CHECK(e.eigenvalues(i) >= e.eigenvalues(i - 1));
    const Mat& u = e.eigenvectors;
    CHECK((u.transpose() * u - Mat::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-10);
    const Mat back = u * e.eigenvalues.asDiagonal() * u.transpose();
    CHECK((back - a).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, a.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("sym_eig rejects bad input") {
  Mat a = Mat::Identity(2, 2);
  a(0, 1) = std::nan("");
  a(1, 0) = a(0, 1);
  CHECK_THROWS_AS(sym_eig(a), NumericalError);
  Mat b(2, 2);
  b << 1, 2, 3, 4;
  CHECK_THROWS_AS(sym_eig(b), ValidationError);
  CHECK_THROWS_AS(sym_eig(Mat(2, 3)), ValidationError);
}

TEST_CASE("matrix_abs") {
  CHECK(matrix_abs(diag2(2, -3)).isApprox(diag2(2, 3)));
  Mat swap(2, 2);
  swap << 0, 1, 1, 0;
  CHECK((matrix_abs(swap) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  RandomStream rng(2, "linalg-abs");
  for (int t = 0; t < 30; ++t) {
    const Index d = gen::size_in(rng, 2, 10);
    const Mat p = gen::spd(rng, d);
    CHECK((matrix_abs(p) - p).cwiseAbs().maxCoeff() <= 1e-9 * p.cwiseAbs().maxCoeff());
    const Mat a = gen::indefinite(rng, d);
    const Mat abs_a = matrix_abs(a);
    CHECK(sym_eig(abs_a).eigenvalues(0) >= -1e-10);
    CHECK((abs_a * a - a * abs_a).cwiseAbs().maxCoeff() <= 1e-9 * (1 + a.squaredNorm()));
    CHECK((matrix_abs(abs_a) - abs_a).cwiseAbs().maxCoeff() <= 1e-9 * (1 + abs_a.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("pd_modify examples") {
  auto r = pd_modify(Mat(2 * Mat::Identity(3, 3)), 1.0);
  CHECK_FALSE(r.was_shifted);
  CHECK(r.matrix.isApprox(2 * Mat::Identity(3, 3)));

  r = pd_modify(diag2(0.5, 3), 1.0);
  CHECK(r.was_shifted);
  CHECK(r.shift == doctest::Approx(0.5));
  CHECK((r.matrix - diag2(1, 3.5)).cwiseAbs().maxCoeff() < 1e-12);

  r = pd_modify(diag2(-0.2, 2), 0.5);
  CHECK(r.was_shifted);
  CHECK((r.matrix - diag2(0.5, 2.3)).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(pd_modify(diag2(1, 1), 0.0), ValidationError);
}

TEST_CASE("pd_modify floor property") {
  RandomStream rng(3, "linalg-pd");
  for (int t = 0; t < 200; ++t) {
    const Index d = gen::size_in(rng, 1, 8);
    const Mat a = gen::symmetric(rng, d, 2.0);
    const double mu = std::pow(10.0, -4 + 4 * rng.uniform());
    const auto r = pd_modify(a, mu);
    CHECK(sym_eig(r.matrix).eigenvalues(0) >= mu - 1e-9);
    const double lmin_abs = sym_eig(a).eigenvalues.cwiseAbs().minCoeff();
    CHECK(r.was_shifted == (lmin_abs < mu));
    if (!r.was_shifted) CHECK((r.matrix - matrix_abs(a)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("spd_solve") {
  Vec b(3);
  b << 1, -2, 3;
  CHECK(spd_solve(Mat::Identity(3, 3), b).isApprox(b));
  Vec g(2);
  g << 2, 8;
  const Vec p = spd_solve(diag2(2, 4), g);
  CHECK(p(0) == doctest::Approx(1));
  CHECK(p(1) == doctest::Approx(2));

  RandomStream rng(4, "linalg-solve");
  for (int t = 0; t < 50; ++t) {
    const Index d = gen::size_in(rng, 1, 10);
    const Mat h = gen::spd(rng, d, 1e-2, 1e2);
    const Vec v = rng.normal_vector(d);
    const Vec rhs = h * v;
    const Vec x = spd_solve(h, rhs);
    CHECK((h * x - rhs).norm() <= 1e-8 * rhs.norm());
    CHECK((x - v).norm() <= 1e-8 * v.norm() * 1e4);
    CHECK((x - h.inverse() * rhs).norm() <= 1e-8 * (1 + x.norm()));
  }
  CHECK_THROWS_AS(spd_solve(diag2(1, -1), g), NotPositiveDefinite);
  CHECK_THROWS_AS(spd_solve(diag2(1, 1), Vec(3)), ValidationError);
}

TEST_CASE("weighted_norm_sq") {
  Vec e1(2);
  e1 << 1, 0;
  CHECK(weighted_norm_sq<double>(e1, Identity{}) == 1.0);
  Vec ones = Vec::Ones(2);
  CHECK(weighted_norm_sq<double>(ones, InverseOf<double>{diag2(2, 4)}) == doctest::Approx(0.75));
  CHECK(weighted_norm_sq<double>(ones, InverseOfDiagonal<double>{Vec((Vec(2) << 2, 4).finished())}) ==
        doctest::Approx(0.75));

  RandomStream rng(5, "linalg-wn");
  for (int t = 0; t < 50; ++t) {
    const Index d = gen::size_in(rng, 1, 10);
    const Mat h = gen::spd(rng, d);
    const Vec v = rng.normal_vector(d);
    const double want = v.dot(h.inverse() * v);
    CHECK(std::abs(weighted_norm_sq<double>(v, InverseOf<double>{h}) - want) <= 1e-10 * std::max(1.0, want));
    CHECK(weighted_norm_sq<double>(v, Identity{}) == v.squaredNorm());
  }
  CHECK_THROWS_AS(weighted_norm_sq<double>(ones, InverseOf<double>{diag2(1, -1)}), NotPositiveDefinite);
}

TEST_CASE("weight_lambda_max") {
  CHECK(weight_lambda_max<double>(Identity{}) == 1.0);
  CHECK(weight_lambda_max<double>(InverseOf<double>{diag2(2, 4)}) == doctest::Approx(0.5));
}
