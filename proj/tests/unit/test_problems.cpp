#include "doctest.h"
#include "gen.hpp"

#include <numeric>

#include "hessavg/constants.hpp"
#include "hessavg/linalg.hpp"
#include "hessavg/logistic.hpp"
#include "hessavg/quadratic.hpp"
#include "hessavg/synthetic.hpp"

using namespace hessavg;

namespace {

SparseDataset random_dataset(RandomStream& r, Index n, Index dim, double density) {
  SparseDataset d;
  d.dim = dim;
  for (Index i = 0; i < n; ++i) {
    std::vector<SparseEntry> row;
    for (int j = 1; j <= dim; ++j)
      if (r.bernoulli(density)) row.push_back({j, r.normal()});
    d.rows.push_back(row);
    d.labels.push_back(r.bernoulli(0.5) ? 1 : -1);
  }
  return d;
}

double rel_err(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm())); }

Vec fd_grad(const FiniteSumOracle& o, const Vec& w, const Sample& s, double h) {
  Vec g(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    Vec wp = w, wm = w;
    wp(i) += h;
    wm(i) -= h;
    g(i) = (o.loss_sub(wp, s) - o.loss_sub(wm, s)) / (2 * h);
  }
  return g;
}

Vec fd_hvp(const FiniteSumOracle& o, const Vec& w, const Sample& s, const Vec& v, double h) {
  return (o.grad_sub(w + h * v, s) - o.grad_sub(w - h * v, s)) / (2 * h);
}

}  // namespace

TEST_CASE("quadratic generation") {
  const auto q = quadratic_generate(100, default_quadratic_spectrum, 0.5, 0);
  const Mat ata = q.a().transpose() * q.a();
  const auto e = sym_eig(ata);
  const double kappa = e.eigenvalues(99) / e.eigenvalues(0);
  CHECK(kappa >= 5e5);
  CHECK(kappa <= 2e6);
  CHECK(is_symmetric(q.a()));

  const auto id = quadratic_generate(5, [](Index) { return 1.0; }, 0.5, 3);
  CHECK((id.a() - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);

  const auto a1 = quadratic_generate(10, default_quadratic_spectrum, 0.5, 42);
  const auto a2 = quadratic_generate(10, default_quadratic_spectrum, 0.5, 42);
  CHECK(a1.a() == a2.a());
  CHECK(a1.b() == a2.b());
  CHECK_THROWS_AS(quadratic_generate(3, [](Index) { return -1.0; }, 0.5, 0), ValidationError);
}

TEST_CASE("quadratic mask gradient") {
  MaskDraw all;
  for (Index i = 0; i < 4; ++i) {
    all.a_rows.push_back(i);
    all.b_entries.push_back(i);
  }
  const auto id = quadratic_generate(4, [](Index) { return 1.0; }, 0.5, 1);
  CHECK(quadratic_sub_grad(id, Vec::Zero(4), all).isApprox(-2 * id.b()));

  const auto q = quadratic_generate(4, default_quadratic_spectrum, 0.5, 2);
  const Vec w = q.a().ldlt().solve(q.b());
  CHECK(quadratic_sub_grad(q, w, all).norm() < 1e-10);
  MaskDraw bad = all;
  bad.a_rows.push_back(9);
  CHECK_THROWS_AS(quadratic_sub_grad(q, w, bad), ValidationError);

  // Batch oracle agrees with the explicit draw.
  RandomStream r(3, "masks");
  const Sample s = q.draw(1, r, true);
  const auto& m = as_mask_batch(s);
  REQUIRE(m.components.size() == 1);
  const Vec w0 = r.normal_vector(4);
  CHECK(rel_err(q.grad_sub(w0, s), quadratic_sub_grad(q, w0, m.components[0])) < 1e-12);
}

TEST_CASE("quadratic with all-keep masks is the unmasked least squares") {
  RandomStream r(4, "qkeep");
  const auto q = quadratic_generate(8, default_quadratic_spectrum, 0.5, 4);
  const Sample all = q.all_keep();
  const Mat h = q.hessian_sub(r.normal_vector(8), all);
  CHECK((h - 2 * q.a().transpose() * q.a()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((q.hessian_sub(r.normal_vector(8), all) - h).cwiseAbs().maxCoeff() == 0.0);
  const Vec w = r.normal_vector(8);
  CHECK(q.loss_sub(w, all) == doctest::Approx((q.a() * w - q.b()).squaredNorm()));
}

TEST_CASE("expected quadratic gradient vanishes at w*") {
  const auto q = quadratic_generate(10, default_quadratic_spectrum, 0.5, 5);
  const Vec w = q.optimum()->w;
  CHECK(rel_err(w, 0.5 * q.a().ldlt().solve(q.b())) < 1e-10);
  CHECK(q.grad_full(w).norm() < 1e-9);
  RandomStream r(5, "qmc");
  const int m = 100000;
  Vec mean = Vec::Zero(10);
  Vec sq = Vec::Zero(10);
  for (int t = 0; t < m; ++t) {
    const Vec g = q.grad_sub(w, q.draw(1, r));
    mean += g / m;
    sq += g.cwiseAbs2() / m;
  }
  const Vec sd = (sq - mean.cwiseAbs2()).cwiseSqrt();
  CHECK(mean.norm() <= 3 * sd.norm() / std::sqrt(double(m)));
}

TEST_CASE("quadratic mask gradient is unbiased at the 1/sqrt(m) rate") {
  const auto q = quadratic_generate(10, default_quadratic_spectrum, 0.5, 6);
  RandomStream r(6, "qrate");
  const Vec w = r.normal_vector(10);
  const Vec gf = q.grad_full(w);
  std::vector<double> lx, ly;
  for (int m : {16, 64, 256, 1024, 4096}) {
    double err = 0;
    const int reps = 40;
    for (int rep = 0; rep < reps; ++rep) {
      Vec acc = Vec::Zero(10);
      for (int t = 0; t < m; ++t) acc += q.grad_sub(w, q.draw(1, r));
      err += (acc / m - gf).norm() / reps;
    }
    lx.push_back(std::log(double(m)));
    ly.push_back(std::log(err));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(slope >= -0.65);
  CHECK(slope <= -0.35);
}

TEST_CASE("quadratic batch sampling matches explicit averaging in mean") {
  const auto q = quadratic_generate(6, default_quadratic_spectrum, 0.5, 7);
  RandomStream r1(7, "fast"), r2(7, "slow");
  const Vec w = Vec::Ones(6);
  Vec fast = Vec::Zero(6), slow = Vec::Zero(6);
  const int reps = 4000;
  for (int t = 0; t < reps; ++t) {
    fast += q.grad_sub(w, q.draw(8, r1)) / reps;
    const Sample s = q.draw(8, r2, true);
    Vec acc = Vec::Zero(6);
    for (const auto& c : as_mask_batch(s).components) acc += quadratic_sub_grad(q, w, c) / 8.0;
    slow += acc / reps;
    CHECK(rel_err(acc, q.grad_sub(w, s)) < 1e-10);
  }
  CHECK(rel_err(fast, q.grad_full(w)) < 0.05);
  CHECK(rel_err(slow, q.grad_full(w)) < 0.05);
}

TEST_CASE("logistic values at zero") {
  RandomStream r(8, "logit0");
  const auto data = random_dataset(r, 30, 6, 0.5);
  const LogisticProblem p(data);
  IndexSet s{{0, 3, 7, 12}};
  const auto ev = logistic_eval(p, Vec::Zero(6), s);
  CHECK(ev.loss == doctest::Approx(std::log(2.0)));
  Vec want = Vec::Zero(6);
  for (auto i : s.indices)
    for (const auto& e : data.rows[i]) want(e.index - 1) += data.labels[i] * e.value;
  want *= -1.0 / (2.0 * 4);
  CHECK(rel_err(ev.grad, want) < 1e-12);

  const Vec v = r.normal_vector(6);
  Vec hv = v / 30.0;
  for (auto i : s.indices) {
    double xv = 0;
    for (const auto& e : data.rows[i]) xv += e.value * v(e.index - 1);
    for (const auto& e : data.rows[i]) hv(e.index - 1) += xv * e.value / (4.0 * 4);
  }
  CHECK(rel_err(logistic_hvp(p, Vec::Zero(6), s, v), hv) < 1e-12);
  CHECK(logistic_hvp(p, r.normal_vector(6), s, Vec::Zero(6)).norm() == 0.0);
  CHECK_THROWS_AS(logistic_eval(p, Vec::Zero(6), IndexSet{}), ValidationError);
}

TEST_CASE("logistic is stable for huge margins") {
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  SparseDataset d;
  d.dim = 1;
  d.rows = {{{1, 1.0}}};
  d.labels = {1};
  const LogisticProblem p(d);
  Vec w(1);
  w << -1000;
  const auto ev = logistic_eval(p, w, IndexSet{{0}});
  CHECK(std::isfinite(ev.loss));
  CHECK(ev.grad.allFinite());
}

TEST_CASE("finite differences at random points") {
  RandomStream r(9, "fd");
  const auto data = random_dataset(r, 40, 8, 0.6);
  const LogisticProblem logit(data);
  const auto quad = quadratic_generate(8, default_quadratic_spectrum, 0.5, 9);
  SyntheticSumOptions so;
  so.dim = 8;
  so.components = 6;
  so.curvature = 2.0;
  const SyntheticFiniteSum synth(so);
  const std::vector<const FiniteSumOracle*> oracles{&logit, &quad, &synth};
  for (const auto* o : oracles) {
    for (int t = 0; t < 20; ++t) {
      const Vec w = r.normal_vector(8);
      const Sample s = o->draw(o->num_components() ? 5 : 3, r);
      const Vec g = o->grad_sub(w, s);
      CHECK(rel_err(g, fd_grad(*o, w, s, 1e-5)) <= 1e-5);
      const Vec v = r.normal_vector(8);
      CHECK(rel_err(o->hvp_sub(w, s, v), fd_hvp(*o, w, s, v, 1e-5)) <= 1e-4);
      const Vec u = r.normal_vector(8);
      CHECK(std::abs(u.dot(o->hvp_sub(w, s, v)) - v.dot(o->hvp_sub(w, s, u))) <=
            1e-10 * (1 + std::abs(u.dot(o->hvp_sub(w, s, v)))));
    }
  }
}

TEST_CASE("full sample reproduces the full objective") {
  RandomStream r(10, "full");
  const auto data = random_dataset(r, 25, 5, 0.7);
  const LogisticProblem p(data);
  SyntheticSumOptions so;
  so.dim = 5;
  so.components = 7;
  so.curvature = 1.0;
  const SyntheticFiniteSum s(so);
  for (const FiniteSumOracle* o : {static_cast<const FiniteSumOracle*>(&p), static_cast<const FiniteSumOracle*>(&s)}) {
    const Vec w = r.normal_vector(5);
    CHECK((o->grad_sub(w, o->full_sample()) - o->grad_full(w)).norm() <= 1e-12 * (1 + o->grad_full(w).norm()));
    CHECK(o->loss_sub(w, o->full_sample()) == doctest::Approx(o->loss_full(w)));
  }
}

TEST_CASE("logistic strong convexity from the regularizer") {
  RandomStream r(11, "sc");
  const auto data = random_dataset(r, 20, 6, 0.5);
  const LogisticProblem p(data);
  for (int t = 0; t < 20; ++t) {
    const Vec w = 3 * r.normal_vector(6);
    const Vec v = r.normal_vector(6);
    const Sample s = p.draw(4, r);
    CHECK(v.dot(p.hvp_sub(w, s, v)) >= v.squaredNorm() / 20.0 - 1e-14);
  }
}

TEST_CASE("gradient_stats matches component gradients") {
  RandomStream r(12, "stats");
  SyntheticSumOptions so;
  so.dim = 4;
  so.components = 9;
  so.curvature = 0.5;
  const SyntheticFiniteSum s(so);
  const Vec w = r.normal_vector(4);
  const IndexSet idx{{1, 4, 5, 8}};
  const auto st = s.gradient_stats(w, idx);
  Vec mean = Vec::Zero(4);
  for (auto i : idx.indices) mean += s.component_grad(w, i) / 4.0;
  double var = 0;
  for (auto i : idx.indices) var += (s.component_grad(w, i) - mean).squaredNorm() / 4.0;
  CHECK(rel_err(st.mean, mean) < 1e-12);
  CHECK(st.variance == doctest::Approx(var));
  CHECK(st.size == 4);

  const auto q = quadratic_generate(4, default_quadratic_spectrum, 0.5, 12);
  const Sample ms = q.draw(5, r, true);
  const auto qs = q.gradient_stats(w, ms);
  Vec qm = Vec::Zero(4);
  for (const auto& c : as_mask_batch(ms).components) qm += quadratic_sub_grad(q, w, c) / 5.0;
  double qv = 0;
  for (const auto& c : as_mask_batch(ms).components) qv += (quadratic_sub_grad(q, w, c) - qm).squaredNorm() / 5.0;
  CHECK(rel_err(qs.mean, qm) < 1e-12);
  CHECK(qs.variance == doctest::Approx(qv));
}

TEST_CASE("synthetic testbed optimum and constant Hessians") {
  SyntheticSumOptions so;
  so.curvature = 0.0;
  const SyntheticFiniteSum s(so);
  const auto opt = s.optimum();
  REQUIRE(opt);
  CHECK(s.grad_full(opt->w).norm() < 1e-10);
  RandomStream r(13, "synth");
  const Mat h0 = s.hessian_sub(r.normal_vector(20), IndexSet{{2}});
  const Mat h1 = s.hessian_sub(r.normal_vector(20), IndexSet{{2}});
  CHECK((h0 - h1).cwiseAbs().maxCoeff() < 1e-12);
  const auto e = sym_eig(h0);
  CHECK(e.eigenvalues(0) >= 0.2 - 1e-9);
  CHECK(e.eigenvalues(19) <= 5.0 + 1e-9);
  CHECK((s.hessian_sub(Vec::Zero(20), IndexSet{{2}}) - s.hessian_sub(Vec::Zero(20), IndexSet{{3}})).norm() > 1e-3);

  so.curvature = 3.0;
  const SyntheticFiniteSum c(so);
  CHECK(c.grad_full(c.optimum()->w).norm() < 1e-10);
}

TEST_CASE("estimate_constants") {
  const auto q = quadratic_generate(10, default_quadratic_spectrum, 0.5, 14);
  RandomStream r(14, "const");
  const std::vector<Vec> probes{r.normal_vector(10), r.normal_vector(10)};
  const auto c = estimate_constants(q, probes, {q.full_sample()}, 1);
  const double lmax = sym_eig(q.a()).eigenvalues(9);
  CHECK(c.L == doctest::Approx(2 * lmax * lmax).epsilon(0.05));

  const auto data = random_dataset(r, 30, 6, 0.6);
  const LogisticProblem p(data);
  std::vector<Sample> samples;
  for (int t = 0; t < 5; ++t) samples.push_back(p.draw(6, r));
  samples.push_back(p.full_sample());
  const auto cl = estimate_constants(p, {Vec::Zero(6), r.normal_vector(6)}, samples, 2);
  CHECK(cl.L <= 1.05 * p.smoothness_bound());
  CHECK(cl.L > 0);
  CHECK(cl.sigma2_g > 0);

  SparseDataset one;
  one.dim = 2;
  one.rows = {{{1, 1.0}, {2, -0.5}}};
  one.labels = {1};
  const LogisticProblem p1(one);
  const auto c1 = estimate_constants(p1, {Vec::Zero(2), Vec::Ones(2)}, {p1.full_sample()}, 3);
  CHECK(c1.sigma2_g == 0.0);
  CHECK_THROWS_AS(estimate_constants(p1, {Vec::Zero(2)}, {p1.full_sample()}), ValidationError);
}
