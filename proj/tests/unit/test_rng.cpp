#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "hessavg/rng.hpp"

using namespace hessavg;

TEST_CASE("streams are reproducible and label-separated") {
  RandomStream a(7, "gradient"), b(7, "gradient"), c(7, "hessian"), d(8, "gradient");
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
  }
}

TEST_CASE("substream does not advance the parent") {
  RandomStream a(1, "x"), b(1, "x");
  auto child = a.substream("child");
  child();
  CHECK(a() == b());
  CHECK(a.substream("child")() != a.substream("other")());
}

TEST_CASE("uniform and normal moments") {
  RandomStream r(11, "moments");
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rademacher, bernoulli and binomial") {
  RandomStream r(12, "discrete");
  int plus = 0, hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = r.rademacher();
    REQUIRE((z == 1.0 || z == -1.0));
    plus += z > 0;
    hits += r.bernoulli(0.3);
  }
  CHECK(plus / double(n) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(hits / double(n) == doctest::Approx(0.3).epsilon(0.02));
  double mean = 0;
  for (int i = 0; i < 5000; ++i) {
    const Index b = r.binomial(40, 0.25);
    REQUIRE(b >= 0);
    REQUIRE(b <= 40);
    mean += double(b) / 5000;
  }
  CHECK(mean == doctest::Approx(10.0).epsilon(0.03));
  CHECK(r.binomial(10, 0.0) == 0);
  CHECK(r.binomial(10, 1.0) == 10);
}

TEST_CASE("permutations and sampling without replacement") {
  RandomStream r(13, "perm");
  for (Index n : {1, 2, 7, 50}) {
    auto p = r.permutation(n);
    std::sort(p.begin(), p.end());
    std::vector<Index> id(static_cast<std::size_t>(n));
    std::iota(id.begin(), id.end(), Index{0});
    CHECK(p == id);
  }
  const auto s = r.sample_without_replacement(100, 30);
  CHECK(s.size() == 30);
  CHECK(std::set<Index>(s.begin(), s.end()).size() == 30);
  for (auto i : s) CHECK((i >= 0 && i < 100));
  for (int t = 0; t < 1000; ++t) {
    const Index i = r.uniform_index(3);
    REQUIRE((i >= 0 && i < 3));
  }
}
