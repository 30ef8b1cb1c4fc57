#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "qlink/numerics.hpp"

using namespace qlink;

namespace {

std::vector<double> sample(double (*f)(double), double a, double h,
                           std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = f(a + double(i) * h);
  return v;
}

double max_err(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("cumint4 integrates cubics exactly") {
  const double h = 0.173;
  const std::size_t n = 41;
  std::vector<double> f(n), exact(n);
  const double t0 = -2.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + double(i) * h;
    f[i] = t * t * t - 2.0 * t + 1.0;
    exact[i] = (std::pow(t, 4) - std::pow(t0, 4)) / 4.0 -
               (t * t - t0 * t0) + (t - t0);
  }
  auto F = cumint4(f, h);
  REQUIRE(max_err(F, exact) < 1e-12);
}

TEST_CASE("cumint4 is fourth order on smooth data") {
  auto run = [](std::size_t n) {
    const double a = 0.0, b = 3.1;
    const double h = (b - a) / double(n - 1);
    auto f = sample([](double t) { return std::sin(t); }, a, h, n);
    auto F = cumint4(f, h);
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = a + double(i) * h;
      m = std::max(m, std::abs(F[i] - (1.0 - std::cos(t))));
    }
    return m;
  };
  const double e1 = run(101), e2 = run(201);
  REQUIRE(oracle::observed_order(e1, e2) > 3.7);
}

TEST_CASE("cumint4 handles complex samples") {
  const double h = 0.01;
  const std::size_t n = 301;
  std::vector<cplx> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) * h;
    f[i] = std::exp(cplx(0.0, 2.0 * t));
  }
  auto F = cumint4(f, h);
  const double T = double(n - 1) * h;
  const cplx exact = (std::exp(cplx(0.0, 2.0 * T)) - 1.0) / cplx(0.0, 2.0);
  REQUIRE(std::abs(F.back() - exact) < 1e-8);
}

TEST_CASE("derivative_c2 is second order") {
  auto run = [](std::size_t n) {
    const double a = -1.0, b = 1.0;
    const double h = (b - a) / double(n - 1);
    auto f = sample([](double t) { return std::exp(t); }, a, h, n);
    auto d = derivative_c2(f, h);
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      m = std::max(m, std::abs(d[i] - std::exp(a + double(i) * h)));
    return m;
  };
  const double e1 = run(101), e2 = run(201);
  REQUIRE(oracle::observed_order(e1, e2) > 1.85);
}

TEST_CASE("catmull_rom reproduces quadratics and converges cubically") {
  TimeGrid g(0.0, 0.1, 21);
  TimeTrace tr(g);
  for (std::size_t i = 0; i < g.n; ++i) {
    const double t = g.t(i);
    tr.v[i] = cplx(3.0 * t * t - t + 0.5, -t * t);
  }
  for (double t : {0.05, 0.333, 1.27, 1.93}) {
    const cplx want(3.0 * t * t - t + 0.5, -t * t);
    REQUIRE(std::abs(interp_catmull_rom(tr, t) - want) < 1e-12);
  }

  auto err_at = [](std::size_t n) {
    TimeGrid gg(0.0, 2.0 / double(n - 1), n);
    TimeTrace s(gg);
    for (std::size_t i = 0; i < gg.n; ++i)
      s.v[i] = std::sin(3.0 * gg.t(i));
    double m = 0.0;
    for (int j = 0; j < 500; ++j) {
      const double t = 0.3 + 1.4 * double(j) / 499.0;
      m = std::max(m, std::abs(interp_catmull_rom(s, t) -
                               cplx(std::sin(3.0 * t), 0.0)));
    }
    return m;
  };
  REQUIRE(oracle::observed_order(err_at(51), err_at(101)) > 2.6);
}

TEST_CASE("fit_line recovers slope and intercept") {
  std::vector<double> x, y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(0.3 * i);
    y.push_back(2.5 * 0.3 * i - 1.25);
  }
  auto fit = fit_line(x, y);
  REQUIRE(fit.slope == Catch::Approx(2.5).epsilon(1e-12));
  REQUIRE(fit.intercept == Catch::Approx(-1.25).epsilon(1e-10));
}

TEST_CASE("tanh_sinh oracle nails a known integral") {
  const double got = oracle::tanh_sinh(
      [](double x) { return 1.0 / std::cosh(x); }, -40.0, 40.0);
  REQUIRE(got == Catch::Approx(qlink::pi).epsilon(1e-12));
}

TEST_CASE("TimeGrid and inner product basics") {
  auto g = TimeGrid::spanning(-1.0, 1.0, 201);
  REQUIRE(g.t0 == -1.0);
  REQUIRE(g.back() == Catch::Approx(1.0));
  TimeTrace a(g), b(g);
  for (std::size_t i = 0; i < g.n; ++i) {
    a.v[i] = cplx(1.0, 0.0);
    b.v[i] = cplx(0.0, 1.0);
  }
  // Plain Riemann sum: n * dt = 2.01 on this grid.
  REQUIRE(std::abs(inner(a, b) - cplx(0.0, 2.01)) < 1e-12);
  REQUIRE(norm_sq(a) == Catch::Approx(2.01).epsilon(1e-10));
}
