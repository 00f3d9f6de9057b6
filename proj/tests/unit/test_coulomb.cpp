#include "doctest.h"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "muellertf/coulomb.hpp"

using namespace mtf;
using std::numbers::pi;

namespace {

RadialFunction ball(const GridPtr& g, double radius) {
  const double c = 3.0 / (4.0 * pi * radius * radius * radius);
  return RadialFunction::sample(g, [=](double r) { return r < radius ? c : 0.0; }, radius);
}

// Racah's closed form for (j1 j2 j3; 0 0 0)².
double threej_squared(int a, int b, int c) {
  const int J = a + b + c;
  if (J % 2 || c > a + b || c < std::abs(a - b)) return 0.0;
  const int g = J / 2;
  auto lf = [](int n) { return std::lgamma(n + 1.0); };
  const double log_delta = lf(a + b - c) + lf(a - b + c) + lf(-a + b + c) - lf(J + 1);
  const double log_v = lf(g) - lf(g - a) - lf(g - b) - lf(g - c);
  return std::exp(log_delta + 2.0 * log_v);
}

}  // namespace

TEST_CASE("uniform ball") {
  auto inside = RadialGrid::logarithmic(1e-6, 1.0, 3000);
  auto f = RadialFunction::sample(inside, [](double) { return 3.0 / (4.0 * pi); });
  CHECK(std::abs(direct_energy(f) - 0.6) < 1e-8);
  CHECK(std::abs(hartree_potential(f)[0] - 1.5) < 1e-8);

  auto g = RadialGrid::logarithmic(1e-6, 10.0, 3000);
  auto b = ball(g, 1.0);
  auto v = hartree_potential(b);
  const double m = integrate3d(b);
  for (std::size_t i = g->lower_bound(1.0); i < g->size(); ++i) {
    CHECK(std::abs(v[i] - m / g->node(i)) < 1e-10);
  }
  CHECK(std::abs(direct_energy(b) - 0.6) < 1e-8);
  for (std::size_t i = 1; i < g->size(); ++i) CHECK(v[i] <= v[i - 1] + 1e-14);
}

TEST_CASE("zero input") {
  auto g = RadialGrid::logarithmic(1e-6, 10.0, 500);
  auto z = RadialFunction::zero(g);
  for (double x : hartree_potential(z).values()) CHECK(x == 0.0);
  CHECK(direct_energy(z) == 0.0);
}

TEST_CASE("exponential cloud potential") {
  auto g = RadialGrid::logarithmic(1e-6, 80.0, 4000);
  auto f = RadialFunction::sample(g, [](double r) { return std::exp(-r) / (8.0 * pi); });
  auto v = hartree_potential(f);
  for (std::size_t i = 0; i < g->size(); i += 97) {
    const double r = g->node(i);
    const double exact = r < 1e-3 ? 0.5 - r * r / 12.0 : 1.0 / r - std::exp(-r) * (1.0 / r + 0.5);
    CHECK(std::abs(v[i] - exact) < 1e-9);
  }
  // Length-2 rescaling of the hydrogen 1s density, whose D is 5/16.
  CHECK(std::abs(direct_energy(f) - 5.0 / 32.0) < 1e-10);
}

TEST_CASE("two-ball difference") {
  auto g = RadialGrid::logarithmic(1e-6, 4.0, 4000);
  auto b1 = ball(g, 1.0);
  auto b2 = ball(g, 2.0);
  // Neither breakpoint can be carried by the difference; integrate in two
  // passes instead: D(b1 - b2) = D(b1) + D(b2) - ∫ b1 (b2 * |x|⁻¹).
  const double d = direct_energy(b1) + direct_energy(b2) - coulomb_pairing(b1, b2);
  CHECK(std::abs(d - 3.0 / 16.0) < 1e-8);
  CHECK(d > 0.0);
}

TEST_CASE("bilinear consistency and positivity on random signed functions") {
  auto g = RadialGrid::logarithmic(1e-6, 60.0, 3000);
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> amp(-1.0, 1.0), width(0.5, 4.0), centre(0.0, 10.0);
  auto random_f = [&]() {
    double a[3], w[3], c[3];
    for (int k = 0; k < 3; ++k) {
      a[k] = amp(rng);
      w[k] = width(rng);
      c[k] = centre(rng);
    }
    return RadialFunction::sample(g, [=](double r) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) v += a[k] * std::exp(-(r - c[k]) * (r - c[k]) / (w[k] * w[k]));
      return v;
    });
  };
  int negative = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto f = random_f();
    auto h = random_f();
    if (direct_energy(f) < 0.0) ++negative;
    const double lhs = direct_energy(f + h) - direct_energy(f) - direct_energy(h);
    const double rhs = coulomb_pairing(f, h);
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(rhs)));
    // The one-sided form ∫ f (h * |x|⁻¹) differs only by discretization error.
    const double one_sided = integrate3d(f * hartree_potential(h));
    CHECK(std::abs(one_sided - rhs) < 1e-6 * std::max(1.0, std::abs(rhs)));
  }
  CHECK(negative == 0);
}

TEST_CASE("angular coefficients match Racah's formula") {
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; b <= 4; ++b)
      for (int c = 0; c <= 8; ++c) CHECK(std::abs(angular_coefficient(a, b, c) - threej_squared(a, b, c)) < 1e-13);
  CHECK(angular_coefficient(0, 0, 0) == doctest::Approx(1.0));
  CHECK(angular_coefficient(1, 1, 2) == doctest::Approx(2.0 / 15.0));
}

TEST_CASE("slater integrals are symmetric and match closed forms") {
  auto g = RadialGrid::logarithmic(1e-6, 60.0, 3000);
  const Multipole mp(g, 4);
  std::vector<double> a(g->size()), b(g->size());
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double r = g->node(i);
    a[i] = r * r * std::exp(-r);
    b[i] = r * std::exp(-2.0 * r);
  }
  for (int L = 0; L <= 4; ++L) CHECK(mp.slater(a, b, L) == doctest::Approx(mp.slater(b, a, L)).epsilon(1e-8));
  // R^0 of the hydrogen 1s pair density 4r²e^{-2r} (atomic units) is 5/8.
  std::vector<double> p(g->size());
  for (std::size_t i = 0; i < g->size(); ++i) p[i] = 4.0 * g->node(i) * g->node(i) * std::exp(-2.0 * g->node(i));
  CHECK(std::abs(mp.slater(p, p, 0) - 0.625) < 1e-8);
}

TEST_CASE("rank-one exchange equals direct energy") {
  auto g = RadialGrid::logarithmic(1e-6, 80.0, 3000);
  Eigen::MatrixXd u(g->size(), 1);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double r = g->node(i);
    u(static_cast<Eigen::Index>(i), 0) = r * std::exp(-r / 2.0) / std::sqrt(2.0);
  }
  ChannelDensityMatrix gamma(g);
  gamma.add_channel(0, u, {1.0});
  const auto x = exchange_energy(gamma);
  CHECK(std::abs(x.value - direct_energy(density_of(gamma))) < 1e-10);
  CHECK(x.truncation_estimate == 0.0);

  ChannelDensityMatrix empty(g);
  CHECK(exchange_energy(empty).value == 0.0);
}

namespace {

// Independent evaluation of X for analytic channel kernels: integrate
// |σ(x,y)|²/|x-y| over r, r' and the relative angle, with the angle
// integral rewritten through w = |x - y|, which removes the singularity.
struct AnalyticOrbital {
  int l;
  double occ;
  double (*u)(double);
};

double oracle_exchange(const std::vector<AnalyticOrbital>& orbs, double r_cut) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  using GL = boost::math::quadrature::gauss<double, 20>;
  auto integrand = [&](double r, double rp) {
    if (r <= 0.0 || rp <= 0.0) return 0.0;
    auto angle = [&](double w) {
      const double mu = std::clamp((r * r + rp * rp - w * w) / (2.0 * r * rp), -1.0, 1.0);
      double sig = 0.0;
      for (const auto& o : orbs) {
        sig += o.occ * (2 * o.l + 1) * std::legendre(static_cast<unsigned>(o.l), mu) * o.u(r) * o.u(rp);
      }
      return sig * sig;
    };
    const double ang = GL::integrate(angle, std::abs(r - rp), r + rp) / (r * rp);
    // |σ|² = sig² / (16π² r² r'²); measure 4π r² · 2π r'² dμ.
    return 0.5 * ang * 8.0 * pi * pi / (16.0 * pi * pi);
  };
  auto outer = [&](double r) {
    auto in = [&](double rp) { return integrand(r, rp); };
    return GK::integrate(in, 0.0, r, 12, 1e-12) + GK::integrate(in, r, r_cut, 12, 1e-12);
  };
  return GK::integrate(outer, 0.0, r_cut, 12, 1e-11);
}

double u1s(double r) { return 2.0 * r * std::exp(-r); }
double u2s(double r) { return r * (1.0 - r / 2.0) * std::exp(-r / 2.0) / std::sqrt(2.0); }
double u2p(double r) { return r * r * std::exp(-r / 2.0) / (2.0 * std::sqrt(6.0)); }

ChannelDensityMatrix sampled(const GridPtr& g, const std::vector<AnalyticOrbital>& orbs) {
  ChannelDensityMatrix out(g);
  for (int l = 0; l <= 2; ++l) {
    std::vector<const AnalyticOrbital*> sel;
    for (const auto& o : orbs)
      if (o.l == l) sel.push_back(&o);
    if (sel.empty()) continue;
    Eigen::MatrixXd u(g->size(), static_cast<Eigen::Index>(sel.size()));
    std::vector<double> occ;
    for (std::size_t k = 0; k < sel.size(); ++k) {
      for (std::size_t i = 0; i < g->size(); ++i) u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = sel[k]->u(g->node(i));
      occ.push_back(sel[k]->occ);
    }
    out.add_channel(l, u, occ);
  }
  return out;
}

}  // namespace

TEST_CASE("two s orbitals against direct quadrature") {
  auto g = RadialGrid::logarithmic(1e-6, 60.0, 3000);
  const std::vector<AnalyticOrbital> orbs{{0, 1.0, u1s}, {0, 1.0, u2s}};
  const double x = exchange_energy(sampled(g, orbs)).value;
  const double ref = oracle_exchange(orbs, 60.0);
  CHECK(std::abs(x / ref - 1.0) < 1e-6);
}

TEST_CASE("s and p channels against direct quadrature") {
  auto g = RadialGrid::logarithmic(1e-6, 60.0, 3000);
  const std::vector<AnalyticOrbital> orbs{{0, 0.7, u1s}, {0, 0.3, u2s}, {1, 0.5, u2p}};
  auto sigma = sampled(g, orbs);
  const auto x = exchange_energy(sigma);
  const double ref = oracle_exchange(orbs, 60.0);
  CHECK(std::abs(x.value / ref - 1.0) < 1e-6);
  CHECK_FALSE(x.truncated);

  const auto cut = exchange_energy(sigma, 0);
  CHECK(cut.truncated);
  CHECK(cut.truncation_estimate > 0.0);
  CHECK(std::abs(cut.value + cut.truncation_estimate - x.value) < 1e-12);
}
