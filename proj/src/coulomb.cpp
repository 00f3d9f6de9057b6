#include "muellertf/coulomb.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mtf {

namespace {
constexpr double kFourPi = 4.0 * std::numbers::pi;
}

RadialFunction hartree_potential(const RadialFunction& f) {
  const auto& g = f.grid();
  const std::size_t n = g.size();
  std::vector<double> inner(n), outer(n), q(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g.node(i);
    inner[i] = kFourPi * r * r * f[i];
    outer[i] = kFourPi * r * f[i];
  }
  g.cumulative(inner, q, f.breakpoint());
  g.tail(outer, p, f.breakpoint());
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = q[i] / g.node(i) + p[i];
  return RadialFunction(f.grid_ptr(), std::move(v));
}

double coulomb_pairing(const RadialFunction& f, const RadialFunction& g) {
  return 0.5 * (integrate3d(f * hartree_potential(g)) + integrate3d(g * hartree_potential(f)));
}

double direct_energy(const RadialFunction& f) { return 0.5 * integrate3d(f * hartree_potential(f)); }

double angular_coefficient(int l1, int l2, int L) {
  if (l1 < 0 || l2 < 0 || L < 0) throw std::invalid_argument("angular_coefficient: negative order");
  if ((l1 + l2 + L) % 2 != 0 || L > l1 + l2 || L < std::abs(l1 - l2)) return 0.0;
  using Rule = boost::math::quadrature::gauss<double, 30>;
  if (l1 + l2 + L >= 2 * 30) throw std::invalid_argument("angular_coefficient: order too high");
  const double v = Rule::integrate(
      [&](double x) {
        return std::legendre(static_cast<unsigned>(l1), x) * std::legendre(static_cast<unsigned>(l2), x) *
               std::legendre(static_cast<unsigned>(L), x);
      },
      -1.0, 1.0);
  return 0.5 * v;
}

Multipole::Multipole(GridPtr grid, int L_max) : grid_(std::move(grid)), L_max_(L_max) {
  if (L_max < 0) throw std::invalid_argument("Multipole: negative L_max");
  const std::size_t n = grid_->size();
  pow_.assign(static_cast<std::size_t>(L_max) + 1, std::vector<double>(n));
  inv_pow_.assign(static_cast<std::size_t>(L_max) + 1, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double r = grid_->node(i);
    double p = 1.0;
    for (int L = 0; L <= L_max; ++L) {
      pow_[static_cast<std::size_t>(L)][i] = p;
      inv_pow_[static_cast<std::size_t>(L)][i] = 1.0 / (p * r);
      p *= r;
    }
  }
}

void Multipole::potential(std::span<const double> g, int L, std::span<double> out) const {
  if (L < 0 || L > L_max_) throw std::out_of_range("Multipole: order outside table");
  const std::size_t n = grid_->size();
  const auto& rp = pow_[static_cast<std::size_t>(L)];
  const auto& ri = inv_pow_[static_cast<std::size_t>(L)];
  std::vector<double> a(n), b(n), ca(n), cb(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rp[i] * g[i];
    b[i] = ri[i] * g[i];
  }
  grid_->cumulative(a, ca);
  grid_->tail(b, cb);
  for (std::size_t i = 0; i < n; ++i) out[i] = ri[i] * ca[i] + rp[i] * cb[i];
}

double Multipole::slater(std::span<const double> a, std::span<const double> b, int L) const {
  std::vector<double> y(grid_->size());
  potential(b, L, y);
  double acc = 0.0;
  const auto w = grid_->weights();
  for (std::size_t i = 0; i < y.size(); ++i) acc += w[i] * a[i] * y[i];
  return acc;
}

ExchangeResult exchange_energy(const ChannelDensityMatrix& sigma, int L_max, double tol) {
  ExchangeResult res;
  const int l_top = sigma.l_max();
  res.L_max = L_max < 0 ? 2 * l_top : L_max;
  if (sigma.empty()) return res;
  const Multipole mp(sigma.grid_ptr(), 2 * l_top);
  const std::size_t n = sigma.grid().size();
  std::vector<double> pair(n);
  double kept = 0.0, dropped = 0.0;
  const auto& chans = sigma.channels();
  for (std::size_t a = 0; a < chans.size(); ++a) {
    for (std::size_t b = a; b < chans.size(); ++b) {
      const Channel& ca = chans[a];
      const Channel& cb = chans[b];
      const double deg = static_cast<double>(ca.degeneracy() * cb.degeneracy()) * (a == b ? 1.0 : 2.0);
      for (std::size_t i = 0; i < ca.size(); ++i) {
        for (std::size_t j = (a == b ? i : 0); j < cb.size(); ++j) {
          const double s = ca.occupations[i] * cb.occupations[j];
          if (s == 0.0) continue;
          const double mult = (a == b && i != j) ? 2.0 : 1.0;
          const auto ui = ca.orbitals.col(static_cast<Eigen::Index>(i));
          const auto uj = cb.orbitals.col(static_cast<Eigen::Index>(j));
          for (std::size_t k = 0; k < n; ++k) pair[k] = ui(static_cast<Eigen::Index>(k)) * uj(static_cast<Eigen::Index>(k));
          for (int L = std::abs(ca.l - cb.l); L <= ca.l + cb.l; L += 2) {
            const double term = 0.5 * deg * mult * s * angular_coefficient(ca.l, cb.l, L) * mp.slater(pair, pair, L);
            (L <= res.L_max ? kept : dropped) += term;
          }
        }
      }
    }
  }
  res.value = kept;
  res.truncation_estimate = dropped;
  res.truncated = std::abs(dropped) > tol * std::max(std::abs(kept), 1e-300);
  return res;
}

}  // namespace mtf
