#include "muellertf/mueller.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "muellertf/io.hpp"
#include "muellertf/tf.hpp"

namespace mtf {

namespace {

constexpr double kPi = std::numbers::pi;

// Symmetric tridiagonal matrix on the first m nodes.
struct Tridiag {
  std::vector<double> diag;
  std::vector<double> off;
  /// diag minus the coupling parts, so uᵀTu = Σ −off (Δu)² + Σ site u².
  std::vector<double> site;
};

// P1 stiffness with u(0) = 0 and u(r_max) = 0 plus the centrifugal term
// integrated with the grid weights.
Tridiag kinetic_matrix(const RadialGrid& g, int l, std::size_t m) {
  Tridiag t;
  t.diag.resize(m);
  t.off.resize(m > 0 ? m - 1 : 0);
  t.site.resize(m);
  const auto w = g.weights();
  const double ll = l * (l + 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double r = g.node(i);
    const double h_prev = i == 0 ? r : r - g.node(i - 1);
    const double h_next = g.node(i + 1) - r;
    t.diag[i] = 1.0 / h_prev + 1.0 / h_next + ll * w[i] / (r * r);
    if (i + 1 < m) t.off[i] = -1.0 / h_next;
    t.site[i] = ll * w[i] / (r * r) + (i == 0 ? 1.0 / h_prev : 0.0) + (i + 1 == m ? 1.0 / h_next : 0.0);
  }
  return t;
}

// Solves (a T + diag(b)) x = rhs in place (Thomas algorithm).
void solve_shifted(const Tridiag& t, double a, std::span<const double> b, std::span<double> x) {
  const std::size_t m = t.diag.size();
  std::vector<double> c(m), d(m);
  double denom = a * t.diag[0] + b[0];
  c[0] = m > 1 ? a * t.off[0] / denom : 0.0;
  d[0] = x[0] / denom;
  for (std::size_t i = 1; i < m; ++i) {
    const double lo = a * t.off[i - 1];
    denom = a * t.diag[i] + b[i] - lo * c[i - 1];
    c[i] = i + 1 < m ? a * t.off[i] / denom : 0.0;
    d[i] = (x[i] - lo * d[i - 1]) / denom;
  }
  x[m - 1] = d[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
}

// Lowest k eigenvectors of T + diag(w v) in the weighted inner product.
Eigen::MatrixXd lowest_states(const Tridiag& t, std::span<const double> w, std::span<const double> v, double shift,
                              std::size_t n, int k) {
  const std::size_t m = t.diag.size();
  std::vector<double> d(m), e(m, 0.0), vals(m);
  // The operator is strongly graded near the origin; MRRR with the shift
  // below the spectrum (positive definite) keeps relative accuracy, where
  // bisection does not.
  for (std::size_t i = 0; i < m; ++i) d[i] = t.diag[i] / w[i] + v[i];
  for (std::size_t i = 0; i + 1 < m; ++i) e[i] = t.off[i] / std::sqrt(w[i] * w[i + 1]);
  for (std::size_t i = 0; i < m; ++i) d[i] -= shift;
  std::vector<double> z(m * static_cast<std::size_t>(k));
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(k));
  lapack_int found = 0;
  lapack_logical tryrac = 1;
  const lapack_int info = LAPACKE_dstemr(LAPACK_COL_MAJOR, 'V', 'I', static_cast<lapack_int>(m), d.data(), e.data(), 0.0,
                                         0.0, 1, k, &found, vals.data(), z.data(), static_cast<lapack_int>(m), k,
                                         support.data(), &tryrac);
  if (info != 0 || found != k) throw std::runtime_error("mueller: tridiagonal eigensolver failed");
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), k);
  for (int c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < m; ++i) {
      u(static_cast<Eigen::Index>(i), c) = z[static_cast<std::size_t>(c) * m + i] / std::sqrt(w[i]);
    }
    // Deterministic sign: positive near the origin.
    Eigen::Index big = 0;
    u.col(c).cwiseAbs().maxCoeff(&big);
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      if (std::abs(u(i, c)) > 1e-3 * std::abs(u(big, c))) {
        if (u(i, c) < 0.0) u.col(c) *= -1.0;
        break;
      }
    }
  }
  return u;
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

// Löwdin orthonormalization Y (YᵀWY)^{-1/2}.
void lowdin(Eigen::MatrixXd& y, const Eigen::VectorXd& w) {
  if (y.cols() == 0) return;
  const Eigen::MatrixXd s = y.transpose() * w.asDiagonal() * y;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  const Eigen::VectorXd inv = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  y = y * (es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
}

// ---------------------------------------------------------------------------
// Occupation sub-problem: f(n) = Σ d ε n + ½ nᵀJn − ½ sᵀMs, s = √n, over
// n_floor ≤ n ≤ 1, Σ d n = N. Convex; solved by projected Newton with an
// active set on the upper bound.

struct OccupationProblem {
  Eigen::VectorXd d, eps;
  Eigen::MatrixXd J, M;
  double N = 0.0;
  double floor = 1e-12;

  double value(const Eigen::VectorXd& n) const {
    const Eigen::VectorXd s = n.cwiseSqrt();
    return d.cwiseProduct(eps).dot(n) + 0.5 * n.dot(J * n) - 0.5 * s.dot(M * s);
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& n) const {
    const Eigen::VectorXd s = n.cwiseSqrt();
    const Eigen::VectorXd ms = M * s;
    return d.cwiseProduct(eps) + J * n - 0.5 * ms.cwiseQuotient(s);
  }
  Eigen::MatrixXd hessian(const Eigen::VectorXd& n) const {
    const Eigen::VectorXd s = n.cwiseSqrt();
    const Eigen::VectorXd ms = M * s;
    Eigen::MatrixXd h = J;
    const Eigen::Index k = n.size();
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (i == j) {
          h(i, i) += (ms(i) - M(i, i) * s(i)) / (4.0 * s(i) * s(i) * s(i));
        } else {
          h(i, j) -= M(i, j) / (4.0 * s(i) * s(j));
        }
      }
    }
    return h;
  }
};

struct OccupationSolution {
  Eigen::VectorXd n;
  double mu = 0.0;
  double residual = 0.0;
};

OccupationSolution solve_occupations(const OccupationProblem& p, Eigen::VectorXd n) {
  const Eigen::Index k = p.d.size();
  const double cap = p.d.sum();
  OccupationSolution out;
  if (p.N >= cap * (1.0 - 1e-15)) {
    out.n = Eigen::VectorXd::Ones(k);
    out.mu = (p.gradient(out.n).array() / p.d.array()).maxCoeff();
    return out;
  }
  bool feasible = n.size() == k && std::abs(p.d.dot(n) - p.N) <= 1e-12 * std::max(1.0, p.N);
  for (Eigen::Index i = 0; feasible && i < k; ++i) feasible = n(i) >= p.floor && n(i) <= 1.0;
  if (!feasible) n = Eigen::VectorXd::Constant(k, std::max(p.N / cap, p.floor));

  double f = p.value(n);
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd g = p.gradient(n);
    const Eigen::MatrixXd h = p.hessian(n);
    // +1 held at the upper bound, −1 at the floor, 0 free.
    std::vector<int> fixed(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (n(i) >= 1.0) fixed[static_cast<std::size_t>(i)] = 1;
      if (n(i) <= p.floor) fixed[static_cast<std::size_t>(i)] = -1;
    }
    Eigen::VectorXd step = Eigen::VectorXd::Zero(k);
    double lambda = 0.0;
    for (int pass = 0; pass <= k; ++pass) {
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < k; ++i)
        if (fixed[static_cast<std::size_t>(i)] == 0) free.push_back(i);
      const auto nf = static_cast<Eigen::Index>(free.size());
      step.setZero();
      if (nf == 0) {
        lambda = (g.array() / p.d.array()).maxCoeff();
        break;
      }
      // Symmetric diagonal scaling: near the floor the curvature grows like
      // n^{-3/2} and the unscaled system loses the small rows.
      Eigen::VectorXd sc(nf + 1);
      for (Eigen::Index a = 0; a < nf; ++a) sc(a) = 1.0 / std::sqrt(std::abs(h(free[a], free[a])) + 1e-300);
      sc(nf) = 1.0;
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + 1, nf + 1);
      Eigen::VectorXd rhs(nf + 1);
      for (Eigen::Index a = 0; a < nf; ++a) {
        for (Eigen::Index b = 0; b < nf; ++b) kkt(a, b) = sc(a) * h(free[a], free[b]) * sc(b);
        kkt(a, a) += 1e-14;
        kkt(a, nf) = kkt(nf, a) = sc(a) * p.d(free[a]);
        rhs(a) = -sc(a) * g(free[a]);
      }
      rhs(nf) = 0.0;
      const double cs = 1.0 / std::max(kkt.col(nf).head(nf).cwiseAbs().maxCoeff(), 1e-300);
      kkt.col(nf) *= cs;
      kkt.row(nf) *= cs;
      sc(nf) = cs;
      const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs).cwiseProduct(sc);
      for (Eigen::Index a = 0; a < nf; ++a) step(free[a]) = sol(a);
      lambda = -sol(nf);
      // Keep the step exactly on the trace hyperplane.
      double drift = 0.0, mass = 0.0;
      for (Eigen::Index a = 0; a < nf; ++a) {
        drift += p.d(free[a]) * step(free[a]);
        mass += p.d(free[a]) * n(free[a]);
      }
      for (Eigen::Index a = 0; a < nf; ++a) step(free[a]) -= drift * n(free[a]) / mass;
      bool released = false;
      for (Eigen::Index i = 0; i < k; ++i) {
        const int side = fixed[static_cast<std::size_t>(i)];
        if (side * (g(i) - lambda * p.d(i)) > 0.0) {
          fixed[static_cast<std::size_t>(i)] = 0;
          released = true;
        }
      }
      if (!released) break;
    }
    double res = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double r = (g(i) - lambda * p.d(i)) / p.d(i);
      const int side = fixed[static_cast<std::size_t>(i)];
      res = std::max(res, side != 0 ? std::max(side * r, 0.0) : std::abs(r));
    }
    out.mu = lambda;
    out.residual = res;
    const double scale = std::max(1.0, std::abs(lambda));
    if (res <= 1e-13 * scale || step.cwiseAbs().maxCoeff() <= 1e-16) break;

    double alpha = 1.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (step(i) > 0.0) alpha = std::min(alpha, (1.0 - n(i)) / step(i));
      if (step(i) < 0.0) alpha = std::min(alpha, 0.9 * (n(i) - p.floor) / -step(i));
    }
    const double slope = g.dot(step);
    Eigen::VectorXd trial;
    double ft = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = n + alpha * step;
      for (Eigen::Index i = 0; i < k; ++i) trial(i) = std::clamp(trial(i), p.floor, 1.0);
      ft = p.value(trial);
      if (ft <= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    n = trial;
    f = ft;
  }
  out.n = n;
  return out;
}

// ---------------------------------------------------------------------------
// Minimizer state for one (Z, grid, ℓ_max, k_max).

struct Orbital {
  std::size_t channel = 0;
  Eigen::Index col = 0;
  int l = 0;
  double d = 1.0;
};

struct PairTerm {
  std::size_t a = 0;
  std::size_t b = 0;
  int L = 0;
  double coef = 0.0;  // d_a d_b (ℓ_a ℓ_b L; 000)²
  std::vector<double> Y;
};

class Solver {
 public:
  Solver(GridPtr grid, double Z, int l_max, int k_max)
      : grid_(std::move(grid)), Z_(Z), l_max_(l_max), k_max_(k_max), n_(grid_->size()), m_(n_ - 1),
        mp_(grid_, 2 * l_max) {
    const auto w = grid_->weights();
    w_ = Eigen::VectorXd(as_vector(w));
    vext_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) vext_[i] = -Z_ / grid_->node(i);
    for (int l = 0; l <= l_max_; ++l) {
      kin_.push_back(kinetic_matrix(*grid_, l, m_));
      for (int k = 0; k < k_max_; ++k) orbs_.push_back({static_cast<std::size_t>(l), k, l, 2.0 * l + 1.0});
    }
    const std::size_t K = orbs_.size();
    for (std::size_t a = 0; a < K; ++a) {
      for (std::size_t b = a; b < K; ++b) {
        const int la = orbs_[a].l, lb = orbs_[b].l;
        for (int L = std::abs(la - lb); L <= la + lb; L += 2) {
          const double ang = angular_coefficient(la, lb, L);
          if (ang == 0.0) continue;
          terms_.push_back({a, b, L, orbs_[a].d * orbs_[b].d * ang, std::vector<double>(n_)});
        }
      }
    }
    d_.resize(static_cast<Eigen::Index>(K));
    for (std::size_t a = 0; a < K; ++a) d_(static_cast<Eigen::Index>(a)) = orbs_[a].d;
  }

  std::size_t size() const { return orbs_.size(); }
  double capacity() const { return d_.sum(); }

  // Lowest states of −Δ plus a TF-screened potential for N electrons.
  void initial_orbitals(double N) {
    const auto tf = solve_tf(Z_, RadialGrid::logarithmic(grid_->node(0), std::max(1e5, grid_->r_max()), 2000));
    const auto& tg = tf.grid();
    std::vector<double> u(tg.size());
    for (std::size_t i = 0; i < tg.size(); ++i) u[i] = tg.node(i) * tf.phi.values()[i];
    std::vector<double> v(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      const double r = grid_->node(i);
      const double screening = (Z_ - tg.interpolate(u, r)) / r;
      v[i] = vext_[i] + std::min(N / Z_, 1.0) * screening;
    }
    U_.clear();
    for (int l = 0; l <= l_max_; ++l)
      U_.push_back(lowest_states(kin_[static_cast<std::size_t>(l)], grid_->weights(), v, -Z_ * Z_ - 1.0, n_, k_max_));
  }

  void warm_orbitals(const ChannelDensityMatrix& warm, double N) {
    initial_orbitals(N);
    for (int l = 0; l <= l_max_; ++l) {
      const Channel* c = warm.find(l);
      if (!c) continue;
      Eigen::MatrixXd& u = U_[static_cast<std::size_t>(l)];
      const Eigen::Index take = std::min<Eigen::Index>(c->orbitals.cols(), k_max_);
      u.leftCols(take) = c->orbitals.leftCols(take);
      u.row(static_cast<Eigen::Index>(n_ - 1)).setZero();
      // Gram-Schmidt in order, so the warm columns stay as they are.
      for (Eigen::Index j = 0; j < u.cols(); ++j) {
        for (Eigen::Index i = 0; i < j; ++i) u.col(j) -= u.col(i).dot(w_.cwiseProduct(u.col(j))) * u.col(i);
        u.col(j) /= std::sqrt(u.col(j).dot(w_.cwiseProduct(u.col(j))));
      }
    }
  }

  const std::vector<Eigen::MatrixXd>& orbitals() const { return U_; }

  Eigen::VectorXd column(const std::vector<Eigen::MatrixXd>& U, std::size_t a) const {
    return U[orbs_[a].channel].col(orbs_[a].col);
  }

  // Pair potentials, one-body energies and the J, M matrices for U.
  struct Cache {
    std::vector<std::vector<double>> Y;  // per term
    Eigen::VectorXd eps;
    Eigen::MatrixXd J, M;
  };

  void fill(const std::vector<Eigen::MatrixXd>& U, Cache& c) const {
    const std::size_t K = orbs_.size();
    c.Y.resize(terms_.size());
    c.eps.resize(static_cast<Eigen::Index>(K));
    c.J.setZero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    c.M.setZero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    std::vector<const double*> col(K);
    for (std::size_t a = 0; a < K; ++a) col[a] = U[orbs_[a].channel].col(orbs_[a].col).data();
    for (std::size_t a = 0; a < K; ++a) {
      const auto& t = kin_[static_cast<std::size_t>(orbs_[a].l)];
      const double* u = col[a];
      double kin = 0.0, pot = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        kin += t.site[i] * u[i] * u[i];
        if (i + 1 < m_) kin -= t.off[i] * (u[i + 1] - u[i]) * (u[i + 1] - u[i]);
        pot += w_(static_cast<Eigen::Index>(i)) * vext_[i] * u[i] * u[i];
      }
      c.eps(static_cast<Eigen::Index>(a)) = kin + pot;
    }
    std::vector<double> pair(n_);
    std::vector<std::size_t> self_term(K, terms_.size());
    for (std::size_t t = 0; t < terms_.size(); ++t) {
      const auto& term = terms_[t];
      const double* ua = col[term.a];
      const double* ub = col[term.b];
      for (std::size_t i = 0; i < n_; ++i) pair[i] = ua[i] * ub[i];
      c.Y[t].resize(n_);
      mp_.potential(pair, term.L, c.Y[t]);
      double r = 0.0;
      for (std::size_t i = 0; i < n_; ++i) r += w_(static_cast<Eigen::Index>(i)) * pair[i] * c.Y[t][i];
      const auto a = static_cast<Eigen::Index>(term.a), b = static_cast<Eigen::Index>(term.b);
      c.M(a, b) += term.coef * r;
      if (a != b) c.M(b, a) += term.coef * r;
      if (term.a == term.b && term.L == 0) self_term[term.a] = t;
    }
    for (std::size_t b = 0; b < K; ++b) {
      const auto& y = c.Y[self_term[b]];
      for (std::size_t a = 0; a < K; ++a) {
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += w_(static_cast<Eigen::Index>(i)) * col[a][i] * col[a][i] * y[i];
        c.J(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = orbs_[a].d * orbs_[b].d * s;
      }
    }
    self_term_ = self_term;
  }

  OccupationProblem occupation_problem(const Cache& c, double N, double floor) const {
    OccupationProblem p;
    p.d = d_;
    p.eps = c.eps;
    p.J = 0.5 * (c.J + c.J.transpose());
    p.M = c.M;
    p.N = N;
    p.floor = floor;
    return p;
  }

  double energy(const Cache& c, const Eigen::VectorXd& occ) const {
    const Eigen::VectorXd s = occ.cwiseSqrt();
    return d_.cwiseProduct(c.eps).dot(occ) + 0.5 * occ.dot(c.J * occ) - 0.5 * s.dot(c.M * s);
  }

  // Euclidean gradient with respect to the orbital node values at fixed
  // occupations.
  std::vector<Eigen::MatrixXd> gradient(const std::vector<Eigen::MatrixXd>& U, const Cache& c,
                                        const Eigen::VectorXd& occ) const {
    const std::size_t K = orbs_.size();
    std::vector<Eigen::MatrixXd> G;
    for (const auto& u : U) G.push_back(Eigen::MatrixXd::Zero(u.rows(), u.cols()));
    std::vector<double> vh(n_, 0.0);
    for (std::size_t b = 0; b < K; ++b) {
      const double f = orbs_[b].d * occ(static_cast<Eigen::Index>(b));
      const auto& y = c.Y[self_term_[b]];
      for (std::size_t i = 0; i < n_; ++i) vh[i] += f * y[i];
    }
    for (std::size_t a = 0; a < K; ++a) {
      const auto& o = orbs_[a];
      const double f = 2.0 * o.d * occ(static_cast<Eigen::Index>(a));
      const auto& t = kin_[static_cast<std::size_t>(o.l)];
      const auto u = U[o.channel].col(o.col);
      auto g = G[o.channel].col(o.col);
      for (std::size_t i = 0; i < m_; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        double au = t.diag[i] * u(ii);
        if (i > 0) au += t.off[i - 1] * u(ii - 1);
        if (i + 1 < m_) au += t.off[i] * u(ii + 1);
        g(ii) = f * (au + w_(ii) * (vext_[i] + vh[i]) * u(ii));
      }
    }
    const Eigen::VectorXd s = occ.cwiseSqrt();
    for (std::size_t t = 0; t < terms_.size(); ++t) {
      const auto& term = terms_[t];
      const double f = 2.0 * term.coef * s(static_cast<Eigen::Index>(term.a)) * s(static_cast<Eigen::Index>(term.b));
      const auto& oa = orbs_[term.a];
      const auto& ob = orbs_[term.b];
      const auto ua = U[oa.channel].col(oa.col);
      const auto ub = U[ob.channel].col(ob.col);
      auto ga = G[oa.channel].col(oa.col);
      const auto& y = c.Y[t];
      if (term.a == term.b) {
        for (std::size_t i = 0; i < m_; ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          ga(ii) -= f * w_(ii) * y[i] * ub(ii);
        }
      } else {
        auto gb = G[ob.channel].col(ob.col);
        for (std::size_t i = 0; i < m_; ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          const double wy = f * w_(ii) * y[i];
          ga(ii) -= wy * ub(ii);
          gb(ii) -= wy * ua(ii);
        }
      }
    }
    return G;
  }

  // Removes the Lagrange-multiplier part W U sym(UᵀG), leaving the
  // Riemannian gradient as a covector.
  std::vector<Eigen::MatrixXd> covector(const std::vector<Eigen::MatrixXd>& U,
                                        const std::vector<Eigen::MatrixXd>& G) const {
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t ch = 0; ch < U.size(); ++ch) {
      const Eigen::MatrixXd lam = U[ch].transpose() * G[ch];
      out.push_back(G[ch] - w_.asDiagonal() * U[ch] * (0.5 * (lam + lam.transpose())));
    }
    return out;
  }

  // V − U sym(UᵀWV): tangent vectors of UᵀWU = I.
  void tangent(const std::vector<Eigen::MatrixXd>& U, std::vector<Eigen::MatrixXd>& V) const {
    for (std::size_t ch = 0; ch < U.size(); ++ch) {
      const Eigen::MatrixXd p = U[ch].transpose() * w_.asDiagonal() * V[ch];
      V[ch] -= U[ch] * (0.5 * (p + p.transpose()));
    }
  }

  // Column-wise (2d (n A + (nσ + √n Z) W))⁻¹, a model of the orbital
  // Hessian. The √n term keeps nearly empty orbitals moving.
  std::vector<Eigen::MatrixXd> precondition(const std::vector<Eigen::MatrixXd>& C, const Eigen::VectorXd& occ,
                                            double /*n_floor*/) const {
    std::vector<Eigen::MatrixXd> out;
    const double sigma = 0.25 * Z_ * Z_;
    std::vector<double> shift(m_), rhs(m_);
    for (std::size_t ch = 0; ch < C.size(); ++ch) {
      Eigen::MatrixXd x = Eigen::MatrixXd::Zero(C[ch].rows(), C[ch].cols());
      for (Eigen::Index k = 0; k < C[ch].cols(); ++k) {
        const std::size_t a = ch * static_cast<std::size_t>(k_max_) + static_cast<std::size_t>(k);
        const double na = occ(static_cast<Eigen::Index>(a));
        const double coef = na * sigma + std::sqrt(na) * Z_;
        for (std::size_t i = 0; i < m_; ++i) {
          shift[i] = coef * w_(static_cast<Eigen::Index>(i));
          rhs[i] = C[ch](static_cast<Eigen::Index>(i), k) / (2.0 * orbs_[a].d);
        }
        solve_shifted(kin_[static_cast<std::size_t>(orbs_[a].l)], na, shift, rhs);
        for (std::size_t i = 0; i < m_; ++i) x(static_cast<Eigen::Index>(i), k) = rhs[i];
      }
      out.push_back(std::move(x));
    }
    return out;
  }

  std::vector<Eigen::MatrixXd> retract(const std::vector<Eigen::MatrixXd>& U, const std::vector<Eigen::MatrixXd>& D,
                                       double alpha) const {
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t ch = 0; ch < U.size(); ++ch) {
      Eigen::MatrixXd y = U[ch] + alpha * D[ch];
      lowdin(y, w_);
      out.push_back(std::move(y));
    }
    return out;
  }

  void set_orbitals(std::vector<Eigen::MatrixXd> U) { U_ = std::move(U); }

  ChannelDensityMatrix gamma(const Eigen::VectorXd& occ) const {
    ChannelDensityMatrix g(grid_);
    for (int l = 0; l <= l_max_; ++l) {
      std::vector<double> n;
      for (std::size_t a = 0; a < orbs_.size(); ++a)
        if (orbs_[a].l == l) n.push_back(std::clamp(occ(static_cast<Eigen::Index>(a)), 0.0, 1.0));
      g.add_channel(l, U_[static_cast<std::size_t>(l)], std::move(n));
    }
    return g;
  }

  Eigen::VectorXd occupations_of(const ChannelDensityMatrix& g) const {
    Eigen::VectorXd occ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(orbs_.size()));
    for (std::size_t a = 0; a < orbs_.size(); ++a) {
      const Channel* c = g.find(orbs_[a].l);
      if (c && static_cast<std::size_t>(orbs_[a].col) < c->size()) {
        occ(static_cast<Eigen::Index>(a)) = c->occupations[static_cast<std::size_t>(orbs_[a].col)];
      }
    }
    return occ;
  }

 private:
  GridPtr grid_;
  double Z_;
  int l_max_, k_max_;
  std::size_t n_, m_;
  Multipole mp_;
  Eigen::VectorXd w_, d_;
  std::vector<double> vext_;
  std::vector<Tridiag> kin_;
  std::vector<Orbital> orbs_;
  std::vector<PairTerm> terms_;
  mutable std::vector<std::size_t> self_term_;
  std::vector<Eigen::MatrixXd> U_;
};

double dot(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i].array() * b[i].array()).sum();
  return s;
}

void axpy(double c, const std::vector<Eigen::MatrixXd>& x, std::vector<Eigen::MatrixXd>& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

double tail_fraction(const ChannelDensityMatrix& g, double N) {
  if (N <= 0.0) return 0.0;
  const auto& grid = g.grid();
  return integrate3d(density_of(g), 0.5 * grid.r_max(), grid.r_max()) / N;
}

// Nodal derivative by nonuniform three-point differences.
std::vector<double> derivative(const RadialFunction& f) {
  const auto& g = f.grid();
  const std::size_t n = g.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || i + 1 == n) {
      const std::size_t a = i == 0 ? 0 : n - 2;
      d[i] = (f[a + 1] - f[a]) / (g.node(a + 1) - g.node(a));
      continue;
    }
    const double hm = g.node(i) - g.node(i - 1);
    const double hp = g.node(i + 1) - g.node(i);
    d[i] = (hm * hm * f[i + 1] - hp * hp * f[i - 1] + (hp * hp - hm * hm) * f[i]) / (hm * hp * (hm + hp));
  }
  return d;
}

void check_partition(const RadialFunction& chi1, const RadialFunction& chi2) {
  if (chi1.size() != chi2.size()) throw std::invalid_argument("partition: grid mismatch");
  for (std::size_t i = 0; i < chi1.size(); ++i) {
    if (std::abs(chi1[i] * chi1[i] + chi2[i] * chi2[i] - 1.0) > 1e-10) {
      throw std::invalid_argument("partition: chi1^2 + chi2^2 != 1");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

void MuellerOptions::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("MuellerOptions: " + m); };
  if (l_max < 0 || l_max > 6) fail("l_max must be in [0, 6]");
  if (k_max < 1 || k_max > 12) fail("k_max must be in [1, 12]");
  if (!(grid_r_min > 0.0) || !(grid_r_max > grid_r_min) || grid_n < 64) fail("bad grid");
  if (!(tol > 0.0) || max_iter < 1) fail("bad tolerance or iteration budget");
  if (!(n_floor > 0.0 && n_floor < 1e-3)) fail("n_floor must be in (0, 1e-3)");
  if (!(mu_tol > 0.0) || !(dN > 0.0) || flat_points < 1) fail("bad sweep parameters");
  if (sweep_start < 0.0 || sweep_max < 0.0) fail("negative sweep range");
}

double MuellerOptions::capacity() const {
  double c = 0.0;
  for (int l = 0; l <= l_max; ++l) c += (2.0 * l + 1.0) * k_max;
  return c;
}

GridPtr mueller_grid(double Z, const MuellerOptions& opts) {
  return RadialGrid::logarithmic(opts.grid_r_min / Z, opts.grid_r_max, opts.grid_n);
}

double radial_kinetic(const RadialGrid& grid, int l, const Eigen::Ref<const Eigen::VectorXd>& u) {
  const std::size_t n = grid.size();
  const auto w = grid.weights();
  double t = u(0) * u(0) / grid.node(0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double du = u(static_cast<Eigen::Index>(i + 1)) - u(static_cast<Eigen::Index>(i));
    t += du * du / (grid.node(i + 1) - grid.node(i));
  }
  if (l > 0) {
    const double ll = l * (l + 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = grid.node(i);
      t += ll * w[i] * u(static_cast<Eigen::Index>(i)) * u(static_cast<Eigen::Index>(i)) / (r * r);
    }
  }
  return t;
}

double kinetic_energy(const ChannelDensityMatrix& gamma) {
  double kin = 0.0;
  for (const auto& c : gamma.channels()) {
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double f = c.degeneracy() * c.occupations[k];
      if (f != 0.0) kin += f * radial_kinetic(gamma.grid(), c.l, c.orbitals.col(static_cast<Eigen::Index>(k)));
    }
  }
  return kin;
}

EnergyBreakdown evaluate(const ChannelDensityMatrix& gamma, double Z) {
  if (gamma.empty()) return {};
  const auto& g = gamma.grid();
  const auto w = g.weights();
  double kin = 0.0, ext = 0.0;
  for (const auto& c : gamma.channels()) {
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double f = c.degeneracy() * c.occupations[k];
      if (f == 0.0) continue;
      const auto u = c.orbitals.col(static_cast<Eigen::Index>(k));
      kin += f * radial_kinetic(g, c.l, u);
      double e = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) e += w[i] * u(static_cast<Eigen::Index>(i)) * u(static_cast<Eigen::Index>(i)) / g.node(i);
      ext -= Z * f * e;
    }
  }
  if (!std::isfinite(kin)) throw std::domain_error("evaluate: kinetic energy is not finite");
  const double dir = direct_energy(density_of(gamma));
  const double ex = exchange_energy(sqrt_gamma(gamma)).value;
  return EnergyBreakdown::from_terms(kin, ext, dir, ex);
}

double optimize_occupations(ChannelDensityMatrix& gamma, double Z, double N, double n_floor) {
  // Reuse the solver's cache on the channels present.
  int l_max = gamma.l_max();
  std::size_t k_max = 0;
  for (const auto& c : gamma.channels()) k_max = std::max(k_max, c.size());
  if (k_max == 0) throw std::invalid_argument("optimize_occupations: empty density matrix");
  for (int l = 0; l <= l_max; ++l) {
    const Channel* c = gamma.find(l);
    if (!c || c->size() != k_max) throw std::invalid_argument("optimize_occupations: channels must be complete and equal in size");
  }
  Solver s(gamma.grid_ptr(), Z, l_max, static_cast<int>(k_max));
  if (N > s.capacity()) throw std::invalid_argument("optimize_occupations: N exceeds capacity");
  std::vector<Eigen::MatrixXd> U;
  for (const auto& c : gamma.channels()) U.push_back(c.orbitals);
  Solver::Cache cache;
  s.fill(U, cache);
  const auto sol = solve_occupations(s.occupation_problem(cache, N, n_floor), Eigen::VectorXd());
  s.set_orbitals(U);
  gamma = s.gamma(sol.n);
  return sol.mu;
}

MuellerResult minimize(double Z, double N, const MuellerOptions& opts, const ChannelDensityMatrix* warm) {
  opts.validate();
  if (!(Z > 0.0) || !std::isfinite(Z)) throw std::invalid_argument("minimize: Z must be positive");
  if (!(N > 0.0) || !std::isfinite(N)) throw std::invalid_argument("minimize: N must be positive");
  if (N > opts.capacity()) throw std::invalid_argument("minimize: N exceeds the capacity of the channel ansatz");
  GridPtr grid = warm ? warm->grid_ptr() : mueller_grid(Z, opts);
  Solver s(grid, Z, opts.l_max, opts.k_max);
  if (warm) {
    s.warm_orbitals(*warm, N);
  } else {
    s.initial_orbitals(N);
  }
  std::vector<Eigen::MatrixXd> U = s.orbitals();
  Solver::Cache cache, trial_cache;
  s.fill(U, cache);
  auto occ = solve_occupations(s.occupation_problem(cache, N, opts.n_floor), Eigen::VectorXd());

  MuellerResult res;
  res.Z = Z;
  res.N = N;
  double E = s.energy(cache, occ.n);
  res.energy_history.push_back(E);
  // Riemannian L-BFGS on F(U) = min_n 𝓔(U, n); by the envelope theorem the
  // orbital gradient at the optimal occupations is the gradient of F.
  struct Pair {
    std::vector<Eigen::MatrixXd> s, y;
    double rho;
  };
  std::deque<Pair> memory;
  constexpr std::size_t kMemory = 12;
  auto grad = s.covector(U, s.gradient(U, cache, occ.n));
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    auto pg = s.precondition(grad, occ.n, opts.n_floor);
    res.stationarity = std::sqrt(std::max(dot(grad, pg), 0.0)) + occ.residual;
    if (res.stationarity <= opts.tol) {
      res.converged = true;
      break;
    }
    std::vector<Eigen::MatrixXd> dir;
    double slope = 0.0;
    for (int attempt = 0; attempt < 2; ++attempt) {
      auto q = grad;
      std::vector<double> coef(memory.size());
      for (std::size_t j = memory.size(); j-- > 0;) {
        coef[j] = memory[j].rho * dot(memory[j].s, q);
        axpy(-coef[j], memory[j].y, q);
      }
      dir = s.precondition(q, occ.n, opts.n_floor);
      for (std::size_t j = 0; j < memory.size(); ++j) {
        const double b = memory[j].rho * dot(memory[j].y, dir);
        axpy(coef[j] - b, memory[j].s, dir);
      }
      for (auto& d : dir) d = -d;
      s.tangent(U, dir);
      slope = dot(grad, dir);
      if (slope < 0.0) break;
      memory.clear();
    }
    if (!(slope < 0.0)) break;
    double alpha = 1.0;
    bool accepted = false;
    std::vector<Eigen::MatrixXd> trial;
    OccupationSolution trial_occ;
    double trial_E = E;
    for (int ls = 0; ls < 40; ++ls) {
      trial = s.retract(U, dir, alpha);
      s.fill(trial, trial_cache);
      trial_occ = solve_occupations(s.occupation_problem(trial_cache, N, opts.n_floor), occ.n);
      trial_E = s.energy(trial_cache, trial_occ.n);
      // Below the rounding level of E the Armijo test is noise; plain decrease
      // keeps the history monotone.
      const bool noise = -alpha * slope < 1e-12 * std::abs(E);
      if (trial_E <= E + 1e-4 * alpha * slope || (noise && trial_E <= E)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (memory.empty()) break;
      memory.clear();
      continue;
    }
    auto new_grad = s.covector(trial, s.gradient(trial, trial_cache, trial_occ.n));
    Pair pr;
    pr.s = dir;
    for (auto& v : pr.s) v *= alpha;
    s.tangent(trial, pr.s);
    pr.y = new_grad;
    axpy(-1.0, s.covector(trial, grad), pr.y);
    const double sy = dot(pr.s, pr.y);
    for (auto& m : memory) {
      s.tangent(trial, m.s);
      m.y = s.covector(trial, m.y);
    }
    if (sy > 1e-14 * std::sqrt(dot(pr.s, pr.s) * dot(pr.y, pr.y))) {
      pr.rho = 1.0 / sy;
      memory.push_back(std::move(pr));
      if (memory.size() > kMemory) memory.pop_front();
    }
    U = std::move(trial);
    std::swap(cache, trial_cache);
    occ = trial_occ;
    grad = std::move(new_grad);
    E = trial_E;
    res.energy_history.push_back(E);
  }
  res.iterations = it;
  s.set_orbitals(U);
  res.gamma = s.gamma(occ.n);
  res.chemical_potential = occ.mu;
  res.breakdown = evaluate(res.gamma, Z);
  res.tail_mass_fraction = tail_fraction(res.gamma, N);
  return res;
}

double chemical_potential(double Z, double N, const MuellerOptions& opts) {
  const double h = opts.dN;
  const auto hi = minimize(Z, N + h, opts);
  if (!hi.converged) throw SweepError("chemical_potential: minimization at N+h did not converge");
  double lo_N = N - h, lo_E = 0.0;
  if (lo_N > 0.0) {
    const auto lo = minimize(Z, lo_N, opts);
    if (!lo.converged) throw SweepError("chemical_potential: minimization at N-h did not converge");
    lo_E = lo.breakdown.total;
  } else {
    lo_N = 0.0;
  }
  return (std::min(hi.breakdown.total, lo_E) - lo_E) / (N + h - lo_N);
}

IonizationSweep ionization_sweep(double Z, const MuellerOptions& opts,
                                 const std::function<void(const SweepPoint&)>& progress) {
  opts.validate();
  if (!(Z > 0.0)) throw std::invalid_argument("ionization_sweep: Z must be positive");
  IonizationSweep sw;
  sw.Z = Z;
  sw.mu_tol = opts.mu_tol;
  sw.dN = opts.dN;
  sw.l_max = opts.l_max;
  sw.k_max = opts.k_max;
  const double h = opts.dN;
  const double start = opts.sweep_start > 0.0 ? opts.sweep_start : std::max(h, h * std::round((Z - 0.5) / h));
  double top = opts.sweep_max > 0.0 ? opts.sweep_max : 2.0 * Z + 4.0 * (std::cbrt(Z * Z) + 1.0);
  top = std::min(top, opts.capacity());
  const int count = static_cast<int>(std::floor((top - start) / h + 1e-9)) + 1;
  if (count < 3) throw std::invalid_argument("ionization_sweep: sweep range too short");

  // One point below the start supplies the first central difference.
  std::vector<SweepPoint> pts;
  const ChannelDensityMatrix* warm = nullptr;
  MuellerResult prev;
  auto run = [&](double N) {
    SweepPoint p;
    p.N = N;
    if (N <= 0.0) {
      p.converged = true;
      return p;
    }
    MuellerResult r = minimize(Z, N, opts, warm);
    p.energy = r.breakdown.total;
    p.envelope = pts.empty() ? p.energy : std::min(p.energy, pts.back().envelope);
    p.multiplier = r.chemical_potential;
    p.converged = r.converged;
    p.iterations = r.iterations;
    p.tail_mass_fraction = r.tail_mass_fraction;
    prev = std::move(r);
    warm = &prev.gamma;
    return p;
  };
  pts.push_back(run(start - h));
  int flat = 0;
  sw.all_converged = pts.front().converged;
  for (int k = 0; k < count; ++k) {
    pts.push_back(run(start + k * h));
    sw.all_converged = sw.all_converged && pts.back().converged;
    const std::size_t j = pts.size() - 1;
    if (j >= 2) {
      auto& mid = pts[j - 1];
      mid.mu = (pts[j].envelope - pts[j - 2].envelope) / (2.0 * h);
      mid.raw_mu = (pts[j].energy - pts[j - 2].energy) / (2.0 * h);
      if (j - 1 >= 1) {
        sw.points.push_back(mid);
        if (progress) progress(mid);
      }
      flat = mid.mu >= -opts.mu_tol ? flat + 1 : 0;
      if (flat >= opts.flat_points) {
        sw.reached_flat = true;
        break;
      }
    }
  }
  double nc = 0.0;
  for (const auto& p : sw.points)
    if (p.mu < -opts.mu_tol) nc = p.N;
  sw.N_c = nc;
  return sw;
}

double critical_electron_number(double Z, const MuellerOptions& opts) {
  const auto sw = ionization_sweep(Z, opts);
  if (!sw.reached_flat) {
    throw SweepError("critical_electron_number: sweep did not reach flatness (increase r_max or the N range)");
  }
  return sw.N_c;
}

ChannelDensityMatrix localize(const ChannelDensityMatrix& gamma, const RadialFunction& chi) {
  if (chi.size() != gamma.grid().size()) throw std::invalid_argument("localize: grid mismatch");
  ChannelDensityMatrix out(gamma.grid_ptr());
  const auto w = gamma.grid().weights();
  const Eigen::Map<const Eigen::VectorXd> x(chi.values().data(), static_cast<Eigen::Index>(chi.size()));
  for (const auto& c : gamma.channels()) {
    Eigen::MatrixXd a = x.asDiagonal() * c.orbitals;
    for (std::size_t k = 0; k < c.size(); ++k) a.col(static_cast<Eigen::Index>(k)) *= std::sqrt(c.occupations[k]);
    Channel loc = channel_from_factor(c.l, a, w);
    for (double& n : loc.occupations) n = std::min(n, 1.0);
    out.add_channel(c.l, std::move(loc.orbitals), std::move(loc.occupations));
  }
  return out;
}

ChannelDensityMatrix convex_combination(const ChannelDensityMatrix& a, const ChannelDensityMatrix& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("convex_combination: t outside [0,1]");
  if (a.grid_ptr() != b.grid_ptr()) throw std::invalid_argument("convex_combination: grids differ");
  ChannelDensityMatrix out(a.grid_ptr());
  const auto w = a.grid().weights();
  const int l_top = std::max(a.l_max(), b.l_max());
  const auto rows = static_cast<Eigen::Index>(a.grid().size());
  for (int l = 0; l <= l_top; ++l) {
    const Channel* ca = a.find(l);
    const Channel* cb = b.find(l);
    const Eigen::Index ka = ca ? static_cast<Eigen::Index>(ca->size()) : 0;
    const Eigen::Index kb = cb ? static_cast<Eigen::Index>(cb->size()) : 0;
    if (ka + kb == 0) continue;
    Eigen::MatrixXd f(rows, ka + kb);
    for (Eigen::Index k = 0; k < ka; ++k) f.col(k) = ca->orbitals.col(k) * std::sqrt(t * ca->occupations[static_cast<std::size_t>(k)]);
    for (Eigen::Index k = 0; k < kb; ++k)
      f.col(ka + k) = cb->orbitals.col(k) * std::sqrt((1.0 - t) * cb->occupations[static_cast<std::size_t>(k)]);
    Channel c = channel_from_factor(l, f, w);
    for (double& n : c.occupations) n = std::min(n, 1.0);
    out.add_channel(l, std::move(c.orbitals), std::move(c.occupations));
  }
  return out;
}

std::pair<RadialFunction, RadialFunction> radial_partition(const GridPtr& grid, double r, double width) {
  if (!(r > 0.0) || width < 0.0) throw std::invalid_argument("radial_partition: need r > 0 and width >= 0");
  auto theta = [=](double x) {
    if (width == 0.0) return x < r ? 0.0 : 0.5 * kPi;
    const double t = std::clamp((x - (r - 0.5 * width)) / width, 0.0, 1.0);
    return 0.5 * kPi * t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
  };
  const double bp = width == 0.0 ? r : 0.0;
  auto c1 = RadialFunction::sample(grid, [&](double x) { return std::cos(theta(x)); }, bp);
  auto c2 = RadialFunction::sample(grid, [&](double x) { return std::sin(theta(x)); }, bp);
  return {c1, c2};
}

double ims_defect(const ChannelDensityMatrix& gamma, const RadialFunction& chi1, const RadialFunction& chi2) {
  check_partition(chi1, chi2);
  const auto& g = gamma.grid();
  if (chi1.size() != g.size()) throw std::invalid_argument("ims_defect: grid mismatch");
  const auto w = g.weights();
  const auto d1 = derivative(chi1);
  const auto d2 = derivative(chi2);
  const Eigen::Map<const Eigen::VectorXd> x1(chi1.values().data(), static_cast<Eigen::Index>(chi1.size()));
  const Eigen::Map<const Eigen::VectorXd> x2(chi2.values().data(), static_cast<Eigen::Index>(chi2.size()));
  double defect = 0.0;
  for (const auto& c : gamma.channels()) {
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double f = c.degeneracy() * c.occupations[k];
      if (f == 0.0) continue;
      const Eigen::VectorXd u = c.orbitals.col(static_cast<Eigen::Index>(k));
      const Eigen::VectorXd u1 = x1.cwiseProduct(u);
      const Eigen::VectorXd u2 = x2.cwiseProduct(u);
      double loc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        loc += w[i] * (d1[i] * d1[i] + d2[i] * d2[i]) * u(static_cast<Eigen::Index>(i)) * u(static_cast<Eigen::Index>(i));
      }
      defect += f * (radial_kinetic(g, c.l, u1) + radial_kinetic(g, c.l, u2) - radial_kinetic(g, c.l, u) - loc);
    }
  }
  return defect;
}

double binding_gap(const ChannelDensityMatrix& gamma, double Z, const RadialFunction& chi1,
                   const RadialFunction& chi2) {
  check_partition(chi1, chi2);
  const double inner = evaluate(localize(gamma, chi1), Z).total;
  const double outer = evaluate(localize(gamma, chi2), 0.0).total;
  return inner + outer - evaluate(gamma, Z).total;
}

// ---------------------------------------------------------------------------

void save_gamma(const ChannelDensityMatrix& gamma, const std::filesystem::path& dir) {
  nlohmann::json meta;
  const auto& g = gamma.grid();
  meta["grid"] = {{"r_min", g.r_min()}, {"r_max", g.r_max()}, {"n", g.size()}};
  meta["channels"] = nlohmann::json::array();
  for (const auto& c : gamma.channels()) {
    meta["channels"].push_back({{"l", c.l}, {"occupations", c.occupations}});
    std::ostringstream csv;
    csv << "r";
    for (std::size_t k = 0; k < c.size(); ++k) csv << ",u" << k;
    csv << "\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
      csv << io::format_double(g.node(i));
      for (std::size_t k = 0; k < c.size(); ++k) {
        csv << "," << io::format_double(c.orbitals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
      }
      csv << "\n";
    }
    io::atomic_write(dir / ("orbitals_l" + std::to_string(c.l) + ".csv"), csv.str());
  }
  io::atomic_write(dir / "gamma.json", meta.dump(2) + "\n");
}

ChannelDensityMatrix load_gamma(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_file(dir / "gamma.json"));
    const auto& gm = meta.at("grid");
    auto grid = RadialGrid::logarithmic(gm.at("r_min").get<double>(), gm.at("r_max").get<double>(),
                                        gm.at("n").get<std::size_t>());
    ChannelDensityMatrix out(grid);
    for (const auto& c : meta.at("channels")) {
      const int l = c.at("l").get<int>();
      auto occ = c.at("occupations").get<std::vector<double>>();
      Eigen::MatrixXd u(static_cast<Eigen::Index>(grid->size()), static_cast<Eigen::Index>(occ.size()));
      std::istringstream in(io::read_file(dir / ("orbitals_l" + std::to_string(l) + ".csv")));
      std::string line;
      std::getline(in, line);
      for (Eigen::Index i = 0; i < u.rows(); ++i) {
        if (!std::getline(in, line)) throw io::IoError("load_gamma: orbital table too short");
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        for (Eigen::Index k = 0; k < u.cols(); ++k) {
          if (!std::getline(row, cell, ',')) throw io::IoError("load_gamma: orbital row too short");
          u(i, k) = std::stod(cell);
        }
      }
      out.add_channel(l, std::move(u), std::move(occ));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw io::IoError(std::string("load_gamma: bad gamma.json: ") + e.what());
  } catch (const std::logic_error& e) {
    throw io::IoError(std::string("load_gamma: ") + e.what());
  }
}

namespace {
nlohmann::json breakdown_json(const EnergyBreakdown& b) {
  return {{"kinetic", b.kinetic}, {"external", b.external}, {"direct", b.direct}, {"exchange", b.exchange},
          {"total", b.total}};
}
}  // namespace

void save_result(const MuellerResult& res, const std::filesystem::path& dir) {
  nlohmann::json j;
  j["Z"] = res.Z;
  j["N"] = res.N;
  j["breakdown"] = breakdown_json(res.breakdown);
  j["chemical_potential"] = res.chemical_potential;
  j["iterations"] = res.iterations;
  j["converged"] = res.converged;
  j["stationarity"] = res.stationarity;
  j["energy_history"] = res.energy_history;
  j["tail_mass_fraction"] = res.tail_mass_fraction;
  save_gamma(res.gamma, dir / "gamma");
  io::atomic_write(dir / "result.json", j.dump(2) + "\n");
}

MuellerResult load_result(const std::filesystem::path& dir) {
  MuellerResult res;
  try {
    const auto j = nlohmann::json::parse(io::read_file(dir / "result.json"));
    res.Z = j.at("Z").get<double>();
    res.N = j.at("N").get<double>();
    const auto& b = j.at("breakdown");
    res.breakdown = {b.at("kinetic").get<double>(), b.at("external").get<double>(), b.at("direct").get<double>(),
                     b.at("exchange").get<double>(), b.at("total").get<double>()};
    res.chemical_potential = j.at("chemical_potential").get<double>();
    res.iterations = j.at("iterations").get<int>();
    res.converged = j.at("converged").get<bool>();
    res.stationarity = j.at("stationarity").get<double>();
    res.energy_history = j.at("energy_history").get<std::vector<double>>();
    res.tail_mass_fraction = j.at("tail_mass_fraction").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw io::IoError(std::string("load_result: bad result.json: ") + e.what());
  }
  res.gamma = load_gamma(dir / "gamma");
  return res;
}

}  // namespace mtf
