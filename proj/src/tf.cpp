#include "muellertf/tf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "muellertf/coulomb.hpp"
#include "muellertf/io.hpp"

namespace mtf {

namespace {

using tf::kappa;

enum class Outcome { Crossed, TurnedUp, Reached };

struct Trajectory {
  std::vector<double> u, v;
  Outcome outcome = Outcome::Reached;
  std::size_t last = 0;
};

// Shooting on u(t), v = du/dt in t = ln r:
//   u_t = v,  v_t = v + κ r^{3/2} [u]_+^{3/2}.
class Shooter {
 public:
  Shooter(const RadialGrid& g, const TFOptions& opts) : g_(g), opts_(opts), t_(g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) t_[i] = std::log(g.node(i));
  }

  // Integrates from (t0, u0, v0) through nodes first..end. If t0 equals the
  // node time of `first` the state is stored there directly.
  void run(double t0, double u0, double v0, std::size_t first, Trajectory& out) const {
    const std::size_t n = g_.size();
    out.u.resize(n);
    out.v.resize(n);
    double u = u0, v = v0, t = t0;
    const double h_node = g_.log_step() / opts_.substeps;
    for (std::size_t i = first; i < n; ++i) {
      const double dt_total = t_[i] - t;
      if (dt_total > 0.0) {
        const int m = std::max(1, static_cast<int>(std::ceil(dt_total / h_node - 1e-9)));
        const double dt = dt_total / m;
        for (int s = 0; s < m; ++s) {
          step(t, u, v, dt);
          t += dt;
        }
      }
      t = t_[i];
      out.u[i] = u;
      out.v[i] = v;
      if (u <= 0.0) {
        out.outcome = Outcome::Crossed;
        out.last = i;
        return;
      }
      if (v > 0.0) {
        out.outcome = Outcome::TurnedUp;
        out.last = i;
        return;
      }
    }
    out.outcome = Outcome::Reached;
    out.last = n - 1;
  }

 private:
  static void rhs(double t, double u, double v, double& du, double& dv) {
    const double r = std::exp(t);
    const double up = u > 0.0 ? u : 0.0;
    du = v;
    dv = v + kappa * r * std::sqrt(r) * up * std::sqrt(up);
  }

  static void step(double t, double& u, double& v, double dt) {
    double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v;
    rhs(t, u, v, k1u, k1v);
    rhs(t + 0.5 * dt, u + 0.5 * dt * k1u, v + 0.5 * dt * k1v, k2u, k2v);
    rhs(t + 0.5 * dt, u + 0.5 * dt * k2u, v + 0.5 * dt * k2v, k3u, k3v);
    rhs(t + dt, u + dt * k3u, v + dt * k3v, k4u, k4v);
    u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }

  const RadialGrid& g_;
  const TFOptions& opts_;
  std::vector<double> t_;
};

// Solves the shooting problem stage by stage. Returns u, v on all nodes from
// `first` on, and the first-stage parameter.
struct ShootResult {
  std::vector<double> u, v;
  double p0 = 0.0;
  int stages = 0;
};

// Bisection on a family whose parameter orders trajectories: larger p is lower.
template <class Family>
bool bisect(const Shooter& sh, Family fam, double lo, double hi, double t0, std::size_t first, Trajectory& tlo,
            Trajectory& thi, double& p_out, Trajectory& accepted) {
  Trajectory tmp;
  auto launch = [&](double p, Trajectory& out) {
    const auto [u0, v0] = fam(p);
    sh.run(t0, u0, v0, first, out);
  };
  launch(lo, tlo);
  if (tlo.outcome == Outcome::Reached) {
    p_out = lo;
    accepted = tlo;
    return true;
  }
  if (tlo.outcome != Outcome::TurnedUp) throw TFError("TF shooting: lower bracket does not turn up");
  launch(hi, thi);
  for (int k = 0; k < 200 && thi.outcome == Outcome::TurnedUp; ++k) {
    lo = hi;
    tlo = thi;
    hi *= 2.0;
    launch(hi, thi);
  }
  if (thi.outcome == Outcome::Reached) {
    p_out = hi;
    accepted = thi;
    return true;
  }
  if (thi.outcome != Outcome::Crossed) throw TFError("TF shooting: failed to bracket the separatrix");
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    launch(mid, tmp);
    if (tmp.outcome == Outcome::Reached) {
      p_out = mid;
      accepted = tmp;
      return true;
    }
    if (tmp.outcome == Outcome::Crossed) {
      hi = mid;
      std::swap(thi, tmp);
    } else {
      lo = mid;
      std::swap(tlo, tmp);
    }
  }
  p_out = 0.5 * (lo + hi);
  return false;
}

template <class Family>
ShootResult shoot(const RadialGrid& g, const TFOptions& opts, Family first_family, double p_hi, double t0,
                  std::size_t first) {
  const Shooter sh(g, opts);
  const std::size_t n = g.size();
  ShootResult res;
  res.u.assign(n, 0.0);
  res.v.assign(n, 0.0);
  Trajectory tlo, thi, acc;
  double p = 0.0;
  std::size_t start = first;
  double start_t = t0;

  auto copy = [&](const Trajectory& tr, std::size_t from, std::size_t to) {
    for (std::size_t i = from; i <= to; ++i) {
      res.u[i] = tr.u[i];
      res.v[i] = tr.v[i];
    }
  };

  bool done = bisect(sh, first_family, 0.0, p_hi, start_t, start, tlo, thi, p, acc);
  res.p0 = p;
  for (int stage = 1;; ++stage) {
    res.stages = stage;
    if (done) {
      copy(acc, start, n - 1);
      return res;
    }
    // Last node where both bracketing trajectories agree.
    const std::size_t stop = std::min(tlo.last, thi.last);
    std::size_t k = start;
    while (k + 1 <= stop) {
      const double a = tlo.u[k + 1], b = thi.u[k + 1];
      if (std::abs(a - b) > opts.agree_tol * std::max(std::abs(a), std::abs(b))) break;
      ++k;
    }
    if (k >= n - 1) {
      copy(tlo, start, n - 1);
      return res;
    }
    if (k <= start + 1 || stage >= opts.max_stages) {
      throw TFError("TF shooting stalled at r=" + std::to_string(g.node(k)) +
                    " (grid too coarse or r_max too large for double precision)");
    }
    copy(tlo, start, k);
    const double u0 = 0.5 * (tlo.u[k] + thi.u[k]);
    const double v0 = 0.5 * (tlo.v[k] + thi.v[k]);
    start = k;
    start_t = std::log(g.node(k));
    auto fam = [u0](double q) { return std::pair<double, double>(u0, -q); };
    done = bisect(sh, fam, 0.0, std::max(2.0 * (-v0), 1e-300), start_t, start, tlo, thi, p, acc);
  }
}

double inner_mass(double Z, double r_min) {
  return 4.0 / (9.0 * tf::pi) * Z * std::sqrt(Z) * r_min * std::sqrt(r_min);
}

TFSolution assemble(double z, double r_inner, const GridPtr& grid, const std::vector<double>& u, const std::vector<double>& v,
                    std::size_t first, double inside_phi) {
  const std::size_t n = grid->size();
  std::vector<double> rho(n, 0.0), phi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = grid->node(i);
    if (i < first) {
      phi[i] = inside_phi;
      continue;
    }
    phi[i] = u[i] / r;
    const double p = phi[i] > 0.0 ? phi[i] : 0.0;
    rho[i] = tf::density_factor * p * std::sqrt(p);
  }
  (void)v;
  TFSolution sol;
  sol.z = z;
  sol.r_inner = r_inner;
  sol.rho = Density(RadialFunction(grid, std::move(rho), r_inner));
  sol.phi = RadialFunction(grid, std::move(phi), r_inner);
  return sol;
}

void finish(TFSolution& sol) {
  const auto& g = sol.grid();
  sol.mass = sol.rho.mass() + (sol.full() ? inner_mass(sol.z, g.r_min()) : 0.0);
  sol.energy = tf_energy(sol.rho, sol.z, sol.r_inner);
  const RadialFunction vh = hartree_potential(sol.rho);
  double worst = 0.0;
  if (sol.z > 0.0) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r = g.node(i);
      if (r < sol.r_inner) continue;
      const double expect = sol.z / r - vh[i];
      worst = std::max(worst, std::abs(sol.phi[i] - expect) / (sol.z / r));
    }
  }
  sol.residual = worst;
}

}  // namespace

TFSolution solve_tf(double Z, GridPtr grid, const TFOptions& opts) {
  if (!(Z > 0.0) || !std::isfinite(Z)) throw std::invalid_argument("solve_tf: Z must be positive");
  if (!grid) throw std::invalid_argument("solve_tf: null grid");
  const double r0 = grid->r_min();
  const double zc = kappa * Z * std::sqrt(Z) * r0 * std::sqrt(r0);
  // Near the nucleus u = Z − q r + (4/3) κ Z^{3/2} r^{3/2} + O(r^{5/2}).
  auto fam = [=](double q) {
    return std::pair<double, double>(Z - q * r0 + (4.0 / 3.0) * zc, -q * r0 + 2.0 * zc);
  };
  const double guess = 1.588 * Z / tf::length_scale(Z);
  const double hi = opts.initial_bracket > 0.0 ? opts.initial_bracket : 4.0 * guess;
  const ShootResult sr = shoot(*grid, opts, fam, hi, std::log(r0), 0);
  TFSolution sol = assemble(Z, 0.0, grid, sr.u, sr.v, 0, 0.0);
  sol.shoot_param = sr.p0;
  sol.stages = sr.stages;
  finish(sol);
  return sol;
}

TFSolution solve_exterior_tf(double z, double r, GridPtr grid, const TFOptions& opts) {
  if (!grid) throw std::invalid_argument("solve_exterior_tf: null grid");
  if (!(r > 0.0) || !std::isfinite(r) || !std::isfinite(z)) {
    throw std::invalid_argument("solve_exterior_tf: need finite z and r > 0");
  }
  if (r <= grid->r_min() || r >= grid->r_max()) throw std::invalid_argument("solve_exterior_tf: r outside the grid");
  const std::size_t first = grid->lower_bound(r);
  if (z <= 0.0) {
    const std::size_t n = grid->size();
    std::vector<double> phi(n, 0.0);
    for (std::size_t i = first; i < n; ++i) phi[i] = z / grid->node(i);
    TFSolution sol;
    sol.z = z;
    sol.r_inner = r;
    sol.rho = Density(RadialFunction(grid, std::vector<double>(n, 0.0), r));
    sol.phi = RadialFunction(grid, std::move(phi), r);
    sol.stages = 0;
    finish(sol);
    return sol;
  }
  // u − r u' = z at r; q = −u'(r) = ∫_{|y|>r} ρ/|y| ∈ [0, z/r].
  auto fam = [=](double q) { return std::pair<double, double>(z - r * q, -r * q); };
  const double hi = opts.initial_bracket > 0.0 ? opts.initial_bracket : z / r;
  const ShootResult sr = shoot(*grid, opts, fam, hi, std::log(r), first);
  TFSolution sol = assemble(z, r, grid, sr.u, sr.v, first, -sr.p0);
  sol.shoot_param = sr.p0;
  sol.stages = sr.stages;
  finish(sol);
  return sol;
}

double tf_energy(const RadialFunction& rho, double z, double r_inner) {
  const auto& g = rho.grid();
  const std::size_t n = g.size();
  std::vector<double> kin(n), ext(n);
  for (std::size_t i = 0; i < n; ++i) {
    kin[i] = std::pow(std::max(rho[i], 0.0), 5.0 / 3.0);
    ext[i] = rho[i] / g.node(i);
  }
  const RadialFunction k(rho.grid_ptr(), std::move(kin), rho.breakpoint());
  const RadialFunction e(rho.grid_ptr(), std::move(ext), rho.breakpoint());
  double energy = tf::c_tf * integrate3d(k) - z * integrate3d(e) + direct_energy(rho);
  if (r_inner == 0.0 && z > 0.0) {
    // ρ ≈ (z/r)^{3/2}/(6π²) below the first node: the kinetic and nuclear
    // terms there contribute (3/5 − 1) · 8π z^{5/2} √r_min / (6π²).
    energy -= 0.4 * 8.0 * tf::pi * tf::density_factor * std::pow(z, 2.5) * std::sqrt(g.r_min());
  }
  return energy;
}

double tf_equation_residual(const TFSolution& sol) {
  const auto& g = sol.grid();
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.node(i) < sol.r_inner) continue;
    const double lhs = (5.0 * tf::c_tf / 3.0) * std::cbrt(sol.rho[i] * sol.rho[i]);
    const double rhs = std::max(sol.phi[i], 0.0);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, rhs));
  }
  return worst;
}

double sommerfeld_deviation(const TFSolution& sol, double x) {
  const auto& g = sol.grid();
  if (x < g.r_min() || x > g.r_max()) throw std::out_of_range("sommerfeld_deviation: x outside grid");
  std::size_t k = g.lower_bound(x);
  double rho;
  if (k < g.size() && g.node(k) == x) {
    rho = sol.rho[k];
  } else {
    k = k == 0 ? 0 : k - 1;
    const double a = sol.rho[k], b = sol.rho[k + 1];
    if (a > 0.0 && b > 0.0) {
      const double t = std::log(x / g.node(k)) / std::log(g.node(k + 1) / g.node(k));
      rho = std::exp((1.0 - t) * std::log(a) + t * std::log(b));
    } else {
      rho = sol.rho(x);
    }
  }
  const double x3 = x * x * x;
  return rho * x3 * x3 / tf::sommerfeld_coefficient - 1.0;
}

SommerfeldFit fit_sommerfeld(const TFSolution& sol, double x_lo, double x_hi) {
  const auto& g = sol.grid();
  SommerfeldFit fit;
  fit.x_lo = x_lo;
  fit.x_hi = x_hi;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double prev = std::numeric_limits<double>::infinity();
  fit.monotone = true;
  fit.max_deviation = -std::numeric_limits<double>::infinity();
  fit.min_deviation = std::numeric_limits<double>::infinity();
  for (std::size_t i = g.lower_bound(x_lo); i < g.size() && g.node(i) <= x_hi; ++i) {
    if (sol.rho[i] <= 0.0) continue;
    const double x = g.node(i);
    const double d = sommerfeld_deviation(sol, x);
    fit.max_deviation = std::max(fit.max_deviation, d);
    fit.min_deviation = std::min(fit.min_deviation, d);
    if (std::abs(d) >= prev) fit.monotone = false;
    prev = std::abs(d);
    if (d == 0.0) continue;
    const double lx = std::log(x), ly = std::log(std::abs(d));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++fit.points;
  }
  if (fit.points >= 2) {
    const double m = static_cast<double>(fit.points);
    fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / m;
  }
  return fit;
}

double tf_screened_charge(const TFSolution& sol, double r) {
  const auto& g = sol.grid();
  if (r <= g.r_min() || sol.z <= 0.0) return sol.z;
  // TF minimizers are neutral, so z − ∫_{|x|<r} ρ equals the exterior mass;
  // summing from the outside avoids cancellation in the far tail. Beyond the
  // grid the Sommerfeld tail a^TF r⁻³ is added.
  const double tail = tf::a_tf / (g.r_max() * g.r_max() * g.r_max());
  if (r >= g.r_max()) return tail * std::pow(g.r_max() / r, 3);
  return integrate3d(sol.rho, r, g.r_max()) + tail;
}

void save_tf(const TFSolution& sol, const std::filesystem::path& dir) {
  nlohmann::json meta;
  meta["z"] = sol.z;
  meta["r_inner"] = sol.r_inner;
  meta["mass"] = sol.mass;
  meta["energy"] = sol.energy;
  meta["shoot_param"] = sol.shoot_param;
  meta["residual"] = sol.residual;
  meta["stages"] = sol.stages;
  meta["grid"] = {{"r_min", sol.grid().r_min()}, {"r_max", sol.grid().r_max()}, {"n", sol.grid().size()}};
  write_csv(dir / "rho.csv", sol.rho);
  write_csv(dir / "phi.csv", sol.phi);
  io::atomic_write(dir / "meta.json", meta.dump(2) + "\n");
}

TFSolution load_tf(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_file(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw io::IoError(std::string("load_tf: bad meta.json: ") + e.what());
  }
  const auto& gm = meta.at("grid");
  auto grid = RadialGrid::logarithmic(gm.at("r_min").get<double>(), gm.at("r_max").get<double>(),
                                      gm.at("n").get<std::size_t>());
  TFSolution sol;
  sol.z = meta.at("z").get<double>();
  sol.r_inner = meta.at("r_inner").get<double>();
  sol.mass = meta.at("mass").get<double>();
  sol.energy = meta.at("energy").get<double>();
  sol.shoot_param = meta.at("shoot_param").get<double>();
  sol.residual = meta.at("residual").get<double>();
  sol.stages = meta.at("stages").get<int>();
  const RadialFunction rho = read_csv(dir / "rho.csv", grid);
  const RadialFunction phi = read_csv(dir / "phi.csv", grid);
  sol.rho = Density(RadialFunction(grid, {rho.values().begin(), rho.values().end()}, sol.r_inner));
  sol.phi = RadialFunction(grid, {phi.values().begin(), phi.values().end()}, sol.r_inner);
  return sol;
}

}  // namespace mtf
