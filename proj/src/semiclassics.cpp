#include "muellertf/semiclassics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "muellertf/mueller.hpp"
#include "muellertf/tf.hpp"

namespace mtf {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Gauss-Legendre panels per smooth piece of the smearing integral.
constexpr int kPanels = 3;

double bump(double t) { return t < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0; }

struct Shape {
  double amplitude;
  double constant;
};

const Shape& unit_shape() {
  static const Shape shape = [] {
    boost::math::quadrature::tanh_sinh<double> ts;
    const double norm = ts.integrate([](double t) { return 4.0 * kPi * t * t * bump(t) * bump(t); }, 0.0, 1.0);
    const double grad = ts.integrate(
        [](double t) {
          if (t >= 1.0) return 0.0;
          const double q = 1.0 - t * t;
          const double d = bump(t) * 2.0 * t / (q * q);
          return 4.0 * kPi * t * t * d * d;
        },
        0.0, 1.0);
    return Shape{1.0 / std::sqrt(norm), grad / norm};
  }();
  return shape;
}

// Power-law model f ≈ f0 (r/r0)^p below the first node.
struct Origin {
  double r0 = 0.0;
  double f0 = 0.0;
  double p = 0.0;
};

Origin origin_of(std::span<const double> f, const RadialGrid& g) {
  Origin o{g.r_min(), f[0], 0.0};
  if (f[0] != 0.0 && f[0] * f[1] > 0.0) o.p = std::log(f[1] / f[0]) / std::log(g.node(1) / g.r_min());
  return o;
}

// ∫_a^b ρ f(ρ) dρ for the grid interpolant of f, continued by the power law
// below the first node and by 0 beyond the last.
class RadialMoment {
 public:
  RadialMoment(const RadialFunction& f) : g_(f.grid()), bp_(f.breakpoint()) {
    const auto r = g_.nodes();
    rf_.resize(f.size());
    for (std::size_t i = 0; i < rf_.size(); ++i) rf_[i] = r[i] * f[i];
    o_ = origin_of(f.values(), g_);
    if (o_.f0 != 0.0 && !(o_.p > -2.0)) throw std::domain_error("smear: function too singular at the origin");
    cum_ = g_.cumulative(rf_, bp_);
    tail_.resize(rf_.size());
    g_.tail(rf_, tail_, bp_);
  }

  double operator()(double a, double b) const {
    if (!(b > a)) return 0.0;
    double acc = 0.0;
    const double r0 = g_.r_min();
    if (a < r0) {
      acc += inner(std::min(b, r0)) - inner(a);
      a = r0;
      if (!(b > a)) return acc;
    }
    b = std::min(b, g_.r_max());
    if (!(b > a)) return acc;
    const std::size_t ia = g_.lower_bound(a);
    const std::size_t ib = g_.lower_bound(b);
    if (ib - ia <= 8) return acc + g_.integrate(rf_, a, b, bp_);
    // Difference the smaller of the two running sums.
    if (std::abs(tail_[ia]) < std::abs(cum_[ia])) return acc + tail(a) - tail(b);
    return acc + cumulative(b) - cumulative(a);
  }

 private:
  double inner(double x) const {
    if (x <= 0.0 || o_.f0 == 0.0) return 0.0;
    return o_.f0 * o_.r0 * o_.r0 / (o_.p + 2.0) * std::pow(x / o_.r0, o_.p + 2.0);
  }
  double cumulative(double x) const {
    std::size_t k = g_.lower_bound(x);
    if (k == g_.size() || g_.node(k) > x) --k;
    return cum_[k] + g_.integrate(rf_, g_.node(k), x, bp_);
  }

  double tail(double x) const {
    if (x >= g_.r_max()) return 0.0;
    const std::size_t k = g_.lower_bound(x);
    return tail_[k] + g_.integrate(rf_, x, g_.node(k), bp_);
  }

  const RadialGrid& g_;
  double bp_;
  std::vector<double> rf_;
  std::vector<double> cum_;
  std::vector<double> tail_;
  Origin o_;
};

double positive_power(double v, double p) { return v > 0.0 ? std::pow(v, p) : 0.0; }

}  // namespace

double Mollifier::value(double r) const {
  return r < s ? amplitude * std::pow(s, -1.5) * bump(r / s) : 0.0;
}

double Mollifier::weight(double r) const {
  const double v = value(r);
  return v * v;
}

double Mollifier::derivative(double r) const {
  if (r >= s) return 0.0;
  const double t = r / s;
  const double q = 1.0 - t * t;
  return -amplitude * std::pow(s, -2.5) * bump(t) * 2.0 * t / (q * q);
}

Mollifier make_mollifier(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("make_mollifier: s must be positive and finite");
  const Shape& sh = unit_shape();
  return Mollifier{s, sh.amplitude, sh.constant / (s * s), sh.constant};
}

Mollifier make_mollifier(double s, const RadialGrid& grid) {
  if (s > 0.0 && s <= grid.r_min()) throw std::invalid_argument("make_mollifier: s below grid resolution");
  return make_mollifier(s);
}

double integrate3d_origin(const RadialFunction& f) {
  const Origin o = origin_of(f.values(), f.grid());
  double inner = 0.0;
  if (o.f0 != 0.0) {
    if (!(o.p > -3.0)) throw std::domain_error("integrate3d_origin: not integrable at the origin");
    inner = 4.0 * kPi * o.f0 * o.r0 * o.r0 * o.r0 / (o.p + 3.0);
  }
  return integrate3d(f) + inner;
}

RadialFunction smear(const RadialFunction& f, const Mollifier& g) {
  const RadialGrid& grid = f.grid();
  const RadialMoment moment(f);
  const double s = g.s;
  const double bp = f.breakpoint();
  std::vector<double> out(f.size(), 0.0);
  std::vector<double> cuts;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = grid.node(i);
    auto integrand = [&](double t) { return t * g.weight(t) * moment(std::abs(r - t), r + t); };
    cuts.assign({0.0, s});
    for (double c : {r, r - grid.r_min(), r + grid.r_min(), grid.r_max() - r}) cuts.push_back(c);
    if (bp > 0.0) {
      for (double c : {bp - r, r - bp, r + bp}) cuts.push_back(c);
    }
    std::erase_if(cuts, [s](double c) { return !(c >= 0.0 && c <= s); });
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double h = (cuts[k + 1] - cuts[k]) / kPanels;
      if (!(h > 0.0)) continue;
      for (int p = 0; p < kPanels; ++p) {
        acc += boost::math::quadrature::gauss<double, 40>::integrate(integrand, cuts[k] + p * h, cuts[k] + (p + 1) * h);
      }
    }
    out[i] = 2.0 * kPi / r * acc;
  }
  return RadialFunction(f.grid_ptr(), std::move(out));
}

SemiclassicalState coherent_density(const RadialFunction& V, double s) {
  const Mollifier g = make_mollifier(s, V.grid());
  const RadialFunction f = map_values(V, [](double v) { return tf::density_factor * positive_power(v, 1.5); });
  RadialFunction rho = map_values(smear(f, g), [](double x) { return std::max(x, 0.0); });
  SemiclassicalState st;
  st.V = V;
  st.s = s;
  st.rho = Density(std::move(rho));
  st.trace = integrate3d_origin(f);
  const double i52 = integrate3d_origin(map_values(V, [](double v) { return positive_power(v, 2.5); }));
  st.kinetic = 1.5 * tf::L_sc * i52 + g.dirichlet * st.trace;
  return st;
}

CoherentKinetic coherent_kinetic(const RadialFunction& V, double s) {
  const Mollifier g = make_mollifier(s, V.grid());
  const double i52 = integrate3d_origin(map_values(V, [](double v) { return positive_power(v, 2.5); }));
  const double i32 = integrate3d_origin(map_values(V, [](double v) { return positive_power(v, 1.5); }));
  CoherentKinetic k;
  k.exact = 1.5 * tf::L_sc * i52 + g.dirichlet * tf::density_factor * i32;
  k.bound = 1.5 * tf::L_sc * i52 + g.shape_constant / (s * s) * i32;
  return k;
}

namespace {

void fill_potential_terms(LowerBoundReport& rep, const RadialFunction& V, double s) {
  const Mollifier g = make_mollifier(s, V.grid());
  const double i52 = integrate3d_origin(map_values(V, [](double v) { return positive_power(v, 2.5); }));
  const RadialFunction smeared = smear(V, g);
  const auto& grid = V.grid();
  std::vector<double> d(V.size(), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (grid.node(i) <= grid.r_max() - s) d[i] = positive_power(V[i] - smeared[i], 2.5);
  }
  const double dsm = integrate3d_origin(RadialFunction(V.grid_ptr(), std::move(d), V.breakpoint()));
  rep.s = s;
  rep.t1 = tf::L_sc * i52;
  rep.t3 = std::pow(i52, 0.6) * std::pow(std::max(dsm, 0.0), 0.4);
}

void finish(LowerBoundReport& rep) {
  const double den = rep.t2 + rep.t3;
  const double num = -rep.lhs - rep.t1;
  rep.deficit = den > 0.0 ? num / den : 0.0;
}

}  // namespace

LowerBoundReport lower_bound_report(const RadialFunction& V, double s, const ChannelDensityMatrix& gamma) {
  LowerBoundReport rep;
  fill_potential_terms(rep, V, s);
  if (!gamma.empty()) {
    const RadialFunction v = resample(V, gamma.grid_ptr());
    rep.lhs = kinetic_energy(gamma) - integrate3d(v * density_of(gamma));
  }
  rep.t2 = gamma.empty() ? 0.0 : gamma.trace() / (s * s);
  finish(rep);
  return rep;
}

LowerBoundReport lower_bound_report(const SemiclassicalState& state) {
  LowerBoundReport rep;
  fill_potential_terms(rep, state.V, state.s);
  rep.lhs = state.kinetic - integrate3d(state.V * state.rho);
  rep.t2 = state.trace / (state.s * state.s);
  finish(rep);
  return rep;
}

nlohmann::ordered_json to_json(const LowerBoundReport& r) {
  nlohmann::ordered_json j;
  j["report"] = "semiclassical_lower_bound";
  j["s"] = r.s;
  j["lhs"] = r.lhs;
  j["t1"] = r.t1;
  j["t2"] = r.t2;
  j["t3"] = r.t3;
  j["deficit"] = r.deficit;
  return j;
}

LowerBoundReport lower_bound_report_from_json(const nlohmann::ordered_json& j) {
  LowerBoundReport r;
  r.s = j.at("s").get<double>();
  r.lhs = j.at("lhs").get<double>();
  r.t1 = j.at("t1").get<double>();
  r.t2 = j.at("t2").get<double>();
  r.t3 = j.at("t3").get<double>();
  r.deficit = j.at("deficit").get<double>();
  return r;
}

SmearingCheck smearing_check(const RadialFunction& V, double z, double r, double s) {
  const Mollifier g = make_mollifier(s, V.grid());
  const RadialFunction smeared = smear(V, g);
  const auto& grid = V.grid();
  SmearingCheck out;
  out.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < V.size(); ++i) {
    const double x = grid.node(i);
    if (x > grid.r_max() - s) break;
    const double lhs = std::max(V[i] - smeared[i], 0.0);
    const double rhs = (z > 0.0 && x >= r && x < r + s) ? z / x : 0.0;
    out.max_bound = std::max(out.max_bound, rhs);
    if (lhs - rhs > out.max_violation) {
      out.max_violation = lhs - rhs;
      out.at = x;
    }
  }
  return out;
}

}  // namespace mtf
