#include "muellertf/screening.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "muellertf/coulomb.hpp"
#include "muellertf/io.hpp"
#include "muellertf/mueller.hpp"
#include "muellertf/semiclassics.hpp"

namespace mtf {

namespace {

constexpr double kPi = std::numbers::pi;

double edge(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

double profile_slope(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double a = edge(t), b = edge(1.0 - t);
  const double da = a / (t * t), db = b / ((1.0 - t) * (1.0 - t));
  return (da * b + a * db) / ((a + b) * (a + b));
}

double plus(double x) { return std::max(x, 0.0); }

void check_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda <= 0.5)) throw std::invalid_argument("lambda must lie in (0, 1/2]");
}

// ∫_{a<|x|<b} f clamped to the grid.
double shell_mass(const RadialFunction& f, double a, double b) {
  const auto& g = f.grid();
  a = std::max(a, g.r_min());
  b = std::min(b, g.r_max());
  return b > a ? integrate3d(f, a, b) : 0.0;
}

double exterior_mass(const RadialFunction& f, double r) { return shell_mass(f, r, f.grid().r_max()); }

// Tr(−Δ η γ η).
double localized_kinetic(const ChannelDensityMatrix& gamma, const RadialFunction& eta) {
  return kinetic_energy(localize(gamma, eta));
}

TFSolution full_tf(double Z, const TFSolution* tf) {
  if (tf) {
    if (!tf->full() || tf->z != Z) throw std::invalid_argument("screening: TF solution does not match Z");
    return *tf;
  }
  return solve_tf(Z, screening_tf_grid(Z));
}

nlohmann::ordered_json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0.0 ? "inf" : "-inf";
}

double number_from(const nlohmann::ordered_json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw std::invalid_argument("report: bad number '" + s + "'");
}

nlohmann::ordered_json named(const std::vector<std::pair<std::string, double>>& v) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, x] : v) j[k] = number(x);
  return j;
}

std::vector<std::pair<std::string, double>> named_from(const nlohmann::ordered_json& j) {
  std::vector<std::pair<std::string, double>> v;
  for (const auto& [k, x] : j.items()) v.emplace_back(k, number_from(x));
  return v;
}

void finish(ComparisonReport& rep) {
  rep.rhs = 0.0;
  for (const auto& [k, x] : rep.terms) rep.rhs += x;
  if (rep.rhs > 0.0) {
    rep.monitored_constant = rep.lhs / rep.rhs;
  } else {
    rep.monitored_constant = rep.lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    rep.flags.push_back("zero_rhs");
  }
}

}  // namespace

double eta_profile(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = edge(t), b = edge(1.0 - t);
  return a / (a + b);
}

double eta_shape_constant() {
  static const double c = [] {
    const auto m = boost::math::tools::brent_find_minima([](double t) { return -profile_slope(t); }, 0.05, 0.95,
                                                         std::numeric_limits<double>::digits / 2);
    return -m.second;
  }();
  return c;
}

CutoffPair make_cutoff(const GridPtr& grid, double r, double lambda) {
  if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("make_cutoff: r must be positive");
  check_lambda(lambda);
  CutoffPair c;
  c.r = r;
  c.lambda = lambda;
  c.chi_plus = restrict_outside(RadialFunction::sample(grid, [](double) { return 1.0; }), r);
  const double w = lambda * r;
  c.eta = RadialFunction::sample(grid, [=](double x) { return eta_profile((x - r) / w); });
  c.shape_constant = eta_shape_constant();
  return c;
}

double interior_mass(const RadialFunction& rho, double r) {
  const auto& g = rho.grid();
  if (!(r > 0.0)) return 0.0;
  // ρ ≈ f0 (x/r0)^p below the first node.
  const double r0 = g.r_min(), f0 = rho[0];
  double p = 0.0;
  if (f0 != 0.0 && f0 * rho[1] > 0.0) p = std::log(rho[1] / f0) / std::log(g.node(1) / r0);
  auto inner = [&](double x) {
    if (f0 == 0.0) return 0.0;
    if (!(p > -3.0)) throw std::domain_error("interior_mass: not integrable at the origin");
    return 4.0 * kPi * f0 * r0 * r0 * r0 / (p + 3.0) * std::pow(x / r0, p + 3.0);
  };
  if (r <= r0) return inner(r);
  return inner(r0) + shell_mass(rho, r0, r);
}

double screened_charge(const RadialFunction& rho0, double Z, double r) { return Z - interior_mass(rho0, r); }

GridPtr screening_tf_grid(double Z) { return RadialGrid::logarithmic(1e-6 / Z, 1e5, 4000); }

ScreeningProfile compare_profiles(const ChannelDensityMatrix& gamma0, double Z, std::span<const double> radii,
                                  double epsilon, const TFSolution* tf) {
  const TFSolution sol = full_tf(Z, tf);
  const Density rho = density_of(gamma0);
  ScreeningProfile p;
  p.Z = Z;
  p.epsilon = epsilon;
  for (double r : radii) {
    const double zm = screened_charge(rho, Z, r);
    const double zt = tf_screened_charge(sol, r);
    const double dev = std::abs(zm - zt);
    p.radii.push_back(r);
    p.z_mueller.push_back(zm);
    p.z_tf.push_back(zt);
    p.deviation.push_back(dev);
    p.weighted_sup = std::max(p.weighted_sup, dev * std::min(1.0, std::pow(r, 3.0 - epsilon)));
  }
  return p;
}

nlohmann::ordered_json to_json(const ScreeningProfile& p) {
  nlohmann::ordered_json j;
  j["report"] = "screening_profile";
  j["Z"] = p.Z;
  j["epsilon"] = p.epsilon;
  j["radii"] = p.radii;
  j["z_mueller"] = p.z_mueller;
  j["z_tf"] = p.z_tf;
  j["deviation"] = p.deviation;
  j["weighted_sup"] = p.weighted_sup;
  return j;
}

ScreeningProfile screening_profile_from_json(const nlohmann::ordered_json& j) {
  ScreeningProfile p;
  p.Z = j.at("Z").get<double>();
  p.epsilon = j.at("epsilon").get<double>();
  p.radii = j.at("radii").get<std::vector<double>>();
  p.z_mueller = j.at("z_mueller").get<std::vector<double>>();
  p.z_tf = j.at("z_tf").get<std::vector<double>>();
  p.deviation = j.at("deviation").get<std::vector<double>>();
  p.weighted_sup = j.at("weighted_sup").get<double>();
  return p;
}

void write_csv(const std::filesystem::path& path, const ScreeningProfile& p) {
  std::string out = "r,z_mueller,z_tf,deviation\n";
  for (std::size_t i = 0; i < p.radii.size(); ++i) {
    out += io::format_double(p.radii[i]) + ',' + io::format_double(p.z_mueller[i]) + ',' +
           io::format_double(p.z_tf[i]) + ',' + io::format_double(p.deviation[i]) + '\n';
  }
  io::atomic_write(path, out);
}

double ComparisonReport::get(std::string_view key) const {
  for (const auto* v : {&terms, &aux, &params}) {
    for (const auto& [k, x] : *v) {
      if (k == key) return x;
    }
  }
  throw std::out_of_range("ComparisonReport: no field '" + std::string(key) + "'");
}

bool ComparisonReport::flagged(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

nlohmann::ordered_json to_json(const ComparisonReport& r) {
  nlohmann::ordered_json j;
  j["report"] = r.name;
  j["params"] = named(r.params);
  j["lhs"] = number(r.lhs);
  j["terms"] = named(r.terms);
  j["rhs"] = number(r.rhs);
  j["monitored_constant"] = number(r.monitored_constant);
  j["aux"] = named(r.aux);
  j["flags"] = r.flags;
  return j;
}

ComparisonReport comparison_report_from_json(const nlohmann::ordered_json& j) {
  ComparisonReport r;
  r.name = j.at("report").get<std::string>();
  r.params = named_from(j.at("params"));
  r.lhs = number_from(j.at("lhs"));
  r.terms = named_from(j.at("terms"));
  r.rhs = number_from(j.at("rhs"));
  r.monitored_constant = number_from(j.at("monitored_constant"));
  r.aux = named_from(j.at("aux"));
  r.flags = j.at("flags").get<std::vector<std::string>>();
  return r;
}

void write_csv(const std::filesystem::path& path, std::span<const ComparisonReport> reports) {
  auto keys = [](const std::vector<std::pair<std::string, double>>& v) {
    std::vector<std::string> k;
    for (const auto& e : v) k.push_back(e.first);
    return k;
  };
  std::string out = "report";
  if (!reports.empty()) {
    const auto& f = reports.front();
    for (const auto& k : keys(f.params)) out += ',' + k;
    out += ",lhs";
    for (const auto& k : keys(f.terms)) out += ',' + k;
    out += ",rhs,monitored_constant";
    for (const auto& k : keys(f.aux)) out += ',' + k;
  }
  out += ",flags\n";
  for (const auto& r : reports) {
    const auto& f = reports.front();
    if (r.name != f.name || keys(r.params) != keys(f.params) || keys(r.terms) != keys(f.terms) ||
        keys(r.aux) != keys(f.aux)) {
      throw std::invalid_argument("write_csv: reports differ in layout");
    }
    out += r.name;
    for (const auto& [k, x] : r.params) out += ',' + io::format_double(x);
    out += ',' + io::format_double(r.lhs);
    for (const auto& [k, x] : r.terms) out += ',' + io::format_double(x);
    out += ',' + io::format_double(r.rhs) + ',' + io::format_double(r.monitored_constant);
    for (const auto& [k, x] : r.aux) out += ',' + io::format_double(x);
    out += ',';
    for (std::size_t i = 0; i < r.flags.size(); ++i) out += (i ? ";" : "") + r.flags[i];
    out += '\n';
  }
  io::atomic_write(path, out);
}

ComparisonReport exterior_l1_report(const ChannelDensityMatrix& gamma0, double Z, double r, double s, double lambda) {
  if (!(r > 0.0) || !(s > 0.0)) throw std::invalid_argument("exterior_l1_report: need r, s > 0");
  check_lambda(lambda);
  const Density rho = density_of(gamma0);
  const CutoffPair cut = make_cutoff(gamma0.grid_ptr(), r, lambda);
  const double z_r = screened_charge(rho, Z, r);
  const double kin = localized_kinetic(gamma0, cut.eta);
  const double s2t = s * s * kin;
  ComparisonReport rep;
  rep.name = "exterior_l1";
  rep.params = {{"Z", Z}, {"N", gamma0.trace()}, {"r", r}, {"s", s}, {"lambda", lambda}};
  rep.lhs = exterior_mass(rho, r);
  rep.terms = {{"shell_mass", shell_mass(rho, r, (1.0 + lambda) * (1.0 + lambda) * r)},
               {"screened_charge_plus", plus(z_r)},
               {"s", s},
               {"inv_lambda2_s", 1.0 / (lambda * lambda * s)},
               {"inv_lambda", 1.0 / lambda},
               {"s2_kinetic_3_5", std::pow(s2t, 0.6)},
               {"s2_kinetic_1_3", std::cbrt(s2t)}};
  rep.aux = {{"screened_charge", z_r}, {"kinetic_eta", kin}, {"eta_shape_constant", cut.shape_constant}};
  finish(rep);
  return rep;
}

ComparisonReport d_comparison(const ChannelDensityMatrix& gamma0, double Z, double r, double s, double lambda) {
  if (!(s > 0.0) || !(r > 0.0)) throw std::invalid_argument("d_comparison: need r, s > 0");
  check_lambda(lambda);
  const Density rho = density_of(gamma0);
  const CutoffPair cut = make_cutoff(gamma0.grid_ptr(), r, lambda);
  const double z_r = screened_charge(rho, Z, r);
  const double z_in = screened_charge(rho, Z, (1.0 - lambda) * r);
  const GridPtr tf_grid = screening_tf_grid(Z);
  const TFSolution ext = solve_exterior_tf(z_r, r, tf_grid);
  const RadialFunction local = resample(cut.eta * cut.eta * rho, tf_grid);
  const double lhs = direct_energy(local - ext.rho);
  const double mass_out = exterior_mass(rho, r);
  const double kin = localized_kinetic(gamma0, cut.eta);

  ComparisonReport rep;
  rep.name = "d_comparison";
  rep.params = {{"Z", Z}, {"N", gamma0.trace()}, {"r", r}, {"s", s}, {"lambda", lambda}};
  rep.lhs = lhs;
  rep.terms = {{"inv_s2_exterior_mass", mass_out / (s * s)},
               {"screened_charge_term", std::pow(plus(z_r), 2.4) * std::pow(r, -0.2) * std::pow(s, 0.4)},
               {"remainder_shell", (1.0 + 1.0 / (lambda * r * lambda * r)) *
                                       shell_mass(rho, (1.0 - lambda) * r, (1.0 + lambda) * r)},
               {"remainder_inner_charge", lambda * std::sqrt(r) * std::pow(plus(z_in), 2.5)},
               {"remainder_kinetic", std::sqrt(kin * mass_out)}};
  rep.aux = {{"screened_charge", z_r},
             {"screened_charge_inner", z_in},
             {"exterior_tf_mass", ext.mass},
             {"exterior_mass", mass_out},
             {"kinetic_eta", kin}};
  if (r < s) rep.flags.push_back("r_below_s");
  if (z_r <= 0.0) rep.flags.push_back("nonpositive_screened_charge");
  if (lhs < 0.0) rep.flags.push_back("negative_coulomb_energy");
  finish(rep);
  return rep;
}

ComparisonReport coulomb_norm_bound(const RadialFunction& f, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("coulomb_norm_bound: r must be positive");
  const double lhs = std::abs(interior_mass(f, r));
  const double l53 = integrate3d_origin(map_values(f, [](double x) { return std::pow(std::abs(x), 5.0 / 3.0); }));
  const double norm = std::pow(l53, 0.6);
  const double d = direct_energy(f);
  ComparisonReport rep;
  rep.name = "coulomb_norm_bound";
  rep.params = {{"r", r}};
  rep.lhs = lhs;
  rep.terms = {{"norm_product", std::pow(norm, 5.0 / 6.0) * std::pow(plus(d), 1.0 / 12.0) * std::pow(r, 13.0 / 12.0)}};
  rep.aux = {{"norm_5_3", norm}, {"coulomb_energy", d}};
  if (d < 0.0) rep.flags.push_back("negative_coulomb_energy");
  finish(rep);
  if (rep.flagged("zero_rhs") && lhs > 0.0) rep.flags.push_back("zero_coulomb_energy_nonzero_mass");
  return rep;
}

ComparisonReport apriori_report(const ChannelDensityMatrix& gamma0, double Z, double r, double lambda) {
  if (!(r > 0.0)) throw std::invalid_argument("apriori_report: r must be positive");
  check_lambda(lambda);
  const Density rho = density_of(gamma0);
  const CutoffPair cut = make_cutoff(gamma0.grid_ptr(), r, lambda);
  const double mass = exterior_mass(rho, r);
  const double l53 = exterior_mass(map_values(rho, [](double x) { return std::pow(x, 5.0 / 3.0); }), r);
  const double kin = localized_kinetic(gamma0, cut.eta);
  const double r3 = r * r * r, r7 = r3 * r3 * r;
  ComparisonReport rep;
  rep.name = "apriori";
  rep.params = {{"Z", Z}, {"N", gamma0.trace()}, {"r", r}, {"lambda", lambda}};
  rep.lhs = mass;
  rep.terms = {{"r_pow_m3", 1.0 / r3}};
  rep.aux = {{"exterior_l53", l53},
             {"kinetic_eta", kin},
             {"weighted_mass", mass * r3},
             {"weighted_l53", l53 * r7},
             {"weighted_kinetic", kin * r7}};
  finish(rep);
  rep.monitored_constant = std::max({mass * r3, l53 * r7, kin * r7});
  if (lambda < 0.5 * r) rep.flags.push_back("lambda_below_half_r");
  return rep;
}

KeyIdentityCheck key_identity_check(const ChannelDensityMatrix& gamma0, double Z, double r, double R,
                                    const TFSolution* tf) {
  if (!(r > 0.0) || R < r) throw std::invalid_argument("key_identity_check: need 0 < r <= R");
  const TFSolution full = full_tf(Z, tf);
  const Density rho = density_of(gamma0);
  KeyIdentityCheck k;
  k.z_r = screened_charge(rho, Z, r);
  k.negative_charge = k.z_r < 0.0;
  const TFSolution ext = solve_exterior_tf(k.z_r, r, full.rho.grid_ptr());

  const double tf_inside = interior_mass(full.rho, R);
  const double tf_outside = tf_screened_charge(full, R);
  const double rho_inside = interior_mass(rho, R);
  const double ext_inside = shell_mass(ext.rho, r, R);
  // tf_screened_charge is the exterior mass only for positive charge.
  const double ext_outside = ext.z > 0.0 ? tf_screened_charge(ext, R) : exterior_mass(ext.rho, R);
  const double rho_shell = shell_mass(rho, r, R);

  k.lhs = tf_inside - rho_inside;
  k.rhs = (ext_inside - rho_shell) + (ext_outside - tf_outside);
  k.defect = std::abs(k.lhs - k.rhs);
  return k;
}

double sphere_average_positive_part(const std::array<double, 3>& z) {
  using boost::math::quadrature::gauss_kronrod;
  const double rz = std::hypot(z[0], z[1]);
  const double phi_z = std::atan2(z[1], z[0]);
  // ν·z = a cos(φ − φ_z) + b with a = sinθ |z_⊥|, b = cosθ z₃.
  auto ring = [&](double theta) {
    const double a = std::sin(theta) * rz, b = std::cos(theta) * z[2];
    auto f = [&](double phi) { return plus(a * std::cos(phi - phi_z) + b); };
    std::vector<double> cuts{phi_z - kPi, phi_z + kPi};
    if (a > std::abs(b)) {
      const double c = std::acos(-b / a);
      cuts.insert(cuts.begin() + 1, {phi_z - c, phi_z + c});
    }
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      acc += gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], 10, 1e-13);
    }
    return acc * std::sin(theta);
  };
  const double t1 = std::atan2(std::abs(z[2]), rz);
  std::vector<double> cuts{0.0, t1, kPi - t1, kPi};
  std::sort(cuts.begin(), cuts.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) acc += gauss_kronrod<double, 31>::integrate(ring, cuts[i], cuts[i + 1], 10, 1e-12);
  }
  return acc / (4.0 * kPi);
}

}  // namespace mtf
