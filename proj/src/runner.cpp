#include "muellertf/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

#include "json.hpp"
#include "muellertf/io.hpp"
#include "muellertf/screening.hpp"
#include "muellertf/semiclassics.hpp"
#include "muellertf/tf.hpp"

namespace mtf {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string csv_row(std::initializer_list<double> v) {
  std::string out;
  bool first = true;
  for (double x : v) {
    out += (first ? "" : ",") + io::format_double(x);
    first = false;
  }
  return out + "\n";
}

// Artifacts and metrics collected for the manifest.
class Run {
 public:
  Run(const ExperimentConfig& c, std::ostream& log) : c_(c), log_(log) {}

  const ExperimentConfig& config() const { return c_; }
  fs::path dir(const std::string& sub = {}) const { return sub.empty() ? c_.out : c_.out / sub; }

  void write(const fs::path& rel, const std::string& text) {
    const fs::path p = c_.out / rel;
    fs::create_directories(p.parent_path());
    io::atomic_write(p, text);
    add_file(rel);
  }
  void add_file(const fs::path& rel) {
    std::lock_guard lock(m_);
    files_.push_back(rel.generic_string());
  }
  void metric(const std::string& key, double value) {
    std::lock_guard lock(m_);
    metrics_[key] = value;
  }
  void not_converged(const std::string& what) {
    std::lock_guard lock(m_);
    converged_ = false;
    problems_.push_back(what);
  }
  void say(const std::string& line) {
    std::lock_guard lock(m_);
    log_ << line << '\n';
  }

  int finish() {
    std::sort(files_.begin(), files_.end());
    files_.erase(std::unique(files_.begin(), files_.end()), files_.end());
    std::sort(problems_.begin(), problems_.end());
    ojson m;
    m["command"] = to_string(c_.command);
    m["config_hash"] = config_hash(c_);
    m["code_version"] = code_version();
    m["seed"] = c_.seed;
    m["converged"] = converged_;
    m["problems"] = problems_;
    m["files"] = files_;
    ojson metrics = ojson::object();
    for (const auto& [k, v] : metrics_) metrics[k] = std::isfinite(v) ? ojson(v) : ojson(nullptr);
    m["metrics"] = metrics;
    ExperimentConfig placed = c_;
    placed.out = ".";
    m["config"] = to_ini(placed);
    io::atomic_write(c_.out / "manifest.json", m.dump(2) + "\n");
    return converged_ ? exit_code::ok : exit_code::not_converged;
  }

 private:
  const ExperimentConfig& c_;
  std::ostream& log_;
  std::mutex m_;
  std::vector<std::string> files_;
  std::vector<std::string> problems_;
  std::map<std::string, double> metrics_;
  bool converged_ = true;
};

// Subdirectory for case i when there are several, the root otherwise.
std::string case_dir(std::size_t count, const std::string& name) { return count > 1 ? name : std::string(); }

GridPtr tf_grid(const ExperimentConfig& c, double Z) { return RadialGrid::logarithmic(c.tf_r_min / Z, c.tf_r_max, c.tf_n); }

void save_tf_into(Run& run, const TFSolution& sol, const std::string& sub) {
  const fs::path d = run.dir(sub);
  fs::create_directories(d);
  save_tf(sol, d);
  for (const char* f : {"rho.csv", "phi.csv", "meta.json"}) run.add_file(fs::path(sub) / f);
}

double electrons(const ExperimentConfig& c, double Z) { return c.N > 0.0 ? c.N : Z; }

MuellerResult solve_mueller(Run& run, double Z, double N) {
  MuellerResult res = minimize(Z, N, run.config().mueller);
  const std::string key = "Z=" + fmt(Z);
  if (!res.converged) run.not_converged(key + ": Mueller minimization did not converge");
  run.say(key + " N=" + fmt(N) + " E=" + io::format_double(res.breakdown.total) +
          (res.converged ? "" : " (not converged)"));
  return res;
}

std::vector<double> profile_radii(const ExperimentConfig& c, const RadialGrid& g) {
  if (!c.radii.empty()) return c.radii;
  std::vector<double> r{g.r_min()};
  for (int k = -18; k <= 12; ++k) {
    const double x = std::pow(10.0, k / 6.0);
    if (x > g.r_min() && x < g.r_max()) r.push_back(x);
  }
  r.push_back(g.r_max());
  return r;
}

// ---------------------------------------------------------------------------

void tf_solve(Run& run) {
  const auto& c = run.config();
  std::vector<TFSolution> sols(c.Z.size());
  parallel_for(c.Z.size(), c.threads, [&](std::size_t i) { sols[i] = solve_tf(c.Z[i], tf_grid(c, c.Z[i])); });
  std::string table = "Z,mass,energy,energy_per_Z73,initial_slope,residual\n";
  for (std::size_t i = 0; i < sols.size(); ++i) {
    const auto& s = sols[i];
    const double Z = c.Z[i];
    save_tf_into(run, s, case_dir(sols.size(), "Z_" + fmt(Z)));
    const double slope = s.shoot_param * tf::length_scale(Z) / Z;
    table += csv_row({Z, s.mass, s.energy, s.energy / std::pow(Z, 7.0 / 3.0), slope, s.residual});
    const std::string k = "Z=" + fmt(Z) + "/";
    run.metric(k + "mass", s.mass);
    run.metric(k + "energy", s.energy);
    run.metric(k + "initial_slope", slope);
    run.say("Z=" + fmt(Z) + " mass=" + io::format_double(s.mass) + " E=" + io::format_double(s.energy));
  }
  run.write("tf.csv", table);
}

void exterior_tf(Run& run) {
  const auto& c = run.config();
  std::vector<std::pair<double, double>> cases;
  for (double z : c.z)
    for (double r : c.r) cases.emplace_back(z, r);
  std::vector<TFSolution> sols(cases.size());
  const GridPtr grid = RadialGrid::logarithmic(c.tf_r_min, c.tf_r_max, c.tf_n);
  parallel_for(cases.size(), c.threads,
               [&](std::size_t i) { sols[i] = solve_exterior_tf(cases[i].first, cases[i].second, grid); });
  std::string table = "z,r,mass,energy,shoot_param,residual\n";
  for (std::size_t i = 0; i < sols.size(); ++i) {
    const auto [z, r] = cases[i];
    const auto& s = sols[i];
    save_tf_into(run, s, case_dir(sols.size(), "z_" + fmt(z) + "_r_" + fmt(r)));
    table += csv_row({z, r, s.mass, s.energy, s.shoot_param, s.residual});
    const std::string k = "z=" + fmt(z) + ",r=" + fmt(r) + "/";
    run.metric(k + "mass", s.mass);
    run.metric(k + "energy", s.energy);
  }
  run.write("exterior.csv", table);
}

ojson fit_json(const SommerfeldFit& f) {
  ojson j;
  j["x_lo"] = f.x_lo;
  j["x_hi"] = f.x_hi;
  j["slope"] = f.slope;
  j["intercept"] = f.intercept;
  j["points"] = f.points;
  j["max_deviation"] = f.max_deviation;
  j["min_deviation"] = f.min_deviation;
  j["monotone"] = f.monotone;
  return j;
}

void sommerfeld_check(Run& run) {
  const auto& c = run.config();
  ojson out;
  out["zeta"] = tf::zeta;
  out["full"] = ojson::array();
  std::vector<TFSolution> sols(c.Z.size());
  parallel_for(c.Z.size(), c.threads, [&](std::size_t i) { sols[i] = solve_tf(c.Z[i], tf_grid(c, c.Z[i])); });
  for (std::size_t i = 0; i < sols.size(); ++i) {
    const double Z = c.Z[i];
    const double b = tf::length_scale(Z);
    const auto fit = fit_sommerfeld(sols[i], c.window_lo * b, c.window_hi * b);
    const double edge = c.window_hi * b;
    const double ratio = tf_screened_charge(sols[i], edge) * edge * edge * edge / tf::a_tf;
    ojson j = fit_json(fit);
    j["Z"] = Z;
    j["screened_charge_ratio_at_edge"] = ratio;
    out["full"].push_back(j);
    const std::string k = "Z=" + fmt(Z) + "/";
    run.metric(k + "max_deviation", fit.max_deviation);
    run.metric(k + "slope", fit.slope);
    run.metric(k + "screened_charge_ratio", ratio);
  }
  out["exterior"] = ojson::array();
  const GridPtr grid = RadialGrid::logarithmic(c.tf_r_min, c.tf_r_max, c.tf_n);
  for (double z : c.z) {
    if (!(z > 0.0)) continue;
    for (double r : c.r) {
      const auto sol = solve_exterior_tf(z, r, grid);
      const double b = tf::length_scale(z);
      const double lo = std::max(c.window_lo * b, 10.0 * r);
      const auto fit = fit_sommerfeld(sol, lo, lo * c.window_hi / c.window_lo);
      ojson j = fit_json(fit);
      j["z"] = z;
      j["r"] = r;
      j["kappa"] = z * r * r * r;
      out["exterior"].push_back(j);
      run.metric("z=" + fmt(z) + ",r=" + fmt(r) + "/slope", fit.slope);
    }
  }
  run.write("sommerfeld.json", out.dump(2) + "\n");
}

void mueller_solve(Run& run) {
  const auto& c = run.config();
  std::vector<MuellerResult> res(c.Z.size());
  parallel_for(c.Z.size(), c.threads, [&](std::size_t i) { res[i] = solve_mueller(run, c.Z[i], electrons(c, c.Z[i])); });
  std::string table = "Z,N,energy,kinetic,external,direct,exchange,chemical_potential,iterations,converged\n";
  for (std::size_t i = 0; i < res.size(); ++i) {
    const auto& r = res[i];
    const std::string sub = case_dir(res.size(), "Z_" + fmt(r.Z));
    fs::create_directories(run.dir(sub));
    save_result(r, run.dir(sub));
    run.add_file(fs::path(sub) / "result.json");
    const auto& b = r.breakdown;
    table += csv_row({r.Z, r.N, b.total, b.kinetic, b.external, b.direct, b.exchange, r.chemical_potential,
                      static_cast<double>(r.iterations), r.converged ? 1.0 : 0.0});
    const std::string k = "Z=" + fmt(r.Z) + "/";
    run.metric(k + "energy", b.total);
    run.metric(k + "stationarity", r.stationarity);
  }
  run.write("mueller.csv", table);
}

void ionization_sweep_cmd(Run& run) {
  const auto& c = run.config();
  std::vector<IonizationSweep> sweeps(c.Z.size());
  parallel_for(c.Z.size(), c.threads, [&](std::size_t i) {
    const double Z = c.Z[i];
    sweeps[i] = ionization_sweep(Z, c.mueller, [&](const SweepPoint& p) {
      run.say("Z=" + fmt(Z) + " N=" + io::format_double(p.N) + " E=" + io::format_double(p.energy));
    });
  });
  std::string table = "Z,N_c,N_c_minus_Z,reached_flat,all_converged,bound_constant\n";
  ojson js = ojson::array();
  double monitor = 0.0;
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    const auto& s = sweeps[i];
    std::string pts = "N,energy,envelope,mu,raw_mu,multiplier,converged,iterations,tail_mass_fraction\n";
    for (const auto& p : s.points) {
      pts += csv_row({p.N, p.energy, p.envelope, p.mu, p.raw_mu, p.multiplier, p.converged ? 1.0 : 0.0,
                      static_cast<double>(p.iterations), p.tail_mass_fraction});
    }
    run.write("sweep_Z_" + fmt(s.Z) + ".csv", pts);
    // Smallest C with N_c ≤ 2Z + C(Z^{2/3} + 1).
    const double bound_c = std::max(s.N_c - 2.0 * s.Z, 0.0) / (std::pow(s.Z, 2.0 / 3.0) + 1.0);
    monitor = std::max(monitor, bound_c);
    table += csv_row({s.Z, s.N_c, s.N_c - s.Z, s.reached_flat ? 1.0 : 0.0, s.all_converged ? 1.0 : 0.0, bound_c});
    ojson j;
    j["Z"] = s.Z;
    j["N_c"] = s.N_c;
    j["reached_flat"] = s.reached_flat;
    j["all_converged"] = s.all_converged;
    j["bound_constant"] = bound_c;
    js.push_back(j);
    const std::string k = "Z=" + fmt(s.Z) + "/";
    run.metric(k + "N_c", s.N_c);
    run.metric(k + "N_c_minus_Z", s.N_c - s.Z);
    if (!s.reached_flat || !s.all_converged) run.not_converged("Z=" + fmt(s.Z) + ": sweep incomplete");
  }
  // Least-squares slope of N_c − Z against Z.
  if (sweeps.size() >= 2) {
    double mz = 0.0, my = 0.0;
    for (const auto& s : sweeps) {
      mz += s.Z;
      my += s.N_c - s.Z;
    }
    mz /= static_cast<double>(sweeps.size());
    my /= static_cast<double>(sweeps.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& s : sweeps) {
      sxy += (s.Z - mz) * (s.N_c - s.Z - my);
      sxx += (s.Z - mz) * (s.Z - mz);
    }
    run.metric("excess_slope", sxy / sxx);
  }
  run.metric("bound_constant", monitor);
  run.write("ionization.csv", table);
  run.write("ionization.json", js.dump(2) + "\n");
}

void screen_compare(Run& run) {
  const auto& c = run.config();
  struct Case {
    MuellerResult res;
    TFSolution tf;
  };
  std::vector<Case> cases(c.Z.size());
  parallel_for(c.Z.size(), c.threads, [&](std::size_t i) {
    cases[i].res = solve_mueller(run, c.Z[i], electrons(c, c.Z[i]));
    cases[i].tf = solve_tf(c.Z[i], tf_grid(c, c.Z[i]));
  });
  std::string keys = "Z,r,R,screened_charge,lhs,rhs,defect,negative_charge\n";
  for (auto& [res, tf] : cases) {
    const double Z = res.Z;
    const auto radii = profile_radii(c, res.gamma.grid());
    const auto p = compare_profiles(res.gamma, Z, radii, c.epsilon, &tf);
    run.write("profile_Z_" + fmt(Z) + ".json", to_json(p).dump(2) + "\n");
    write_csv(run.dir("profile_Z_" + fmt(Z) + ".csv"), p);
    run.add_file("profile_Z_" + fmt(Z) + ".csv");
    const std::string k = "Z=" + fmt(Z) + "/";
    run.metric(k + "weighted_sup", p.weighted_sup);
    double worst = 0.0;
    for (double r : c.r) {
      for (double R : c.R) {
        if (R < r) continue;
        const auto kc = key_identity_check(res.gamma, Z, r, R, &tf);
        keys += csv_row({Z, r, R, kc.z_r, kc.lhs, kc.rhs, kc.defect, kc.negative_charge ? 1.0 : 0.0});
        if (!kc.negative_charge) worst = std::max(worst, kc.defect);
      }
    }
    run.metric(k + "key_identity_defect", worst);
  }
  run.write("key_identity.csv", keys);
}

void lemma_report(Run& run) {
  const auto& c = run.config();
  std::vector<MuellerResult> res(c.Z.size());
  parallel_for(c.Z.size(), c.threads, [&](std::size_t i) { res[i] = solve_mueller(run, c.Z[i], electrons(c, c.Z[i])); });
  std::vector<ComparisonReport> l1, dc, ap, cn;
  for (const auto& m : res) {
    const double Z = m.Z;
    const TFSolution tf = solve_tf(Z, tf_grid(c, Z));
    const RadialFunction diff = resample(density_of(m.gamma), tf.rho.grid_ptr()) - tf.rho;
    double worst_l1 = 0.0, worst_d = 0.0, worst_ap = 0.0, worst_cn = 0.0;
    for (double r : c.r) {
      for (double lambda : c.lambda) {
        ap.push_back(apriori_report(m.gamma, Z, r, lambda));
        worst_ap = std::max(worst_ap, ap.back().monitored_constant);
        for (double s : c.s) {
          l1.push_back(exterior_l1_report(m.gamma, Z, r, s, lambda));
          dc.push_back(d_comparison(m.gamma, Z, r, s, lambda));
          worst_l1 = std::max(worst_l1, l1.back().monitored_constant);
          worst_d = std::max(worst_d, dc.back().monitored_constant);
        }
      }
      cn.push_back(coulomb_norm_bound(diff, r));
      cn.back().params.insert(cn.back().params.begin(), {"Z", Z});
      worst_cn = std::max(worst_cn, cn.back().monitored_constant);
    }
    const std::string k = "Z=" + fmt(Z) + "/";
    run.metric(k + "exterior_l1", worst_l1);
    run.metric(k + "d_comparison", worst_d);
    run.metric(k + "apriori", worst_ap);
    run.metric(k + "coulomb_norm", worst_cn);
  }
  // Random signed Gaussian mixtures for the Coulomb-norm constant.
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> amp(-1.0, 1.0), width(0.2, 3.0), radius(0.1, 4.0);
  const GridPtr g = RadialGrid::logarithmic(1e-5, 30.0, 3000);
  std::vector<ComparisonReport> family;
  double sup = 0.0;
  for (int k = 0; k < 50; ++k) {
    std::array<double, 6> p{amp(rng), width(rng), amp(rng), width(rng), amp(rng), width(rng)};
    const double r = radius(rng);
    const auto f = RadialFunction::sample(g, [&](double x) {
      double v = 0.0;
      for (int j = 0; j < 3; ++j) v += p[2 * j] * std::exp(-x * x / (p[2 * j + 1] * p[2 * j + 1])) / std::pow(p[2 * j + 1], 3);
      return v;
    });
    family.push_back(coulomb_norm_bound(f, r));
    sup = std::max(sup, family.back().monitored_constant);
  }
  run.metric("coulomb_norm_family_sup", sup);

  ojson all = ojson::array();
  for (const auto* v : {&l1, &dc, &ap, &cn, &family})
    for (const auto& r : *v) all.push_back(to_json(r));
  run.write("reports.json", all.dump(2) + "\n");
  const std::vector<std::pair<std::string, const std::vector<ComparisonReport>*>> tables{
      {"exterior_l1.csv", &l1}, {"d_comparison.csv", &dc}, {"apriori.csv", &ap},
      {"coulomb_norm.csv", &cn}, {"coulomb_norm_family.csv", &family}};
  for (const auto& [name, v] : tables) {
    write_csv(run.dir(name), *v);
    run.add_file(name);
  }
}

void semiclassics_check(Run& run) {
  const auto& c = run.config();
  const GridPtr grid = RadialGrid::logarithmic(c.tf_r_min, c.tf_r_max, c.tf_n);
  struct Case {
    double z, r, s;
  };
  std::vector<Case> cases;
  for (double z : c.z)
    for (double r : c.r)
      for (double s : c.s) cases.push_back({z, r, s});
  std::vector<std::string> rows(cases.size());
  std::vector<ojson> reports(cases.size());
  std::vector<char> ok(cases.size(), 1);
  parallel_for(cases.size(), c.threads, [&](std::size_t i) {
    const auto [z, r, s] = cases[i];
    const auto sol = solve_exterior_tf(z, r, grid);
    const auto kin = coherent_kinetic(sol.phi, s);
    const auto smear = smearing_check(sol.phi, z, r, s);
    const auto lower = lower_bound_report(coherent_density(sol.phi, s));
    ok[i] = kin.exact <= kin.bound && smear.max_violation <= 1e-8 * std::max(smear.max_bound, 1.0);
    rows[i] = csv_row({z, r, s, kin.exact, kin.bound, smear.max_violation, smear.max_bound, lower.deficit});
    reports[i] = to_json(lower);
    reports[i]["z"] = z;
    reports[i]["r"] = r;
  });
  std::string table = "z,r,s,kinetic_exact,kinetic_bound,smearing_violation,smearing_bound,lower_bound_deficit\n";
  ojson all = ojson::array();
  int failed = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    table += rows[i];
    all.push_back(reports[i]);
    failed += ok[i] ? 0 : 1;
  }
  run.metric("failed_cases", failed);
  run.write("semiclassics.csv", table);
  run.write("lower_bound.json", all.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct Manifest {
  std::string run;
  std::string command;
  std::string hash;
  bool converged = true;
  std::vector<std::pair<std::string, double>> metrics;
};

std::vector<Manifest> read_manifests(const fs::path& dir) {
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() == "manifest.json") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<Manifest> out;
  for (const auto& p : paths) {
    const auto j = ojson::parse(io::read_file(p));
    Manifest m;
    const auto rel = fs::relative(p.parent_path(), dir).generic_string();
    m.run = rel.empty() ? "." : rel;
    m.command = j.at("command").get<std::string>();
    m.hash = j.at("config_hash").get<std::string>();
    m.converged = j.at("converged").get<bool>();
    for (const auto& [k, v] : j.at("metrics").items()) {
      m.metrics.emplace_back(k, v.is_null() ? std::nan("") : v.get<double>());
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (w <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

int run(const ExperimentConfig& config, std::ostream& log) {
  try {
    config.validate();
  } catch (const ConfigError& e) {
    log << e.what() << '\n';
    return exit_code::invalid_config;
  }
  try {
    fs::create_directories(config.out);
    Run r(config, log);
    switch (config.command) {
      case Command::TfSolve: tf_solve(r); break;
      case Command::ExteriorTf: exterior_tf(r); break;
      case Command::SommerfeldCheck: sommerfeld_check(r); break;
      case Command::MuellerSolve: mueller_solve(r); break;
      case Command::IonizationSweep: ionization_sweep_cmd(r); break;
      case Command::ScreenCompare: screen_compare(r); break;
      case Command::LemmaReport: lemma_report(r); break;
      case Command::SemiclassicsCheck: semiclassics_check(r); break;
    }
    return r.finish();
  } catch (const io::IoError& e) {
    log << "I/O failure: " << e.what() << '\n';
    return exit_code::io_failure;
  } catch (const fs::filesystem_error& e) {
    log << "I/O failure: " << e.what() << '\n';
    return exit_code::io_failure;
  } catch (const TFError& e) {
    log << "TF solver failed: " << e.what() << '\n';
    return exit_code::not_converged;
  } catch (const SweepError& e) {
    log << "sweep failed: " << e.what() << '\n';
    return exit_code::not_converged;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::failure;
  }
}

int report(const fs::path& dir, std::ostream& log, const std::optional<fs::path>& pins,
           const std::optional<fs::path>& write_pins) {
  try {
    if (!fs::is_directory(dir)) {
      log << "not a directory: " << dir.string() << '\n';
      return exit_code::invalid_config;
    }
    const auto manifests = read_manifests(dir);
    if (manifests.empty()) {
      log << "no manifest.json under " << dir.string() << '\n';
      return exit_code::invalid_config;
    }
    std::map<std::string, std::vector<const Manifest*>> families;
    for (const auto& m : manifests) families[m.command].push_back(&m);

    std::string md = "# Summary\n";
    std::string csv = "run,command,metric,value\n";
    for (const auto& [cmd, runs] : families) {
      md += "\n## " + cmd + "\n\n| run | metric | value |\n|---|---|---|\n";
      for (const auto* m : runs) {
        for (const auto& [k, v] : m->metrics) {
          md += "| " + m->run + " | " + k + " | " + io::format_double(v) + " |\n";
          csv += m->run + "," + cmd + "," + k + "," + io::format_double(v) + "\n";
        }
        if (!m->converged) md += "| " + m->run + " | converged | false |\n";
      }
    }

    const fs::path pin_path = pins ? *pins : dir / "pins.json";
    md += "\n## Regressions\n\n";
    if (fs::exists(pin_path)) {
      const auto pj = ojson::parse(io::read_file(pin_path));
      std::vector<std::string> drift;
      for (const auto& [key, spec] : pj.items()) {
        const auto slash = key.find(':');
        const std::string cmd = key.substr(0, slash), metric = key.substr(slash + 1);
        const double want = spec.at("value").get<double>();
        const double rel = spec.value("rel_tol", 0.0), abs = spec.value("abs_tol", 0.0);
        bool seen = false;
        for (const auto& m : manifests) {
          if (m.command != cmd) continue;
          for (const auto& [k, v] : m.metrics) {
            if (k != metric) continue;
            seen = true;
            const double tol = std::max(abs, rel * std::abs(want));
            if (!(std::abs(v - want) <= tol)) {
              drift.push_back("| " + m.run + " | " + key + " | " + io::format_double(v) + " | " + io::format_double(want) +
                              " | " + io::format_double(tol) + " |");
            }
          }
        }
        if (!seen) drift.push_back("| - | " + key + " | missing | " + io::format_double(want) + " | - |");
      }
      if (drift.empty()) {
        md += "none\n";
      } else {
        md += "| run | pin | value | pinned | tolerance |\n|---|---|---|---|---|\n";
        for (const auto& d : drift) md += d + "\n";
      }
    } else {
      md += "none (no pins)\n";
    }

    io::atomic_write(dir / "summary.md", md);
    io::atomic_write(dir / "summary.csv", csv);
    if (write_pins) {
      ojson pj = ojson::object();
      for (const auto& m : manifests) {
        for (const auto& [k, v] : m.metrics) {
          if (std::isfinite(v)) pj[m.command + ":" + k] = {{"value", v}, {"rel_tol", 1e-6}, {"abs_tol", 1e-12}};
        }
      }
      io::atomic_write(*write_pins, pj.dump(2) + "\n");
    }
    log << "summary written to " << (dir / "summary.md").string() << '\n';
    return exit_code::ok;
  } catch (const io::IoError& e) {
    log << "I/O failure: " << e.what() << '\n';
    return exit_code::io_failure;
  } catch (const nlohmann::json::exception& e) {
    log << "bad manifest or pins: " << e.what() << '\n';
    return exit_code::invalid_config;
  }
}

}  // namespace mtf
