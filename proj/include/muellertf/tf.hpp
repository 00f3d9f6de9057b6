#pragma once
// Thomas-Fermi theory: full and exterior minimizers, Sommerfeld asymptotics
// and TF screened charges.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "muellertf/grid.hpp"

namespace mtf {

namespace tf {
inline constexpr double pi = std::numbers::pi;
/// c^TF = (3/5)(6π²)^{2/3}.
inline const double c_tf = 0.6 * std::cbrt(36.0 * pi * pi * pi * pi);
/// Semiclassical constant L_sc = (15π²)⁻¹.
inline constexpr double L_sc = 1.0 / (15.0 * pi * pi);
/// a^TF = 4 (5 c^TF)³ / (3π²).
inline const double a_tf = 4.0 * std::pow(5.0 * c_tf, 3) / (3.0 * pi * pi);
/// ζ = (√73 − 7)/2.
inline const double zeta = (std::sqrt(73.0) - 7.0) / 2.0;
/// Sommerfeld density coefficient (5 c^TF / π)³.
inline const double sommerfeld_coefficient = std::pow(5.0 * c_tf / pi, 3);
/// ρ = [φ]_+^{3/2} / (6π²) solves (5c^TF/3) ρ^{2/3} = [φ]_+.
inline constexpr double density_factor = 1.0 / (6.0 * pi * pi);
/// u = rφ obeys u'' = κ [u]_+^{3/2} / √r with κ = 4π · density_factor.
inline constexpr double kappa = 2.0 / (3.0 * pi);
/// TF length (3π/2)^{2/3} Z^{-1/3}: y(x) = u(bx)/Z solves y'' = y^{3/2}/√x.
inline double length_scale(double Z) { return std::pow(1.5 * pi, 2.0 / 3.0) / std::cbrt(Z); }
}  // namespace tf

struct TFOptions {
  /// RK4 steps per grid interval.
  int substeps = 4;
  /// Two bracketing trajectories are considered equal while their relative
  /// difference stays below this.
  double agree_tol = 1e-11;
  /// Initial upper bracket for the first shooting parameter; 0 = automatic.
  double initial_bracket = 0.0;
  int max_stages = 64;
};

struct TFSolution {
  double z = 0.0;
  double r_inner = 0.0;
  Density rho;
  RadialFunction phi;
  /// −u'(r) at the start: the initial slope (full) or ∫_{|y|>r} ρ/|y| (exterior).
  double shoot_param = 0.0;
  /// max over r > r_inner of |φ − (zχ/r − ρ*|x|⁻¹)| relative to z/r.
  double residual = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  int stages = 0;

  bool full() const { return r_inner == 0.0; }
  const RadialGrid& grid() const { return rho.grid(); }
};

class TFError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Neutral full TF atom. Throws TFError when the shooting cannot bracket.
TFSolution solve_tf(double Z, GridPtr grid, const TFOptions& opts = {});

/// Exterior TF problem with support in {|x| >= r} and charge z.
TFSolution solve_exterior_tf(double z, double r, GridPtr grid, const TFOptions& opts = {});

/// 𝓔_r^TF(ρ) = c^TF∫ρ^{5/3} − z∫_{|x|>r} ρ/|x| + D(ρ) for a density supported in
/// {|x| >= r}. For r = 0 the analytic r^{-3/2} cusp below the first node is
/// added.
double tf_energy(const RadialFunction& rho, double z, double r_inner);

/// max |(5c^TF/3) ρ^{2/3} − [φ]_+| / max(1, [φ]_+) over nodes with r > r_inner.
double tf_equation_residual(const TFSolution& sol);

/// δ(x) = ρ(x) x⁶ / (5c^TF/π)³ − 1, with ρ interpolated in log-log.
double sommerfeld_deviation(const TFSolution& sol, double x);

struct SommerfeldFit {
  double x_lo = 0.0;
  double x_hi = 0.0;
  /// Least-squares slope of log|δ| against log x; ≈ −ζ in the asymptotic range.
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
  double max_deviation = 0.0;
  double min_deviation = 0.0;
  /// |δ| decreasing along the window.
  bool monotone = false;
};

/// Fit over grid nodes with x in [x_lo, x_hi].
SommerfeldFit fit_sommerfeld(const TFSolution& sol, double x_lo, double x_hi);

/// z − ∫_{|x|<r} ρ, evaluated as the exterior mass (the minimizers are neutral).
double tf_screened_charge(const TFSolution& sol, double r);

/// TFSolution on disk: rho.csv, phi.csv and meta.json in one directory.
void save_tf(const TFSolution& sol, const std::filesystem::path& dir);
TFSolution load_tf(const std::filesystem::path& dir);

}  // namespace mtf
