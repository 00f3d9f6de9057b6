#pragma once
// Müller density-matrix functional: evaluation, minimization in the channel
// ansatz, localization and critical electron numbers.

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "muellertf/coulomb.hpp"
#include "muellertf/density_matrix.hpp"
#include "muellertf/grid.hpp"

namespace mtf {

struct MuellerOptions {
  int l_max = 2;
  int k_max = 4;
  /// Grid r_min = grid_r_min / Z.
  double grid_r_min = 1e-6;
  double grid_r_max = 100.0;
  std::size_t grid_n = 4000;
  /// Stationarity target: square root of the preconditioned orbital Newton
  /// decrement plus the occupation KKT residual.
  double tol = 1e-6;
  int max_iter = 4000;
  double n_floor = 1e-12;
  /// Flatness threshold for the chemical potential.
  double mu_tol = 1e-4;
  /// Sweep step in N; also the finite-difference step of chemical_potential.
  double dN = 0.05;
  /// Consecutive flat sweep points that end an ionization sweep.
  int flat_points = 3;
  /// First N of the sweep; 0 selects dN·round((Z − 1/2)/dN), at least dN.
  double sweep_start = 0.0;
  /// Last N of the sweep; 0 selects min(capacity, 2Z + 4(Z^{2/3} + 1)).
  double sweep_max = 0.0;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
  double capacity() const;
};

GridPtr mueller_grid(double Z, const MuellerOptions& opts);

/// Radial kinetic form ∫ u'² + ℓ(ℓ+1) u²/r² dr with u piecewise linear,
/// u(0) = 0 and the node values as given.
double radial_kinetic(const RadialGrid& grid, int l, const Eigen::Ref<const Eigen::VectorXd>& u);

/// Tr(−Δγ) from the radial kinetic form of every orbital.
double kinetic_energy(const ChannelDensityMatrix& gamma);

/// Tr(−Δγ) − Z∫ρ_γ/|x| + D(ρ_γ) − X(γ^{1/2}). Throws std::domain_error when
/// the kinetic energy is not finite.
EnergyBreakdown evaluate(const ChannelDensityMatrix& gamma, double Z);

struct MuellerResult {
  double Z = 0.0;
  double N = 0.0;
  ChannelDensityMatrix gamma;
  EnergyBreakdown breakdown;
  /// Lagrange multiplier of the trace constraint (dE/dN at fixed orbitals).
  double chemical_potential = 0.0;
  int iterations = 0;
  bool converged = false;
  double stationarity = 0.0;
  std::vector<double> energy_history;
  /// Fraction of the electrons beyond r_max/2.
  double tail_mass_fraction = 0.0;
};

/// Minimizes the Müller functional over channel density matrices with trace
/// N. `warm` (same grid) seeds the orbitals. Never throws on non-convergence;
/// the best iterate is returned with converged = false.
MuellerResult minimize(double Z, double N, const MuellerOptions& opts, const ChannelDensityMatrix* warm = nullptr);

/// Occupations minimizing the functional at fixed orbitals, with trace N.
/// Returns the multiplier of the trace constraint.
double optimize_occupations(ChannelDensityMatrix& gamma, double Z, double N, double n_floor = 1e-12);

class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (Ē(N+h) − E(N−h)) / (2h), h = opts.dN, with Ē(N+h) = min(E(N+h), E(N−h)):
/// charge sent to infinity costs nothing, so the energy never rises with N.
/// E(0) = 0 is used when N ≤ h. Throws SweepError when either minimization
/// does not converge.
double chemical_potential(double Z, double N, const MuellerOptions& opts);

struct SweepPoint {
  double N = 0.0;
  /// Energy of the computed minimizer.
  double energy = 0.0;
  /// Running minimum of energy over the sweep up to N.
  double envelope = 0.0;
  /// Central difference of the envelope.
  double mu = 0.0;
  /// Central difference of the raw energies; positive values are a finite
  /// box artifact.
  double raw_mu = 0.0;
  double multiplier = 0.0;
  bool converged = false;
  int iterations = 0;
  double tail_mass_fraction = 0.0;
};

struct IonizationSweep {
  double Z = 0.0;
  double mu_tol = 0.0;
  double dN = 0.0;
  int l_max = 0;
  int k_max = 0;
  std::vector<SweepPoint> points;
  /// Largest sweep N with mu < −mu_tol.
  double N_c = 0.0;
  bool reached_flat = false;
  bool all_converged = false;
};

/// Sweep N upward with warm starts until opts.flat_points consecutive points
/// are flat. `progress` is called after each point.
IonizationSweep ionization_sweep(double Z, const MuellerOptions& opts,
                                 const std::function<void(const SweepPoint&)>& progress = {});

/// N_c of ionization_sweep. Throws SweepError if flatness is not reached.
double critical_electron_number(double Z, const MuellerOptions& opts);

/// χγχ re-expressed in channel form.
ChannelDensityMatrix localize(const ChannelDensityMatrix& gamma, const RadialFunction& chi);

/// tγ_a + (1−t)γ_b re-expressed in channel form (same grid).
ChannelDensityMatrix convex_combination(const ChannelDensityMatrix& a, const ChannelDensityMatrix& b, double t);

/// Smooth radial partition χ₁² + χ₂² = 1: χ₁ = cos θ, χ₂ = sin θ with θ rising
/// from 0 to π/2 on [r − w/2, r + w/2]. A zero width gives a sharp step.
std::pair<RadialFunction, RadialFunction> radial_partition(const GridPtr& grid, double r, double width);

/// Tr(−Δχ₁γχ₁) + Tr(−Δχ₂γχ₂) − Tr(−Δγ) − ∫(|∇χ₁|² + |∇χ₂|²)ρ_γ. Throws
/// std::invalid_argument if χ₁² + χ₂² differs from 1 by more than 1e-10.
double ims_defect(const ChannelDensityMatrix& gamma, const RadialFunction& chi1, const RadialFunction& chi2);

/// 𝓔(χ₁γχ₁) + 𝓔_{Z=0}(χ₂γχ₂) − 𝓔(γ).
double binding_gap(const ChannelDensityMatrix& gamma, double Z, const RadialFunction& chi1,
                   const RadialFunction& chi2);

/// Channels as meta.json (ℓ, occupations, grid) plus one CSV per channel
/// with columns r,u0,u1,...
void save_gamma(const ChannelDensityMatrix& gamma, const std::filesystem::path& dir);
ChannelDensityMatrix load_gamma(const std::filesystem::path& dir);

/// result.json (breakdown, history, flags) plus save_gamma into dir/gamma.
void save_result(const MuellerResult& res, const std::filesystem::path& dir);
MuellerResult load_result(const std::filesystem::path& dir);

}  // namespace mtf
