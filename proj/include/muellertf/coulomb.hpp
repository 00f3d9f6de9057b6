#pragma once
// Coulomb energetics of radial densities and channel kernels.

#include <span>
#include <vector>

#include "muellertf/density_matrix.hpp"
#include "muellertf/grid.hpp"

namespace mtf {

struct EnergyBreakdown {
  double kinetic = 0.0;
  double external = 0.0;
  double direct = 0.0;
  double exchange = 0.0;
  double total = 0.0;

  static EnergyBreakdown from_terms(double kinetic, double external, double direct, double exchange) {
    return {kinetic, external, direct, exchange, kinetic + external + direct - exchange};
  }
};

/// (f * |x|⁻¹)(r) = Q(r)/r + ∫_r 4πs f(s) ds with Q(r) = ∫_{s<r} 4πs² f(s) ds.
RadialFunction hartree_potential(const RadialFunction& f);

/// ∫ f (g * |x|⁻¹) dx, evaluated as the symmetric part of the discrete
/// form so that D(f+g) = D(f) + D(g) + coulomb_pairing(f, g) to rounding.
double coulomb_pairing(const RadialFunction& f, const RadialFunction& g);

/// D(f) = ½ ∫ f (f * |x|⁻¹) dx. Sign-changing f allowed.
double direct_energy(const RadialFunction& f);

/// (ℓ ℓ' L; 0 0 0)² = ½ ∫_{-1}^{1} P_ℓ P_ℓ' P_L dx.
double angular_coefficient(int l1, int l2, int L);

/// Multipole radial kernels on one grid with r^L and r^{-L-1} tables.
class Multipole {
 public:
  Multipole(GridPtr grid, int L_max);

  int L_max() const { return L_max_; }
  const RadialGrid& grid() const { return *grid_; }

  /// Y^L(r) = r^{-L-1} ∫_{s<r} s^L g ds + r^L ∫_{s>r} s^{-L-1} g ds.
  void potential(std::span<const double> g, int L, std::span<double> out) const;
  /// R^L(a, b) = ∬ a(r) b(r') r_<^L / r_>^{L+1} dr dr'.
  double slater(std::span<const double> a, std::span<const double> b, int L) const;

 private:
  GridPtr grid_;
  int L_max_;
  std::vector<std::vector<double>> pow_;      // r^L
  std::vector<std::vector<double>> inv_pow_;  // r^{-L-1}
};

struct ExchangeResult {
  double value = 0.0;
  int L_max = 0;
  /// Sum of the multipole orders above L_max that were left out.
  double truncation_estimate = 0.0;
  bool truncated = false;
};

/// X(σ) = ½ ∬ |σ(x,y)|²/|x−y| for a channel kernel σ whose occupations are
/// its eigenvalues. L_max < 0 selects 2 ℓ_max, which is exact.
ExchangeResult exchange_energy(const ChannelDensityMatrix& sigma, int L_max = -1, double tol = 1e-10);

}  // namespace mtf
