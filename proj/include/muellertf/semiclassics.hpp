#pragma once
// Coherent-state semiclassics: mollifiers, smeared densities and both sides of
// the semiclassical kinetic bounds.

#include <string>

#include "json.hpp"
#include "muellertf/density_matrix.hpp"
#include "muellertf/grid.hpp"

namespace mtf {

/// g_s(x) = s^{-3/2} g(|x|/s) with g(t) = c·exp(−1/(1 − t²)) on t < 1 and
/// ∫g_s² = 1.
struct Mollifier {
  double s = 0.0;
  /// c, normalizing the unit-radius profile.
  double amplitude = 0.0;
  /// ∫|∇g_s|² = shape_constant / s².
  double dirichlet = 0.0;
  double shape_constant = 0.0;

  double value(double r) const;
  /// g_s(r)², the smearing weight.
  double weight(double r) const;
  double derivative(double r) const;
};

/// Throws std::invalid_argument for s <= 0 or non-finite s.
Mollifier make_mollifier(double s);
/// Also throws when s does not exceed the smallest node of `grid`.
Mollifier make_mollifier(double s, const RadialGrid& grid);

/// ∫_{R^3} f including the power-law piece below the first node.
double integrate3d_origin(const RadialFunction& f);

/// (f * g_s²)(|x|) on f's grid from the angular-average formula
/// (2π/r) ∫_0^s t g_s(t)² [F(r+t) − F(|r−t|)] dt, F(ρ) = ∫_0^ρ ρ' f(ρ') dρ'.
/// f vanishes beyond its last node.
RadialFunction smear(const RadialFunction& f, const Mollifier& g);

struct SemiclassicalState {
  RadialFunction V;
  double s = 0.0;
  /// (5/2) L_sc [V]_+^{3/2} * g_s².
  Density rho;
  /// Tr(−Δγ) of the coherent-state density matrix.
  double kinetic = 0.0;
  /// (5/2) L_sc ∫[V]_+^{3/2}.
  double trace = 0.0;
};

SemiclassicalState coherent_density(const RadialFunction& V, double s);

struct CoherentKinetic {
  /// (3/2) L_sc ∫[V]_+^{5/2} + ∫|∇g_s|² · (5/2) L_sc ∫[V]_+^{3/2}.
  double exact = 0.0;
  /// (3/2) L_sc ∫[V]_+^{5/2} + C s⁻² ∫[V]_+^{3/2} with C the mollifier's
  /// shape constant.
  double bound = 0.0;
};

CoherentKinetic coherent_kinetic(const RadialFunction& V, double s);

struct LowerBoundReport {
  double s = 0.0;
  /// Tr((−Δ − V)γ).
  double lhs = 0.0;
  /// L_sc ∫[V]_+^{5/2}.
  double t1 = 0.0;
  /// s⁻² Tr γ.
  double t2 = 0.0;
  /// (∫[V]_+^{5/2})^{3/5} (∫[V − V*g_s²]_+^{5/2})^{2/5}.
  double t3 = 0.0;
  /// (−lhs − t1)/(t2 + t3); the implied constant of the lower bound.
  double deficit = 0.0;
};

/// V is resampled onto γ's grid for the potential term.
LowerBoundReport lower_bound_report(const RadialFunction& V, double s, const ChannelDensityMatrix& gamma);
/// Same report for the coherent-state density matrix of `state`.
LowerBoundReport lower_bound_report(const SemiclassicalState& state);

nlohmann::ordered_json to_json(const LowerBoundReport& r);
LowerBoundReport lower_bound_report_from_json(const nlohmann::ordered_json& j);

struct SmearingCheck {
  /// max over x of [V − V*g_s²]_+(x) − [z]_+ (χ_r^+ − χ_{r+s}^+)(x)/x.
  double max_violation = 0.0;
  /// max of the right side, for scale.
  double max_bound = 0.0;
  double at = 0.0;
};

/// Pointwise comparison for V = φ_r^TF with charge z, on nodes x <= r_max − s.
SmearingCheck smearing_check(const RadialFunction& V, double z, double r, double s);

}  // namespace mtf
