#pragma once
// Screened charges, cutoff families and the comparison reports between the
// Müller minimizer and Thomas-Fermi theory.

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "muellertf/density_matrix.hpp"
#include "muellertf/grid.hpp"
#include "muellertf/tf.hpp"

namespace mtf {

/// Smooth step ψ(t) = e(t)/(e(t) + e(1−t)), e(t) = exp(−1/t) for t > 0.
double eta_profile(double t);
/// max ψ', so that |∇η_r| ≤ eta_shape_constant()/(λr).
double eta_shape_constant();

struct CutoffPair {
  double r = 0.0;
  double lambda = 0.0;
  /// 1(|x| >= r), with its jump as breakpoint.
  RadialFunction chi_plus;
  /// ψ((|x| − r)/(λr)).
  RadialFunction eta;
  double shape_constant = 0.0;
};

/// Throws std::invalid_argument unless r > 0 and λ ∈ (0, 1/2].
CutoffPair make_cutoff(const GridPtr& grid, double r, double lambda);

/// ∫_{|x|<r} ρ including the power-law piece below the first node.
double interior_mass(const RadialFunction& rho, double r);

/// Z − ∫_{|x|<r} ρ₀.
double screened_charge(const RadialFunction& rho0, double Z, double r);

struct ScreeningProfile {
  double Z = 0.0;
  double epsilon = 0.0;
  std::vector<double> radii;
  std::vector<double> z_mueller;
  std::vector<double> z_tf;
  /// |Z_r − Z_r^TF| = |∫_{|x|<r}(ρ₀ − ρ^TF)|.
  std::vector<double> deviation;
  /// max of deviation·min(1, r^{3−ε}).
  double weighted_sup = 0.0;
};

/// Grid used for TF solutions in the screening reports.
GridPtr screening_tf_grid(double Z);

/// `tf` is the full TF solution at Z; solved on screening_tf_grid when absent.
ScreeningProfile compare_profiles(const ChannelDensityMatrix& gamma0, double Z, std::span<const double> radii,
                                  double epsilon = 1.0 / 66.0, const TFSolution* tf = nullptr);

nlohmann::ordered_json to_json(const ScreeningProfile& p);
ScreeningProfile screening_profile_from_json(const nlohmann::ordered_json& j);
/// Columns r,z_mueller,z_tf,deviation.
void write_csv(const std::filesystem::path& path, const ScreeningProfile& p);

/// Side-by-side evaluation of one inequality. `terms` sum to the right side
/// without constants; `aux` holds inputs that are not summed.
struct ComparisonReport {
  std::string name;
  std::vector<std::pair<std::string, double>> params;
  double lhs = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  std::vector<std::pair<std::string, double>> aux;
  double rhs = 0.0;
  /// lhs / rhs, the implied constant.
  double monitored_constant = 0.0;
  std::vector<std::string> flags;

  /// Looks up a term, aux value or parameter by name. Throws std::out_of_range.
  double get(std::string_view key) const;
  bool flagged(std::string_view flag) const;
};

nlohmann::ordered_json to_json(const ComparisonReport& r);
ComparisonReport comparison_report_from_json(const nlohmann::ordered_json& j);
/// One row per report. All reports must share name and field layout.
void write_csv(const std::filesystem::path& path, std::span<const ComparisonReport> reports);

/// ∫χ_r^+ρ₀ against ∫_{r<|x|<(1+λ)²r}ρ₀, [Z_r]_+ + s + λ⁻²s⁻¹ + λ⁻¹ and
/// (s² Tr(−Δη_rγ₀η_r))^{3/5}, (s² Tr(−Δη_rγ₀η_r))^{1/3}.
ComparisonReport exterior_l1_report(const ChannelDensityMatrix& gamma0, double Z, double r, double s, double lambda);

/// D(η_r²ρ₀ − ρ_r^TF) with ρ_r^TF the exterior TF density at z = Z_r, against
/// s⁻²∫χ_r^+ρ₀, [Z_r]_+^{12/5}r^{−1/5}s^{2/5} and the three remainder terms.
/// Throws TFError when the exterior problem fails.
ComparisonReport d_comparison(const ChannelDensityMatrix& gamma0, double Z, double r, double s, double lambda);

/// |∫_{|y|<r} f| against ‖f‖_{5/3}^{5/6} D(f)^{1/12} r^{13/12}.
ComparisonReport coulomb_norm_bound(const RadialFunction& f, double r);

/// ∫χ_r^+ρ₀, ∫χ_r^+ρ₀^{5/3} and Tr(−Δη_rγ₀η_r) with their r³, r⁷, r⁷
/// weighted values; the monitored constant is the largest weighted value.
ComparisonReport apriori_report(const ChannelDensityMatrix& gamma0, double Z, double r, double lambda);

struct KeyIdentityCheck {
  double z_r = 0.0;
  /// ∫_{|x|<R}(ρ^TF − ρ₀).
  double lhs = 0.0;
  /// ∫_{|x|<R}(ρ_r^TF − χ_r^+ρ₀) + ∫_{|x|>=R}(ρ_r^TF − ρ^TF).
  double rhs = 0.0;
  double defect = 0.0;
  /// Z_r < 0: ρ_r^TF = 0 and the defect is |Z_r|.
  bool negative_charge = false;
};

/// Each integral is evaluated on its own. `tf` as in compare_profiles.
KeyIdentityCheck key_identity_check(const ChannelDensityMatrix& gamma0, double Z, double r, double R,
                                    const TFSolution* tf = nullptr);

/// ∫_{S²} [ν·z]_+ dν / 4π by quadrature in spherical coordinates.
double sphere_average_positive_part(const std::array<double, 3>& z);

}  // namespace mtf
