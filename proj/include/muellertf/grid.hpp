#pragma once
// Radial discretization: logarithmic node placement, piecewise-cubic quadrature,
// cumulative integrals and linear interpolation.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace mtf {

/// Geometric radial grid r_i = r_min q^i with quadrature weights for
/// integrals over [r_min, r_max].
///
/// Integrals are evaluated interval by interval from the cubic Lagrange
/// interpolant through the four surrounding nodes (one-sided near the ends),
/// which is exact for cubic polynomials in r. The same per-interval rule
/// drives full integrals, cumulative integrals and partial integrals, so the
/// three are mutually consistent.
///
/// Functions with a single jump discontinuity are supported through a
/// breakpoint radius: nodes below it form the left piece, nodes at or above
/// it the right piece, and no stencil straddles the jump.
class RadialGrid {
 public:
  /// make_log_grid. Throws std::invalid_argument on r_min <= 0,
  /// r_max <= r_min or n < 16.
  static std::shared_ptr<const RadialGrid> logarithmic(double r_min, double r_max, std::size_t n);

  std::size_t size() const { return r_.size(); }
  double r_min() const { return r_.front(); }
  double r_max() const { return r_.back(); }
  double log_step() const { return log_step_; }
  double node(std::size_t i) const { return r_[i]; }
  std::span<const double> nodes() const { return r_; }
  std::span<const double> weights() const { return w_; }

  /// First node index with r_i >= r (size() if none).
  std::size_t lower_bound(double r) const;

  /// ∫_{r_min}^{r_max} f dr.
  double integrate(std::span<const double> f) const;
  /// ∫_a^b f dr for the (possibly broken) interpolant of f.
  double integrate(std::span<const double> f, double a, double b, double breakpoint = 0.0) const;
  /// out_i = ∫_{r_min}^{r_i} f dr.
  void cumulative(std::span<const double> f, std::span<double> out, double breakpoint = 0.0) const;
  std::vector<double> cumulative(std::span<const double> f, double breakpoint = 0.0) const;
  /// out_i = ∫_{r_i}^{r_max} f dr, summed from the outer end.
  void tail(std::span<const double> f, std::span<double> out, double breakpoint = 0.0) const;
  /// out_i = ∫_{r_i}^{r_{i+1}} f dr for i < size() - 1.
  void increments(std::span<const double> f, std::span<double> out, double breakpoint = 0.0) const;

  /// Piecewise-linear interpolant, exact at nodes. Throws std::out_of_range
  /// outside [r_min, r_max].
  double interpolate(std::span<const double> f, double r, double breakpoint = 0.0) const;
  /// Cubic Lagrange interpolant on the quadrature stencil of the interval
  /// containing r. Same domain rules as interpolate.
  double interpolate_cubic(std::span<const double> f, double r, double breakpoint = 0.0) const;

 private:
  RadialGrid() = default;

  struct Stencil {
    std::size_t first = 0;
    std::size_t count = 0;
  };
  Stencil stencil_for(double x0, std::size_t lo, std::size_t hi) const;
  double segment(std::span<const double> f, double x0, double x1, std::size_t lo, std::size_t hi) const;

  std::vector<double> r_;
  std::vector<double> w_;
  // Standard rule: interval i uses nodes first_[i] .. first_[i] + 3.
  std::vector<std::size_t> first_;
  std::vector<double> coef_;
  double log_step_ = 0.0;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Samples of a radial scalar field f(|x|) on a grid.
class RadialFunction {
 public:
  RadialFunction() = default;
  RadialFunction(GridPtr grid, std::vector<double> values, double breakpoint = 0.0);
  static RadialFunction zero(GridPtr grid);
  static RadialFunction sample(GridPtr grid, const std::function<double(double)>& f, double breakpoint = 0.0);

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  /// Radius of the single allowed jump, 0 when the function is smooth.
  double breakpoint() const { return breakpoint_; }

  double operator()(double r) const { return grid_->interpolate(values_, r, breakpoint_); }

  RadialFunction operator+(const RadialFunction& other) const;
  RadialFunction operator-(const RadialFunction& other) const;
  RadialFunction operator*(const RadialFunction& other) const;
  RadialFunction operator*(double c) const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
  double breakpoint_ = 0.0;
};

/// Nonnegative radial density.
class Density : public RadialFunction {
 public:
  Density() = default;
  /// Throws std::invalid_argument on negative or non-finite samples.
  explicit Density(RadialFunction f);
  double mass() const;
};

/// ∫_{R^3} f(|x|) dx = ∫ 4π r² f(r) dr over the grid support.
double integrate3d(const RadialFunction& f);
/// ∫_{a <= |x| <= b} f(|x|) dx.
double integrate3d(const RadialFunction& f, double a, double b);
double interpolate(const RadialFunction& f, double r);

/// f sampled on another grid with the cubic interpolant. Below f's first
/// node a power law through the first two nodes is used (a constant when
/// they differ in sign); beyond its last node the result is 0.
RadialFunction resample(const RadialFunction& f, GridPtr grid);

/// f·1(|x| >= a); the result jumps at a. Requires f.breakpoint() <= a.
RadialFunction restrict_outside(const RadialFunction& f, double a);
/// Pointwise map of node values (breakpoint kept).
RadialFunction map_values(const RadialFunction& f, const std::function<double(double)>& op);

/// CSV with header `r,value`, 17 significant digits.
void write_csv(const std::filesystem::path& path, const RadialFunction& f);
RadialFunction read_csv(const std::filesystem::path& path, GridPtr grid);

}  // namespace mtf
