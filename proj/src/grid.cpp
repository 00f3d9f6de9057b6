#include "muellertf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "muellertf/io.hpp"

namespace mtf {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Lagrange basis value L_j(x) on nodes xs[0..count).
inline double lagrange(const double* xs, std::size_t count, std::size_t j, double x) {
  double v = 1.0;
  for (std::size_t m = 0; m < count; ++m) {
    if (m != j) v *= (x - xs[m]) / (xs[j] - xs[m]);
  }
  return v;
}

// Two-point Gauss-Legendre abscissae on [x0, x1]; exact for cubics.
inline void gauss2(double x0, double x1, double& g0, double& g1) {
  const double mid = 0.5 * (x0 + x1);
  const double half = 0.5 * (x1 - x0);
  const double off = half / std::sqrt(3.0);
  g0 = mid - off;
  g1 = mid + off;
}

}  // namespace

std::shared_ptr<const RadialGrid> RadialGrid::logarithmic(double r_min, double r_max, std::size_t n) {
  if (!(r_min > 0.0) || !std::isfinite(r_min)) throw std::invalid_argument("make_log_grid: r_min must be positive");
  if (!(r_max > r_min) || !std::isfinite(r_max)) throw std::invalid_argument("make_log_grid: r_max must exceed r_min");
  if (n < 16) throw std::invalid_argument("make_log_grid: need at least 16 nodes");

  auto g = std::shared_ptr<RadialGrid>(new RadialGrid());
  g->log_step_ = std::log(r_max / r_min) / static_cast<double>(n - 1);
  g->r_.resize(n);
  for (std::size_t i = 0; i < n; ++i) g->r_[i] = r_min * std::exp(g->log_step_ * static_cast<double>(i));
  g->r_.front() = r_min;
  g->r_.back() = r_max;

  // Standard per-interval coefficients.
  g->first_.resize(n - 1);
  g->coef_.assign(4 * (n - 1), 0.0);
  g->w_.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Stencil st = g->stencil_for(g->r_[i], 0, n - 1);
    g->first_[i] = st.first;
    double x0, x1;
    gauss2(g->r_[i], g->r_[i + 1], x0, x1);
    const double half = 0.5 * (g->r_[i + 1] - g->r_[i]);
    const double* xs = g->r_.data() + st.first;
    for (std::size_t j = 0; j < 4; ++j) {
      const double c = half * (lagrange(xs, 4, j, x0) + lagrange(xs, 4, j, x1));
      g->coef_[4 * i + j] = c;
      g->w_[st.first + j] += c;
    }
  }
  return g;
}

std::size_t RadialGrid::lower_bound(double r) const {
  return static_cast<std::size_t>(std::lower_bound(r_.begin(), r_.end(), r) - r_.begin());
}

RadialGrid::Stencil RadialGrid::stencil_for(double x0, std::size_t lo, std::size_t hi) const {
  const std::size_t count = hi - lo + 1;
  if (count <= 4) return {lo, count};
  // Largest node <= x0 inside the piece.
  auto it = std::upper_bound(r_.begin() + static_cast<std::ptrdiff_t>(lo), r_.begin() + static_cast<std::ptrdiff_t>(hi) + 1, x0);
  std::size_t k = it == r_.begin() + static_cast<std::ptrdiff_t>(lo) ? lo : static_cast<std::size_t>(it - r_.begin()) - 1;
  std::size_t first = k > lo ? k - 1 : lo;
  first = std::min(first, hi - 3);
  return {first, 4};
}

double RadialGrid::segment(std::span<const double> f, double x0, double x1, std::size_t lo, std::size_t hi) const {
  if (!(x1 > x0)) return 0.0;
  const Stencil st = stencil_for(x0, lo, hi);
  double g0, g1;
  gauss2(x0, x1, g0, g1);
  const double* xs = r_.data() + st.first;
  double acc = 0.0;
  for (std::size_t j = 0; j < st.count; ++j) {
    acc += f[st.first + j] * (lagrange(xs, st.count, j, g0) + lagrange(xs, st.count, j, g1));
  }
  return 0.5 * (x1 - x0) * acc;
}

double RadialGrid::integrate(std::span<const double> f) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < r_.size(); ++i) acc += w_[i] * f[i];
  return acc;
}

void RadialGrid::increments(std::span<const double> f, std::span<double> out, double breakpoint) const {
  const std::size_t n = r_.size();
  if (breakpoint <= r_.front() || breakpoint > r_.back()) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double* c = coef_.data() + 4 * i;
      const double* v = f.data() + first_[i];
      out[i] = c[0] * v[0] + c[1] * v[1] + c[2] * v[2] + c[3] * v[3];
    }
    return;
  }
  const std::size_t j = lower_bound(breakpoint);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (i + 1 < j) {
      out[i] = segment(f, r_[i], r_[i + 1], 0, j - 1);
    } else if (i + 1 == j) {
      out[i] = segment(f, r_[i], breakpoint, 0, j - 1) + segment(f, breakpoint, r_[j], j, n - 1);
    } else {
      out[i] = segment(f, r_[i], r_[i + 1], j, n - 1);
    }
  }
}

void RadialGrid::cumulative(std::span<const double> f, std::span<double> out, double breakpoint) const {
  increments(f, out.subspan(1), breakpoint);
  out[0] = 0.0;
  for (std::size_t i = 1; i < r_.size(); ++i) out[i] += out[i - 1];
}

void RadialGrid::tail(std::span<const double> f, std::span<double> out, double breakpoint) const {
  const std::size_t n = r_.size();
  increments(f, out.first(n - 1), breakpoint);
  out[n - 1] = 0.0;
  for (std::size_t i = n - 1; i-- > 0;) out[i] += out[i + 1];
}

std::vector<double> RadialGrid::cumulative(std::span<const double> f, double breakpoint) const {
  std::vector<double> out(r_.size());
  cumulative(f, out, breakpoint);
  return out;
}

double RadialGrid::integrate(std::span<const double> f, double a, double b, double breakpoint) const {
  if (b < a) return -integrate(f, b, a, breakpoint);
  a = std::max(a, r_.front());
  b = std::min(b, r_.back());
  if (!(b > a)) return 0.0;
  const std::size_t n = r_.size();
  auto piece = [&](std::size_t lo, std::size_t hi, double x0, double x1) {
    double acc = 0.0;
    double x = x0;
    for (std::size_t i = lower_bound(x0); i < n && r_[i] < x1; ++i) {
      if (r_[i] > x) {
        acc += segment(f, x, r_[i], lo, hi);
        x = r_[i];
      }
    }
    acc += segment(f, x, x1, lo, hi);
    return acc;
  };
  if (breakpoint <= r_.front() || breakpoint > r_.back()) return piece(0, n - 1, a, b);
  const std::size_t j = lower_bound(breakpoint);
  double acc = 0.0;
  if (a < breakpoint) acc += piece(0, j - 1, a, std::min(b, breakpoint));
  if (b > breakpoint) acc += piece(j, n - 1, std::max(a, breakpoint), b);
  return acc;
}

double RadialGrid::interpolate(std::span<const double> f, double r, double breakpoint) const {
  const double tol = 1e-12 * r_.back();
  if (!(r >= r_.front() * (1.0 - 1e-12)) || r > r_.back() + tol) {
    throw std::out_of_range("interpolate: r=" + std::to_string(r) + " outside grid");
  }
  std::size_t lo = 0, hi = r_.size() - 1;
  if (breakpoint > r_.front() && breakpoint <= r_.back()) {
    const std::size_t j = lower_bound(breakpoint);
    if (r >= breakpoint) {
      lo = j;
    } else {
      hi = j - 1;
    }
  }
  if (lo == hi) return f[lo];
  auto it = std::upper_bound(r_.begin() + static_cast<std::ptrdiff_t>(lo), r_.begin() + static_cast<std::ptrdiff_t>(hi) + 1, r);
  std::size_t k = it == r_.begin() + static_cast<std::ptrdiff_t>(lo) ? lo : static_cast<std::size_t>(it - r_.begin()) - 1;
  k = std::min(k, hi - 1);
  if (r == r_[k]) return f[k];
  const double t = (r - r_[k]) / (r_[k + 1] - r_[k]);
  return (1.0 - t) * f[k] + t * f[k + 1];
}

double RadialGrid::interpolate_cubic(std::span<const double> f, double r, double breakpoint) const {
  const double tol = 1e-12 * r_.back();
  if (!(r >= r_.front() * (1.0 - 1e-12)) || r > r_.back() + tol) {
    throw std::out_of_range("interpolate_cubic: r=" + std::to_string(r) + " outside grid");
  }
  std::size_t lo = 0, hi = r_.size() - 1;
  if (breakpoint > r_.front() && breakpoint <= r_.back()) {
    const std::size_t j = lower_bound(breakpoint);
    if (r >= breakpoint) {
      lo = j;
    } else {
      hi = j - 1;
    }
  }
  const Stencil st = stencil_for(r, lo, hi);
  const double* xs = r_.data() + st.first;
  double acc = 0.0;
  for (std::size_t j = 0; j < st.count; ++j) acc += f[st.first + j] * lagrange(xs, st.count, j, r);
  return acc;
}

// ---------------------------------------------------------------------------

RadialFunction::RadialFunction(GridPtr grid, std::vector<double> values, double breakpoint)
    : grid_(std::move(grid)), values_(std::move(values)), breakpoint_(breakpoint) {
  if (!grid_) throw std::invalid_argument("RadialFunction: null grid");
  if (values_.size() != grid_->size()) throw std::invalid_argument("RadialFunction: size mismatch with grid");
  if (breakpoint_ <= grid_->r_min() || breakpoint_ > grid_->r_max()) breakpoint_ = 0.0;
}

RadialFunction RadialFunction::zero(GridPtr grid) {
  const std::size_t n = grid->size();
  return RadialFunction(std::move(grid), std::vector<double>(n, 0.0));
}

RadialFunction RadialFunction::sample(GridPtr grid, const std::function<double(double)>& f, double breakpoint) {
  std::vector<double> v(grid->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid->node(i));
  return RadialFunction(std::move(grid), std::move(v), breakpoint);
}

namespace {

double merged_breakpoint(const RadialFunction& a, const RadialFunction& b) {
  if (a.grid_ptr() != b.grid_ptr() && (a.grid().size() != b.grid().size() || a.grid().r_min() != b.grid().r_min() ||
                                       a.grid().r_max() != b.grid().r_max())) {
    throw std::invalid_argument("RadialFunction: operands live on different grids");
  }
  if (a.breakpoint() == 0.0) return b.breakpoint();
  if (b.breakpoint() == 0.0 || b.breakpoint() == a.breakpoint()) return a.breakpoint();
  throw std::invalid_argument("RadialFunction: operands jump at different radii");
}

template <class Op>
RadialFunction combine(const RadialFunction& a, const RadialFunction& b, Op op) {
  const double bp = merged_breakpoint(a, b);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = op(a[i], b[i]);
  return RadialFunction(a.grid_ptr(), std::move(v), bp);
}

}  // namespace

RadialFunction RadialFunction::operator+(const RadialFunction& o) const {
  return combine(*this, o, [](double x, double y) { return x + y; });
}
RadialFunction RadialFunction::operator-(const RadialFunction& o) const {
  return combine(*this, o, [](double x, double y) { return x - y; });
}
RadialFunction RadialFunction::operator*(const RadialFunction& o) const {
  return combine(*this, o, [](double x, double y) { return x * y; });
}
RadialFunction RadialFunction::operator*(double c) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= c;
  return RadialFunction(grid_, std::move(v), breakpoint_);
}

Density::Density(RadialFunction f) : RadialFunction(std::move(f)) {
  for (double v : values()) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("Density: samples must be finite and nonnegative");
  }
}

double Density::mass() const { return integrate3d(*this); }

namespace {
std::vector<double> shell_weighted(const RadialFunction& f) {
  const auto r = f.grid().nodes();
  std::vector<double> g(f.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 4.0 * kPi * r[i] * r[i] * f[i];
  return g;
}
}  // namespace

double integrate3d(const RadialFunction& f) {
  const auto g = shell_weighted(f);
  if (f.breakpoint() == 0.0) return f.grid().integrate(g);
  return f.grid().integrate(g, f.grid().r_min(), f.grid().r_max(), f.breakpoint());
}

double integrate3d(const RadialFunction& f, double a, double b) {
  const auto g = shell_weighted(f);
  return f.grid().integrate(g, a, b, f.breakpoint());
}

double interpolate(const RadialFunction& f, double r) { return f(r); }

RadialFunction resample(const RadialFunction& f, GridPtr grid) {
  const auto& src = f.grid();
  const double r0 = src.r_min(), r1 = src.node(1);
  const double f0 = f[0], f1 = f[1];
  const double p = (f0 != 0.0 && f0 * f1 > 0.0) ? std::log(f1 / f0) / std::log(r1 / r0) : 0.0;
  std::vector<double> v(grid->size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = grid->node(i);
    if (r < r0) {
      v[i] = f0 * std::pow(r / r0, p);
    } else if (r > src.r_max() * (1.0 + 1e-12)) {
      v[i] = 0.0;
    } else {
      v[i] = src.interpolate_cubic(f.values(), std::min(r, src.r_max()), f.breakpoint());
    }
  }
  return RadialFunction(std::move(grid), std::move(v), f.breakpoint());
}

RadialFunction restrict_outside(const RadialFunction& f, double a) {
  if (f.breakpoint() > a) throw std::invalid_argument("restrict_outside: function already jumps beyond the cut");
  std::vector<double> v(f.values().begin(), f.values().end());
  const auto r = f.grid().nodes();
  for (std::size_t i = 0; i < v.size() && r[i] < a; ++i) v[i] = 0.0;
  return RadialFunction(f.grid_ptr(), std::move(v), a);
}

RadialFunction map_values(const RadialFunction& f, const std::function<double(double)>& op) {
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = op(f[i]);
  return RadialFunction(f.grid_ptr(), std::move(v), f.breakpoint());
}

void write_csv(const std::filesystem::path& path, const RadialFunction& f) {
  std::string out = "r,value\n";
  out.reserve(out.size() + f.size() * 48);
  for (std::size_t i = 0; i < f.size(); ++i) {
    out += io::format_double(f.grid().node(i));
    out += ',';
    out += io::format_double(f[i]);
    out += '\n';
  }
  io::atomic_write(path, out);
}

RadialFunction read_csv(const std::filesystem::path& path, GridPtr grid) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "r,value") throw io::IoError("read_csv: missing `r,value` header in " + path.string());
  std::vector<double> v;
  v.reserve(grid->size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw io::IoError("read_csv: malformed row in " + path.string());
    const double r = std::stod(line.substr(0, comma));
    const std::size_t i = v.size();
    if (i >= grid->size() || std::abs(r - grid->node(i)) > 1e-12 * grid->node(i)) {
      throw io::IoError("read_csv: node mismatch with grid in " + path.string());
    }
    v.push_back(std::stod(line.substr(comma + 1)));
  }
  if (v.size() != grid->size()) throw io::IoError("read_csv: row count differs from grid size");
  return RadialFunction(std::move(grid), std::move(v));
}

}  // namespace mtf
