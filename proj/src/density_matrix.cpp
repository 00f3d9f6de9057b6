#include "muellertf/density_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mtf {

void ChannelDensityMatrix::add_channel(int l, Eigen::MatrixXd orbitals, std::vector<double> occupations) {
  if (!grid_) throw std::invalid_argument("ChannelDensityMatrix: no grid");
  if (l < 0) throw std::invalid_argument("ChannelDensityMatrix: negative l");
  if (find(l)) throw std::invalid_argument("ChannelDensityMatrix: duplicate channel l=" + std::to_string(l));
  if (static_cast<std::size_t>(orbitals.rows()) != grid_->size() ||
      static_cast<std::size_t>(orbitals.cols()) != occupations.size()) {
    throw std::invalid_argument("ChannelDensityMatrix: orbital block shape mismatch");
  }
  for (double n : occupations) {
    if (!(n >= 0.0 && n <= 1.0)) throw std::invalid_argument("ChannelDensityMatrix: occupation outside [0,1]");
  }
  channels_.push_back({l, std::move(orbitals), std::move(occupations)});
  std::sort(channels_.begin(), channels_.end(), [](const Channel& a, const Channel& b) { return a.l < b.l; });
}

const Channel* ChannelDensityMatrix::find(int l) const {
  for (const auto& c : channels_) {
    if (c.l == l) return &c;
  }
  return nullptr;
}

bool ChannelDensityMatrix::empty() const {
  for (const auto& c : channels_) {
    if (c.size() > 0) return false;
  }
  return true;
}

int ChannelDensityMatrix::l_max() const {
  int l = 0;
  for (const auto& c : channels_) l = std::max(l, c.l);
  return l;
}

double ChannelDensityMatrix::trace() const {
  double t = 0.0;
  for (const auto& c : channels_) {
    for (double n : c.occupations) t += c.degeneracy() * n;
  }
  return t;
}

double ChannelDensityMatrix::gram_defect() const {
  if (!grid_) return 0.0;
  const auto w = grid_->weights();
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  double worst = 0.0;
  for (const auto& c : channels_) {
    if (c.size() == 0) continue;
    const Eigen::MatrixXd g = c.orbitals.transpose() * wv.asDiagonal() * c.orbitals;
    const Eigen::MatrixXd d = g - Eigen::MatrixXd::Identity(g.rows(), g.cols());
    worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  return worst;
}

void ChannelDensityMatrix::validate(double gram_tol) const {
  for (const auto& c : channels_) {
    for (double n : c.occupations) {
      if (!(n >= 0.0 && n <= 1.0)) throw std::invalid_argument("ChannelDensityMatrix: occupation outside [0,1]");
    }
    if (!c.orbitals.allFinite()) throw std::invalid_argument("ChannelDensityMatrix: non-finite orbital");
  }
  const double g = gram_defect();
  if (g > gram_tol) throw std::invalid_argument("ChannelDensityMatrix: orbitals not orthonormal (defect " +
                                                std::to_string(g) + ")");
}

Channel channel_from_factor(int l, const Eigen::MatrixXd& factor, std::span<const double> weights, double drop) {
  Channel out;
  out.l = l;
  if (factor.cols() == 0) {
    out.orbitals.resize(factor.rows(), 0);
    return out;
  }
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const Eigen::MatrixXd m = factor.transpose() * w.asDiagonal() * factor;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const auto& lam = es.eigenvalues();
  const auto& q = es.eigenvectors();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = lam.size(); k-- > 0;) {
    if (lam(k) > drop) keep.push_back(k);
  }
  out.orbitals.resize(factor.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const Eigen::Index k = keep[c];
    out.orbitals.col(static_cast<Eigen::Index>(c)) = factor * q.col(k) / std::sqrt(lam(k));
    out.occupations.push_back(lam(k));
  }
  return out;
}

Eigen::MatrixXd channel_kernel(const Channel& c) {
  const Eigen::Map<const Eigen::VectorXd> n(c.occupations.data(), static_cast<Eigen::Index>(c.occupations.size()));
  return c.orbitals * n.asDiagonal() * c.orbitals.transpose();
}

Density density_of(const ChannelDensityMatrix& gamma) {
  const auto& g = gamma.grid();
  std::vector<double> rho(g.size(), 0.0);
  for (const auto& c : gamma.channels()) {
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double f = c.degeneracy() * c.occupations[k];
      if (f == 0.0) continue;
      const auto col = c.orbitals.col(static_cast<Eigen::Index>(k));
      for (std::size_t i = 0; i < rho.size(); ++i) rho[i] += f * col(static_cast<Eigen::Index>(i)) * col(static_cast<Eigen::Index>(i));
    }
  }
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] /= 4.0 * std::numbers::pi * g.node(i) * g.node(i);
  return Density(RadialFunction(gamma.grid_ptr(), std::move(rho)));
}

ChannelDensityMatrix sqrt_gamma(const ChannelDensityMatrix& gamma) {
  ChannelDensityMatrix out = gamma;
  for (auto& c : out.channels()) {
    for (double& n : c.occupations) n = std::sqrt(n);
  }
  return out;
}

}  // namespace mtf
