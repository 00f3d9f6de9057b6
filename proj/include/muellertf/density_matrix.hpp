#pragma once
// Spin-free radial density matrices in angular-momentum channels.

#include <Eigen/Dense>
#include <vector>

#include "muellertf/grid.hpp"

namespace mtf {

/// One angular-momentum block: γ_ℓ(r, r') = Σ_k n_k u_k(r) u_k(r').
/// Orbitals are stored as node samples of u(r) = r R(r), one column each,
/// orthonormal in the grid inner product Σ_i w_i u(r_i) v(r_i).
struct Channel {
  int l = 0;
  Eigen::MatrixXd orbitals;
  std::vector<double> occupations;

  int degeneracy() const { return 2 * l + 1; }
  std::size_t size() const { return occupations.size(); }
};

class ChannelDensityMatrix {
 public:
  ChannelDensityMatrix() = default;
  explicit ChannelDensityMatrix(GridPtr grid) : grid_(std::move(grid)) {}

  /// Appends a channel. Throws std::invalid_argument on shape mismatch,
  /// occupations outside [0, 1] or a duplicated ℓ.
  void add_channel(int l, Eigen::MatrixXd orbitals, std::vector<double> occupations);

  const GridPtr& grid_ptr() const { return grid_; }
  const RadialGrid& grid() const { return *grid_; }
  const std::vector<Channel>& channels() const { return channels_; }
  std::vector<Channel>& channels() { return channels_; }
  const Channel* find(int l) const;

  bool empty() const;
  int l_max() const;
  /// Σ_ℓ (2ℓ+1) Σ_k n_k.
  double trace() const;
  /// Largest |Uᵀ W U − I| entry over all channels.
  double gram_defect() const;
  /// Throws std::invalid_argument when an invariant fails.
  void validate(double gram_tol = 1e-10) const;

 private:
  GridPtr grid_;
  std::vector<Channel> channels_;
};

/// Channel of the operator A Aᵀ (columns of A are radial functions),
/// re-expressed through its eigenvectors. Eigenvalues below `drop` are
/// discarded; eigenvalues above 1 are kept as is, so the caller decides
/// whether the result is a density matrix.
Channel channel_from_factor(int l, const Eigen::MatrixXd& factor, std::span<const double> weights,
                            double drop = 1e-14);

/// Kernel samples γ_ℓ(r_i, r_j) of one channel (small grids only).
Eigen::MatrixXd channel_kernel(const Channel& c);

/// ρ_γ(r) = Σ_ℓ (2ℓ+1)/(4πr²) Σ_k n_k u_k(r)².
Density density_of(const ChannelDensityMatrix& gamma);

/// Same orbitals, occupations √n.
ChannelDensityMatrix sqrt_gamma(const ChannelDensityMatrix& gamma);

}  // namespace mtf
