#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "fbh/jet.hpp"

namespace fbh {

/// One overlapping subdomain: midpoint and per-dimension half-width, both in
/// problem coordinates.
struct Subdomain {
  Eigen::VectorXd m, s;
  int dim() const { return static_cast<int>(m.size()); }
};

/// Regular grid of overlapping subdomains covering [lo, hi].
struct Decomposition {
  Eigen::VectorXd lo, hi;
  std::vector<int> counts;
  std::vector<Subdomain> subs;

  int dim() const { return static_cast<int>(lo.size()); }
  int J() const { return static_cast<int>(subs.size()); }
};

/// Midpoints at lo + (i + 0.5) * spacing, half-widths widths/2. Requires
/// widths > spacing per dimension so neighbors overlap and the grid covers
/// the domain. Subdomain order: first dimension outermost.
Decomposition uniform_decomposition(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                    const std::vector<int>& counts,
                                    const Eigen::VectorXd& widths);

/// Unnormalized window: product over dimensions of the raised cosine
/// phi(r) = 0.5 (1 + cos(pi r)) for |r| < 1 (else 0), r = (x_d - m_d)/s_d.
/// 1 at the midpoint, exactly 0 on and outside the subdomain bounds, with
/// continuous first derivatives everywhere.
double window_raw(const Subdomain& sub, const Eigen::VectorXd& x);

/// Jet-valued window for derivative-carrying residuals; x jets may track one
/// or two directions (indices into the coordinate vector).
Jet2 window_raw_jet(const Subdomain& sub, std::span<const Jet2> x);

/// Normalized window omega_j = raw_j / sum_k raw_k: a partition of unity over
/// covered points. Throws std::domain_error if no subdomain covers x.
double window(const Decomposition& dec, int j, const Eigen::VectorXd& x);

/// All normalized window jets at once (one per entry of `active`), sharing
/// the normalization sum.
std::vector<Jet2> window_jets(const Decomposition& dec, std::span<const int> active,
                              std::span<const Jet2> x);

/// Per-subdomain input normalization (x - m)/s, mapping the subdomain onto
/// [-1, 1]^d.
Eigen::VectorXd normalize_input(const Subdomain& sub, const Eigen::VectorXd& x);
std::vector<Jet2> normalize_input_jet(const Subdomain& sub, std::span<const Jet2> x);

/// Indices j with window_raw_j(x) > 0, in increasing order.
std::vector<int> active_subdomains(const Decomposition& dec, const Eigen::VectorXd& x);

/// Hypernetwork task vector [m_1..m_d, s_1..s_d].
Eigen::VectorXd subdomain_task(const Subdomain& sub);

}  // namespace fbh
