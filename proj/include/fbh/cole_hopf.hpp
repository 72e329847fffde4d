#pragma once

#include <Eigen/Dense>

namespace fbh {

/// Gauss-Hermite rule for weight exp(-z^2): nodes and weights via the
/// symmetric tridiagonal Jacobi matrix (Golub-Welsch). Results are cached per
/// n; single-threaded use.
void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

/// Closed-form solution of u_t + u u_x = nu u_xx, u(x, 0) = -sin(pi x),
/// periodic on [-1, 1]: the Cole-Hopf quotient of heat-kernel integrals,
/// with the kernel folded over the period-2 lattice and the resulting
/// single-period integrals evaluated by the trapezoid rule in max-shifted
/// exponent form (spectrally accurate for this smooth periodic integrand,
/// and safe at any Reynolds number because the denominator terms are all
/// positive). `n_base` is the baseline grid size; the grid refines itself
/// automatically when the kernel is narrower than the baseline resolves.
/// Exact -sin(pi x) at t = 0 and exactly odd in x.
double cole_hopf_burgers(double x, double t, double nu, int n_base = 4096);

}  // namespace fbh
