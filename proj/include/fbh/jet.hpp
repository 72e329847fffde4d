#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace fbh {

/// Second-order jet: a scalar value together with its gradient and Hessian
/// along up to two tracked input directions. The Hessian is stored packed
/// (d2[0]=H(0,0), d2[1]=H(0,1), d2[2]=H(1,1)) so symmetry holds exactly.
///
/// Arithmetic propagates the second-order chain rule, which is what lets a
/// network evaluated on jets hand back u, u_x, u_t, u_xx, ... for residuals.
struct Jet2 {
  double v = 0.0;
  Eigen::Vector2d d1 = Eigen::Vector2d::Zero();
  Eigen::Vector3d d2 = Eigen::Vector3d::Zero();
  int dims = 1;  // number of tracked directions (1 or 2)

  Jet2() = default;
  Jet2(double value, int ndims) : v(value), dims(ndims) { check_dims(ndims); }

  static void check_dims(int n) {
    if (n < 1 || n > 2) throw std::invalid_argument("Jet2: tracked direction count must be 1 or 2");
  }

  /// Hessian entry by (i, j), i, j < dims.
  double d2_at(int i, int j) const { return d2[pack(i, j)]; }
  double& d2_at(int i, int j) { return d2[pack(i, j)]; }

  static int pack(int i, int j) {
    if (i > j) std::swap(i, j);
    return i + j;  // (0,0)->0, (0,1)->1, (1,1)->2
  }

  int n_d2() const { return dims == 1 ? 1 : 3; }
};

inline void require_same_dims(const Jet2& a, const Jet2& b) {
  if (a.dims != b.dims) throw std::invalid_argument("Jet2: operands track different direction sets");
}

/// Constant with zero derivatives.
inline Jet2 jet_constant(double c, int dims) { return Jet2(c, dims); }

/// Seed: value x with d1 = unit vector along `dir` (dir < dims).
inline Jet2 jet_seed(double x, int dir, int dims) {
  Jet2 j(x, dims);
  if (dir < 0 || dir >= dims) throw std::invalid_argument("Jet2: seed direction out of range");
  j.d1[dir] = 1.0;
  return j;
}

/// Lift a point into jets. Entry x[tracked[k]] is seeded along direction k;
/// the remaining entries become constants. At most two tracked directions.
inline std::vector<Jet2> jet_lift(const Eigen::VectorXd& x, std::span<const int> tracked) {
  if (tracked.size() < 1 || tracked.size() > 2)
    throw std::invalid_argument("jet_lift: tracked direction count must be 1 or 2");
  const int dims = static_cast<int>(tracked.size());
  for (int k = 0; k < dims; ++k) {
    if (tracked[k] < 0 || tracked[k] >= x.size())
      throw std::invalid_argument("jet_lift: tracked index out of bounds");
    for (int l = 0; l < k; ++l)
      if (tracked[l] == tracked[k]) throw std::invalid_argument("jet_lift: duplicate tracked index");
  }
  std::vector<Jet2> out;
  out.reserve(static_cast<size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Jet2 j(x[i], dims);
    for (int k = 0; k < dims; ++k)
      if (tracked[k] == static_cast<int>(i)) j.d1[k] = 1.0;
    out.push_back(j);
  }
  return out;
}

// ---- arithmetic -----------------------------------------------------------

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  require_same_dims(a, b);
  Jet2 r(a.v + b.v, a.dims);
  r.d1 = a.d1 + b.d1;
  r.d2 = a.d2 + b.d2;
  return r;
}

inline Jet2 operator-(const Jet2& a, const Jet2& b) {
  require_same_dims(a, b);
  Jet2 r(a.v - b.v, a.dims);
  r.d1 = a.d1 - b.d1;
  r.d2 = a.d2 - b.d2;
  return r;
}

inline Jet2 operator-(const Jet2& a) {
  Jet2 r(-a.v, a.dims);
  r.d1 = -a.d1;
  r.d2 = -a.d2;
  return r;
}

/// Leibniz product rule to second order.
inline Jet2 jet_mul(const Jet2& a, const Jet2& b) {
  require_same_dims(a, b);
  Jet2 r(a.v * b.v, a.dims);
  r.d1 = a.v * b.d1 + b.v * a.d1;
  for (int i = 0; i < a.dims; ++i)
    for (int j = i; j < a.dims; ++j)
      r.d2_at(i, j) = a.v * b.d2_at(i, j) + b.v * a.d2_at(i, j) + a.d1[i] * b.d1[j] + a.d1[j] * b.d1[i];
  return r;
}

inline Jet2 operator*(const Jet2& a, const Jet2& b) { return jet_mul(a, b); }

inline Jet2 operator*(double c, const Jet2& a) {
  Jet2 r(c * a.v, a.dims);
  r.d1 = c * a.d1;
  r.d2 = c * a.d2;
  return r;
}
inline Jet2 operator*(const Jet2& a, double c) { return c * a; }
inline Jet2 operator+(const Jet2& a, double c) {
  Jet2 r = a;
  r.v += c;
  return r;
}
inline Jet2 operator+(double c, const Jet2& a) { return a + c; }
inline Jet2 operator-(const Jet2& a, double c) { return a + (-c); }
inline Jet2 operator-(double c, const Jet2& a) { return (-a) + c; }
inline Jet2 operator/(const Jet2& a, double c) { return a * (1.0 / c); }

/// Univariate chain rule: d1 = f'·a', d2 = f'·a'' + f''·a'⊗a'.
inline Jet2 jet_chain(const Jet2& a, double f, double fp, double fpp) {
  Jet2 r(f, a.dims);
  r.d1 = fp * a.d1;
  for (int i = 0; i < a.dims; ++i)
    for (int j = i; j < a.dims; ++j)
      r.d2_at(i, j) = fp * a.d2_at(i, j) + fpp * a.d1[i] * a.d1[j];
  return r;
}

inline Jet2 jet_tanh(const Jet2& a) {
  const double t = std::tanh(a.v);
  const double fp = 1.0 - t * t;
  return jet_chain(a, t, fp, -2.0 * t * fp);
}

/// relu': step function; relu'' taken as 0 everywhere (including the kink,
/// where the subgradient 0 is used).
inline Jet2 jet_relu(const Jet2& a) {
  const double fp = a.v > 0.0 ? 1.0 : 0.0;
  return jet_chain(a, a.v > 0.0 ? a.v : 0.0, fp, 0.0);
}

inline Jet2 jet_sin(const Jet2& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return jet_chain(a, s, c, -s);
}

inline Jet2 jet_cos(const Jet2& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return jet_chain(a, c, -s, -c);
}

inline Jet2 jet_exp(const Jet2& a) {
  const double e = std::exp(a.v);
  return jet_chain(a, e, e, e);
}

/// 1/a; needed for normalized window functions ω_j = raw_j / Σ raw_k.
inline Jet2 jet_recip(const Jet2& a) {
  const double inv = 1.0 / a.v;
  return jet_chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) { return jet_mul(a, jet_recip(b)); }

}  // namespace fbh
