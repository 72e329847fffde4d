#include "fbh/decomposition.hpp"

#include <cmath>
#include <stdexcept>

namespace fbh {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Raised cosine on (-1, 1); exactly zero outside, with phi'(+-1) = 0 so the
// product window is C^1 across subdomain boundaries.
double phi(double r) {
  if (std::abs(r) >= 1.0) return 0.0;
  return 0.5 * (1.0 + std::cos(M_PI * r));
}

Jet2 phi_jet(const Jet2& r) {
  if (std::abs(r.v) >= 1.0) return jet_constant(0.0, r.dims);
  // 0.5 (1 + cos(pi r)) with exact first and second derivatives in r.
  const double pr = M_PI * r.v;
  return jet_chain(r, 0.5 * (1.0 + std::cos(pr)), -0.5 * M_PI * std::sin(pr),
                   -0.5 * M_PI * M_PI * std::cos(pr));
}

}  // namespace

Decomposition uniform_decomposition(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                    const std::vector<int>& counts,
                                    const Eigen::VectorXd& widths) {
  const int d = static_cast<int>(lo.size());
  require(d >= 1, "uniform_decomposition: empty domain");
  require(hi.size() == d && static_cast<int>(counts.size()) == d && widths.size() == d,
          "uniform_decomposition: lo/hi/counts/widths size mismatch");
  for (int k = 0; k < d; ++k) {
    require(hi[k] > lo[k], "uniform_decomposition: hi must exceed lo");
    require(counts[k] >= 1, "uniform_decomposition: counts must be >= 1");
    const double spacing = (hi[k] - lo[k]) / counts[k];
    require(widths[k] > spacing,
            "uniform_decomposition: widths must exceed the grid spacing for overlap");
  }

  Decomposition dec;
  dec.lo = lo;
  dec.hi = hi;
  dec.counts = counts;

  long total = 1;
  for (int k = 0; k < d; ++k) total *= counts[k];
  dec.subs.reserve(total);

  std::vector<int> idx(d, 0);
  for (long flat = 0; flat < total; ++flat) {
    Subdomain sub;
    sub.m.resize(d);
    sub.s.resize(d);
    for (int k = 0; k < d; ++k) {
      const double spacing = (hi[k] - lo[k]) / counts[k];
      sub.m[k] = lo[k] + (idx[k] + 0.5) * spacing;
      sub.s[k] = 0.5 * widths[k];
    }
    dec.subs.push_back(std::move(sub));
    // Odometer increment, last dimension fastest (first dimension outermost).
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[k] < counts[k]) break;
      idx[k] = 0;
    }
  }
  return dec;
}

double window_raw(const Subdomain& sub, const Eigen::VectorXd& x) {
  require(x.size() == sub.m.size(), "window_raw: dimension mismatch");
  double w = 1.0;
  for (int k = 0; k < sub.dim(); ++k) {
    w *= phi((x[k] - sub.m[k]) / sub.s[k]);
    if (w == 0.0) return 0.0;
  }
  return w;
}

Jet2 window_raw_jet(const Subdomain& sub, std::span<const Jet2> x) {
  require(static_cast<int>(x.size()) == sub.dim(), "window_raw_jet: dimension mismatch");
  Jet2 w = jet_constant(1.0, x.empty() ? 0 : x[0].dims);
  for (int k = 0; k < sub.dim(); ++k) {
    const Jet2 r = (x[k] + (-sub.m[k])) * (1.0 / sub.s[k]);
    w = jet_mul(w, phi_jet(r));
  }
  return w;
}

double window(const Decomposition& dec, int j, const Eigen::VectorXd& x) {
  require(j >= 0 && j < dec.J(), "window: subdomain index out of range");
  double total = 0.0;
  for (const Subdomain& sub : dec.subs) total += window_raw(sub, x);
  if (total <= 0.0) throw std::domain_error("window: point not covered by any subdomain");
  return window_raw(dec.subs[j], x) / total;
}

std::vector<Jet2> window_jets(const Decomposition& dec, std::span<const int> active,
                              std::span<const Jet2> x) {
  const int dims = x.empty() ? 0 : x[0].dims;
  Jet2 total = jet_constant(0.0, dims);
  std::vector<Jet2> raw;
  raw.reserve(active.size());
  for (int j : active) {
    require(j >= 0 && j < dec.J(), "window_jets: subdomain index out of range");
    raw.push_back(window_raw_jet(dec.subs[j], x));
    total = total + raw.back();
  }
  // Only the active subdomains contribute to the sum: every other raw window
  // is identically zero in a neighborhood of x, so its jet would be zero too.
  if (total.v <= 0.0) throw std::domain_error("window_jets: point not covered by any subdomain");
  // A lone active window normalizes to exactly one (with vanishing
  // derivatives); skipping the quotient keeps that exactness in floating
  // point, so a single-subdomain decomposition is transparent.
  if (active.size() == 1) return {jet_constant(1.0, dims)};
  const Jet2 inv = jet_recip(total);
  std::vector<Jet2> out;
  out.reserve(raw.size());
  for (const Jet2& w : raw) out.push_back(jet_mul(w, inv));
  return out;
}

Eigen::VectorXd normalize_input(const Subdomain& sub, const Eigen::VectorXd& x) {
  require(x.size() == sub.m.size(), "normalize_input: dimension mismatch");
  return (x - sub.m).cwiseQuotient(sub.s);
}

std::vector<Jet2> normalize_input_jet(const Subdomain& sub, std::span<const Jet2> x) {
  require(static_cast<int>(x.size()) == sub.dim(), "normalize_input_jet: dimension mismatch");
  std::vector<Jet2> out;
  out.reserve(x.size());
  for (int k = 0; k < sub.dim(); ++k)
    out.push_back((x[k] + (-sub.m[k])) * (1.0 / sub.s[k]));
  return out;
}

std::vector<int> active_subdomains(const Decomposition& dec, const Eigen::VectorXd& x) {
  std::vector<int> out;
  for (int j = 0; j < dec.J(); ++j)
    if (window_raw(dec.subs[j], x) > 0.0) out.push_back(j);
  return out;
}

Eigen::VectorXd subdomain_task(const Subdomain& sub) {
  Eigen::VectorXd task(2 * sub.dim());
  task << sub.m, sub.s;
  return task;
}

}  // namespace fbh
