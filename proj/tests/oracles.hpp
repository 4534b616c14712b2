#ifndef MREST_TESTS_ORACLES_HPP
#define MREST_TESTS_ORACLES_HPP

// Reference computations for tests. These work on plain std::vector data and
// share no code with the library's solver.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

/// Root of sum_i g_i / (1 + r g_i) = 0 on the open interval where every
/// 1 + r g_i > 0. The left side is strictly decreasing in r.
inline double scalar_el_root(const std::vector<double>& g) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (double v : g) {
    if (v > 0) lo = std::max(lo, -1.0 / v);
    if (v < 0) hi = std::min(hi, -1.0 / v);
  }
  auto f = [&](double r) {
    double s = 0.0;
    for (double v : g) s += v / (1.0 + r * v);
    return s;
  };
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (f(mid) > 0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// -(1/n) sum log(1 + rho . g_i) over the given rows; +inf outside the domain.
inline double barrier(const std::vector<std::vector<double>>& rows, double n,
                      const std::vector<double>& rho) {
  double f = 0.0;
  for (const auto& g : rows) {
    double s = 1.0;
    for (std::size_t c = 0; c < g.size(); ++c) s += rho[c] * g[c];
    if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
    f -= std::log(s);
  }
  return f / n;
}

/// Bounding box {lo0, hi0, lo1, hi1} of the bounded polygon
/// {rho : 1 + rho . g_i >= 0}, from the pairwise intersections of its edges.
inline std::array<double, 4> domain_box_2d(const std::vector<std::vector<double>>& rows) {
  std::array<double, 4> box{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                            std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      const double det = rows[a][0] * rows[b][1] - rows[a][1] * rows[b][0];
      if (std::abs(det) < 1e-14) continue;
      // Solve rows[a] . r = -1, rows[b] . r = -1.
      const double r0 = (-rows[b][1] + rows[a][1]) / det;
      const double r1 = (-rows[a][0] + rows[b][0]) / det;
      bool feasible = true;
      for (const auto& g : rows) feasible = feasible && 1.0 + r0 * g[0] + r1 * g[1] >= -1e-9;
      if (!feasible) continue;
      box[0] = std::min(box[0], r0);
      box[1] = std::max(box[1], r0);
      box[2] = std::min(box[2], r1);
      box[3] = std::max(box[3], r1);
    }
  return box;
}

/// Minimum of the barrier over a points x points grid covering `box`.
inline double grid_min_2d(const std::vector<std::vector<double>>& rows, double n,
                          const std::array<double, 4>& box, int points) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < points; ++a)
    for (int b = 0; b < points; ++b) {
      const double r0 = box[0] + (box[1] - box[0]) * a / (points - 1);
      const double r1 = box[2] + (box[3] - box[2]) * b / (points - 1);
      best = std::min(best, barrier(rows, n, {r0, r1}));
    }
  return best;
}

/// Central finite-difference gradient of f at x.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace oracle

#endif  // MREST_TESTS_ORACLES_HPP
