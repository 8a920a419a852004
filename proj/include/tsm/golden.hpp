#pragma once

#include <cmath>
#include <limits>
#include <optional>

namespace tsm {

struct ScalarMinimum {
  double x = 0.0;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

/// Golden-section search on [a, b]. The objective may return +inf for
/// infeasible points; the search keeps the best finite value seen.
template <class F>
ScalarMinimum golden_section_min(F&& f, double a, double b, double xtol,
                                 int max_iter = 200) {
  static const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  ScalarMinimum best;

  double c = b - (b - a) * invphi;
  double d = a + (b - a) * invphi;
  double fc = f(c);
  double fd = f(d);
  best.evaluations = 2;
  auto consider = [&best](double x, double v) {
    if (v < best.value) {
      best.x = x;
      best.value = v;
    }
  };
  consider(c, fc);
  consider(d, fd);

  for (int i = 0; i < max_iter && std::abs(b - a) > xtol; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - (b - a) * invphi;
      fc = f(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + (b - a) * invphi;
      fd = f(d);
      consider(d, fd);
    }
    ++best.evaluations;
  }
  return best;
}

/// Coarse grid scan over [a, b] followed by golden-section refinement
/// around the best grid cell. Returns nullopt when every probed point is
/// infeasible (+inf).
template <class F>
std::optional<ScalarMinimum> grid_then_golden(F&& f, double a, double b,
                                              int grid_points, double xtol,
                                              int max_iter = 200) {
  if (grid_points < 3) grid_points = 3;
  const double h = (b - a) / (grid_points - 1);
  int best_i = -1;
  double best_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double v = f(a + i * h);
    if (v < best_v) {
      best_v = v;
      best_i = i;
    }
  }
  if (best_i < 0) return std::nullopt;

  const double lo = a + std::max(0, best_i - 1) * h;
  const double hi = a + std::min(grid_points - 1, best_i + 1) * h;
  ScalarMinimum refined = golden_section_min(f, lo, hi, xtol, max_iter);
  refined.evaluations += grid_points;
  if (best_v < refined.value) {
    refined.x = a + best_i * h;
    refined.value = best_v;
  }
  if (!std::isfinite(refined.value)) return std::nullopt;
  return refined;
}

}  // namespace tsm
