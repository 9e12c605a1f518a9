#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "photostyle/error.hpp"
#include "photostyle/image.hpp"
#include "photostyle/losses.hpp"

namespace photostyle {

enum class OptimizerMethod { lbfgs, adam };
enum class Termination { max_iters, converged, line_search_failure };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::max_iters: return "max_iters";
    case Termination::converged: return "converged";
    case Termination::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

inline std::string to_string(OptimizerMethod m) { return m == OptimizerMethod::lbfgs ? "lbfgs" : "adam"; }

struct OptimizerParams {
  OptimizerMethod method = OptimizerMethod::lbfgs;
  std::size_t max_iters = 500;
  /// L-BFGS memory length.
  std::size_t history = 10;
  /// Strong-Wolfe constants.
  double c1 = 1e-4;
  double c2 = 0.9;
  std::size_t max_line_search_evals = 30;
  /// Adam.
  double step_size = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Stop when the total drops by less than `tolerance` (relative) over
  /// `tolerance_window` iterations.
  double tolerance = 1e-6;
  std::size_t tolerance_window = 5;
  /// Stop when the largest gradient component is at most this.
  double gradient_tolerance = 1e-12;
  std::uint64_t seed = 0;

  [[nodiscard]] std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (max_iters == 0) out.emplace_back("optimizer max_iters must be > 0");
    if (history == 0) out.emplace_back("optimizer history must be > 0");
    if (!(tolerance > 0)) out.emplace_back("optimizer tolerance must be > 0");
    if (tolerance_window == 0) out.emplace_back("optimizer tolerance_window must be > 0");
    if (!(step_size > 0)) out.emplace_back("optimizer step_size must be > 0");
    if (!(c1 > 0 && c1 < c2 && c2 < 1)) out.emplace_back("optimizer requires 0 < c1 < c2 < 1");
    return out;
  }
};

template <typename Real = double>
struct StageResult {
  BasicImage<Real> image;
  /// Entry 0 is the initial point, entry k the iterate after iteration k.
  std::vector<LossBreakdown<Real>> trace;
  Termination termination = Termination::max_iters;
  std::size_t evaluations = 0;
};

template <typename Real>
using IterationCallback = std::function<void(std::size_t, const BasicImage<Real>&, const LossBreakdown<Real>&)>;

namespace detail {

template <typename Real>
double dot(const std::vector<Real>& a, const std::vector<Real>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <typename Real>
double max_abs(const std::vector<Real>& a) {
  double m = 0;
  for (Real v : a) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

template <typename Real>
void require_finite(const Evaluation<Real>& e, std::size_t iteration) {
  const bool finite = std::isfinite(static_cast<double>(e.value())) && e.gradient.all_finite();
  if (!finite) {
    throw Error(ErrorCode::non_finite,
                "non-finite loss or gradient at iteration " + std::to_string(iteration));
  }
}

/// Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb), or NaN.
inline double cubic_minimizer(double a, double fa, double ga, double b, double fb, double gb) {
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  if (disc < 0) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double denom = gb - ga + 2.0 * d2;
  if (denom == 0) return std::numeric_limits<double>::quiet_NaN();
  return b - (b - a) * (gb + d2 - d1) / denom;
}

inline bool relative_stall(const std::vector<double>& totals, const OptimizerParams& p) {
  if (totals.size() <= p.tolerance_window) return false;
  const double before = totals[totals.size() - 1 - p.tolerance_window];
  const double now = totals.back();
  const double scale = std::max(std::abs(before), std::numeric_limits<double>::min());
  return (before - now) < p.tolerance * scale;
}

template <typename Real, typename Objective>
struct LineSearch {
  Objective& objective;
  const OptimizerParams& params;
  const BasicImage<Real>& origin;
  const std::vector<Real>& direction;
  double f0;
  double slope0;
  std::size_t evaluations = 0;

  struct Point {
    double step = 0;
    double value = 0;
    double slope = 0;
    std::optional<Evaluation<Real>> eval;
  };

  Point probe(double step) {
    BasicImage<Real> trial = origin;
    auto data = trial.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += static_cast<Real>(step) * direction[i];
    ++evaluations;
    Evaluation<Real> e = objective(trial);
    Point p;
    p.step = step;
    p.value = static_cast<double>(e.value());
    if (!std::isfinite(p.value) || !e.gradient.all_finite()) {
      p.value = std::numeric_limits<double>::infinity();
      p.slope = std::numeric_limits<double>::quiet_NaN();
      return p;
    }
    p.slope = dot(e.gradient.storage(), direction);
    p.eval = std::move(e);
    return p;
  }

  [[nodiscard]] bool armijo(const Point& p) const { return p.value <= f0 + params.c1 * p.step * slope0; }
  [[nodiscard]] bool curvature(const Point& p) const { return std::abs(p.slope) <= -params.c2 * slope0; }

  /// Returns a point satisfying the strong Wolfe conditions or, failing
  /// that, the best point with sufficient decrease.
  std::optional<Point> run(double initial_step) {
    Point prev{0.0, f0, slope0, std::nullopt};
    std::optional<Point> best_armijo;
    double step = initial_step;
    for (bool first = true; evaluations < params.max_line_search_evals; first = false) {
      Point cur = probe(step);
      if (cur.eval && armijo(cur) && (!best_armijo || cur.value < best_armijo->value)) best_armijo = cur;
      if (!armijo(cur) || (!first && cur.value >= prev.value)) return zoom(prev, cur, best_armijo);
      if (curvature(cur)) return cur;
      if (cur.slope >= 0) return zoom(cur, prev, best_armijo);
      prev = cur;
      step *= 4.0;
    }
    return best_armijo;
  }

  std::optional<Point> zoom(Point lo, Point hi, std::optional<Point> best_armijo) {
    while (evaluations < params.max_line_search_evals) {
      const double a = std::min(lo.step, hi.step);
      const double b = std::max(lo.step, hi.step);
      const double width = b - a;
      if (width <= 1e-16 * std::max(1.0, b)) break;
      double step = std::numeric_limits<double>::quiet_NaN();
      if (std::isfinite(hi.value) && std::isfinite(hi.slope)) {
        step = cubic_minimizer(lo.step, lo.value, lo.slope, hi.step, hi.value, hi.slope);
      }
      if (!std::isfinite(step) || step < a + 0.1 * width || step > b - 0.1 * width) step = 0.5 * (a + b);
      Point cur = probe(step);
      if (cur.eval && armijo(cur) && (!best_armijo || cur.value < best_armijo->value)) best_armijo = cur;
      if (!armijo(cur) || cur.value >= lo.value) {
        hi = cur;
      } else {
        if (curvature(cur)) return cur;
        if (cur.slope * (hi.step - lo.step) >= 0) hi = lo;
        lo = cur;
      }
    }
    return best_armijo;
  }
};

}  // namespace detail

/// L-BFGS with a strong-Wolfe line search. Every accepted step satisfies
/// sufficient decrease, so the trace totals never increase.
template <typename Real, typename Objective>
StageResult<Real> minimize_lbfgs(Objective&& objective, BasicImage<Real> x, const OptimizerParams& params,
                                 const IterationCallback<Real>& callback = {}) {
  StageResult<Real> result;
  Evaluation<Real> current = objective(x);
  result.evaluations = 1;
  detail::require_finite(current, 0);
  result.trace.push_back(current.breakdown);
  std::vector<double> totals{static_cast<double>(current.value())};

  std::deque<std::vector<Real>> s_hist;
  std::deque<std::vector<Real>> y_hist;
  std::deque<double> rho_hist;
  const std::size_t n = x.size();
  std::vector<Real> direction(n);
  std::vector<double> alpha(params.history);

  result.termination = Termination::max_iters;
  for (std::size_t iter = 1; iter <= params.max_iters; ++iter) {
    const auto& g = current.gradient.storage();
    if (detail::max_abs(g) <= params.gradient_tolerance) {
      result.termination = Termination::converged;
      break;
    }
    // Two-loop recursion for -H g.
    std::vector<double> q(g.begin(), g.end());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      double a = 0;
      for (std::size_t i = 0; i < n; ++i) a += static_cast<double>(s_hist[k][i]) * q[i];
      a *= rho_hist[k];
      alpha[k] = a;
      for (std::size_t i = 0; i < n; ++i) q[i] -= a * static_cast<double>(y_hist[k][i]);
    }
    if (!s_hist.empty()) {
      const double gamma = 1.0 / (rho_hist.back() * detail::dot(y_hist.back(), y_hist.back()));
      for (auto& v : q) v *= gamma;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      double b = 0;
      for (std::size_t i = 0; i < n; ++i) b += static_cast<double>(y_hist[k][i]) * q[i];
      b *= rho_hist[k];
      for (std::size_t i = 0; i < n; ++i) q[i] += static_cast<double>(s_hist[k][i]) * (alpha[k] - b);
    }
    for (std::size_t i = 0; i < n; ++i) direction[i] = static_cast<Real>(-q[i]);
    double slope = detail::dot(g, direction);
    if (!(slope < 0)) {
      // Memory produced an ascent direction; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) direction[i] = -g[i];
      slope = detail::dot(g, direction);
    }
    const double initial_step =
        s_hist.empty() ? std::min(1.0, 1.0 / std::sqrt(detail::dot(g, g))) : 1.0;

    detail::LineSearch<Real, std::remove_reference_t<Objective>> search{
        objective, params, x, direction, static_cast<double>(current.value()), slope};
    auto accepted = search.run(initial_step);
    result.evaluations += search.evaluations;
    if (!accepted || !accepted->eval) {
      result.termination = Termination::line_search_failure;
      break;
    }
    std::vector<Real> s(n), y(n);
    auto xd = x.data();
    const auto& new_g = accepted->eval->gradient.storage();
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<Real>(accepted->step) * direction[i];
      xd[i] += s[i];
      y[i] = new_g[i] - g[i];
    }
    current = std::move(*accepted->eval);
    detail::require_finite(current, iter);
    result.trace.push_back(current.breakdown);
    totals.push_back(static_cast<double>(current.value()));
    if (callback) callback(iter, x, current.breakdown);

    const double sy = detail::dot(s, y);
    if (sy > 1e-12 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
      if (s_hist.size() == params.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    if (detail::relative_stall(totals, params)) {
      result.termination = Termination::converged;
      break;
    }
  }
  result.image = std::move(x);
  return result;
}

template <typename Real, typename Objective>
StageResult<Real> minimize_adam(Objective&& objective, BasicImage<Real> x, const OptimizerParams& params,
                                const IterationCallback<Real>& callback = {}) {
  StageResult<Real> result;
  Evaluation<Real> current = objective(x);
  result.evaluations = 1;
  detail::require_finite(current, 0);
  result.trace.push_back(current.breakdown);
  std::vector<double> totals{static_cast<double>(current.value())};
  const std::size_t n = x.size();
  std::vector<double> m(n, 0.0), v(n, 0.0);
  double b1 = 1.0, b2 = 1.0;
  result.termination = Termination::max_iters;
  for (std::size_t iter = 1; iter <= params.max_iters; ++iter) {
    const auto& g = current.gradient.storage();
    if (detail::max_abs(g) <= params.gradient_tolerance) {
      result.termination = Termination::converged;
      break;
    }
    b1 *= params.beta1;
    b2 *= params.beta2;
    auto xd = x.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = params.beta1 * m[i] + (1 - params.beta1) * gi;
      v[i] = params.beta2 * v[i] + (1 - params.beta2) * gi * gi;
      const double mh = m[i] / (1 - b1);
      const double vh = v[i] / (1 - b2);
      xd[i] -= static_cast<Real>(params.step_size * mh / (std::sqrt(vh) + params.adam_eps));
    }
    current = objective(x);
    ++result.evaluations;
    detail::require_finite(current, iter);
    result.trace.push_back(current.breakdown);
    totals.push_back(static_cast<double>(current.value()));
    if (callback) callback(iter, x, current.breakdown);
    if (detail::relative_stall(totals, params)) {
      result.termination = Termination::converged;
      break;
    }
  }
  result.image = std::move(x);
  return result;
}

/// Minimizes `objective` (image -> Evaluation) starting from `init`.
template <typename Real, typename Objective>
StageResult<Real> minimize(Objective&& objective, const BasicImage<Real>& init, const OptimizerParams& params,
                           const IterationCallback<Real>& callback = {}) {
  const auto problems = params.violations();
  if (!problems.empty()) throw Error(ErrorCode::invalid_argument, problems.front());
  if (!init.all_finite()) throw Error(ErrorCode::non_finite, "initial image is not finite");
  if (params.method == OptimizerMethod::adam) return minimize_adam(objective, init, params, callback);
  return minimize_lbfgs(objective, init, params, callback);
}

}  // namespace photostyle
