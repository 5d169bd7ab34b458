#include "swipeforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "swipeforge/error.hpp"

namespace swipeforge {
namespace {

// k! / (k - m)!
double falling_factorial(int k, int m) {
  double r = 1.0;
  for (int i = 0; i < m; ++i) r *= static_cast<double>(k - i);
  return r;
}

double poly_derivative(const std::array<double, 6>& c, double t, int order) {
  double acc = 0.0;
  double power = 1.0;
  for (int k = order; k < 6; ++k) {
    acc += c[static_cast<std::size_t>(k)] * falling_factorial(k, order) * power;
    power *= t;
  }
  return acc;
}

int samples_for_length(double length, double points_per_unit, int minimum) {
  const auto n = static_cast<int>(std::lround(points_per_unit * length));
  return std::max(minimum, n);
}

void append_skipping_first(std::vector<Point>& out, const std::vector<Point>& segment) {
  out.insert(out.end(), segment.begin() + 1, segment.end());
}

// Closed loop that leaves `at`, bulges up to `radius` away and returns,
// timed with the minimum-jerk profile so it starts and ends at rest.
std::vector<Point> repeat_loop(Point at, double radius, int n) {
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n));
  constexpr double kPhase = std::numbers::pi / 2;
  for (int j = 0; j < n; ++j) {
    const double tau = static_cast<double>(j) / (n - 1);
    const double s = min_jerk_profile(tau);
    const double mag = radius * std::sin(std::numbers::pi * s);
    const double ang = 2 * std::numbers::pi * s + kPhase;
    pts.push_back(at + Point{mag * std::cos(ang), mag * std::sin(ang)});
  }
  pts.front() = at;
  pts.back() = at;
  return pts;
}

}  // namespace

double min_jerk_profile(double tau, int order) {
  static constexpr std::array<double, 6> kCoeffs = {0.0, 0.0, 0.0, 10.0, -15.0, 6.0};
  return poly_derivative(kCoeffs, tau, order);
}

std::vector<Point> min_jerk_segment(Point p0, Point p1, int n) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "min_jerk_segment needs at least 2 samples");
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n));
  const Point delta = p1 - p0;
  for (int j = 0; j < n; ++j) {
    const double tau = static_cast<double>(j) / (n - 1);
    pts.push_back(p0 + min_jerk_profile(tau) * delta);
  }
  pts.back() = p1;
  return pts;
}

ViaPointTrajectory::ViaPointTrajectory(Point p0, Point via, Point p1, double via_time) : via_time_(via_time) {
  if (!(via_time > 0.0 && via_time < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "via time must lie strictly inside (0, 1)");
  }
  // Unknowns: left c0..c5 (local time u in [0, tv]), right c0..c5 (local
  // time w in [0, 1 - tv]).
  const double tv = via_time;
  const double h = 1.0 - tv;
  Eigen::Matrix<double, 12, 12> A = Eigen::Matrix<double, 12, 12>::Zero();
  Eigen::Matrix<double, 12, 2> b = Eigen::Matrix<double, 12, 2>::Zero();
  int row = 0;
  // Start at rest at p0.
  for (int m = 0; m < 3; ++m) {
    A(row, m) = falling_factorial(m, m);
    if (m == 0) b.row(row) << p0.x, p0.y;
    ++row;
  }
  // Left piece reaches the via point.
  for (int k = 0; k < 6; ++k) A(row, k) = std::pow(tv, k);
  b.row(row++) << via.x, via.y;
  // Right piece starts at the via point.
  A(row, 6) = 1.0;
  b.row(row++) << via.x, via.y;
  // Derivatives 1..4 continuous at the junction.
  for (int m = 1; m <= 4; ++m) {
    for (int k = m; k < 6; ++k) A(row, k) = falling_factorial(k, m) * std::pow(tv, k - m);
    A(row, 6 + m) = -falling_factorial(m, m);
    ++row;
  }
  // End at rest at p1.
  for (int m = 0; m < 3; ++m) {
    for (int k = m; k < 6; ++k) A(row, 6 + k) = falling_factorial(k, m) * std::pow(h, k - m);
    if (m == 0) b.row(row) << p1.x, p1.y;
    ++row;
  }
  const Eigen::Matrix<double, 12, 2> coeffs = A.fullPivLu().solve(b);
  for (std::size_t axis = 0; axis < 2; ++axis) {
    for (std::size_t k = 0; k < 6; ++k) {
      left_[axis][k] = coeffs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(axis));
      right_[axis][k] = coeffs(static_cast<Eigen::Index>(6 + k), static_cast<Eigen::Index>(axis));
    }
  }
}

Point ViaPointTrajectory::derivative(double tau, int order, Side side) const {
  const bool use_left = tau < via_time_ || (tau == via_time_ && side == Side::kLeft);
  if (use_left) return {poly_derivative(left_[0], tau, order), poly_derivative(left_[1], tau, order)};
  const double w = tau - via_time_;
  return {poly_derivative(right_[0], w, order), poly_derivative(right_[1], w, order)};
}

double via_time(Point p0, Point via, Point p1, int n) {
  const double d1 = distance(p0, via);
  const double d2 = distance(via, p1);
  const double ratio = (d1 + d2) > 0.0 ? d1 / (d1 + d2) : 0.5;
  const auto steps = n - 1;
  const auto j = std::clamp(static_cast<int>(std::lround(ratio * steps)), 1, steps - 1);
  return static_cast<double>(j) / steps;
}

std::vector<Point> via_point_segment(Point p0, Point via, Point p1, int n) {
  if (n < 3) throw Error(ErrorCode::kInvalidArgument, "via_point_segment needs at least 3 samples");
  const ViaPointTrajectory traj(p0, via, p1, via_time(p0, via, p1, n));
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double tau = static_cast<double>(j) / (n - 1);
    pts.push_back(traj.derivative(tau, 0, ViaPointTrajectory::Side::kLeft));
  }
  pts.front() = p0;
  pts.back() = p1;
  return pts;
}

Point perturb_endpoint(const KeyboardLayout& layout, char32_t c, double sigma, Rng& rng) {
  if (sigma < 0.0) throw Error(ErrorCode::kInvalidArgument, "endpoint sigma must be non-negative");
  const KeyRect& key = layout.key(c);
  const double std_dev = sigma * key.w;
  const double nx = rng.normal();
  const double ny = rng.normal();
  return {key.cx + std_dev * nx, key.cy + std_dev * ny};
}

Point sample_via(Point p0, Point p1, Rng& rng) {
  const double x = rng.uniform(std::min(p0.x, p1.x), std::max(p0.x, p1.x));
  const double y = rng.uniform(std::min(p0.y, p1.y), std::max(p0.y, p1.y));
  return {x, y};
}

Trace synthesize_trace(const KeyboardLayout& layout, const std::u32string& word, const SynthConfig& cfg, Rng& rng) {
  if (word.empty()) throw Error(ErrorCode::kEmptyInput, "cannot synthesize a trace for an empty word");
  if (!(cfg.points_per_unit > 0.0)) throw Error(ErrorCode::kInvalidArgument, "points_per_unit must be positive");
  for (char32_t c : word) layout.key(c);

  std::vector<Point> anchors;
  anchors.reserve(word.size());
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (i > 0 && word[i] == word[i - 1]) {
      anchors.push_back(anchors.back());
    } else {
      anchors.push_back(perturb_endpoint(layout, word[i], cfg.endpoint_sigma, rng));
    }
  }

  Trace trace{{anchors.front()}, word, layout.name()};
  if (word.size() == 1) {
    const double jitter = 0.25 * cfg.endpoint_sigma * layout.key(word[0]).w;
    for (int k = 0; k < 2; ++k) {
      const double nx = rng.normal();
      const double ny = rng.normal();
      trace.points.push_back(anchors[0] + Point{jitter * nx, jitter * ny});
    }
    return trace;
  }

  for (std::size_t i = 0; i + 1 < word.size(); ++i) {
    const Point a = anchors[i];
    const Point b = anchors[i + 1];
    if (word[i] == word[i + 1]) {
      const double radius = cfg.repeat_loop_radius * layout.key(word[i]).w;
      append_skipping_first(trace.points, repeat_loop(a, radius, samples_for_length(5.0 * radius, cfg.points_per_unit, 6)));
    } else if (cfg.via_noise) {
      const Point via = sample_via(a, b, rng);
      const int n = samples_for_length(distance(a, via) + distance(via, b), cfg.points_per_unit, 3);
      append_skipping_first(trace.points, via_point_segment(a, via, b, n));
    } else {
      append_skipping_first(trace.points, min_jerk_segment(a, b, samples_for_length(distance(a, b), cfg.points_per_unit, 3)));
    }
  }
  return trace;
}

FeatureSequence featurize(const Trace& trace, const KeyboardLayout& layout) {
  const auto n = static_cast<Eigen::Index>(trace.points.size());
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "cannot featurize an empty trace");
  FeatureSequence fs;
  fs.rows = Matrix::Zero(n, FeatureSequence::kOneHotOffset + static_cast<Eigen::Index>(layout.size()));
  const auto& p = trace.points;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const Point pt = p[u];
    if (!std::isfinite(pt.x) || !std::isfinite(pt.y)) throw Error(ErrorCode::kNonFinite, "trace contains a non-finite point");
    Point d{0.0, 0.0};
    if (n > 1) {
      if (i == 0) {
        d = p[1] - p[0];
      } else if (i == n - 1) {
        d = p[u] - p[u - 1];
      } else {
        d = 0.5 * (p[u + 1] - p[u - 1]);
      }
    }
    fs.rows(i, 0) = pt.x;
    fs.rows(i, 1) = pt.y;
    fs.rows(i, 2) = d.x;
    fs.rows(i, 3) = d.y;
    fs.rows(i, FeatureSequence::kOneHotOffset + layout.nearest_key(pt)) = 1.0;
  }
  return fs;
}

}  // namespace swipeforge
