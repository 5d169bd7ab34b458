#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "swipeforge/geometry.hpp"
#include "swipeforge/matrix.hpp"
#include "swipeforge/random.hpp"

namespace swipeforge {

/// A sampled swipe path for one word.
struct Trace {
  std::vector<Point> points;
  std::u32string word;
  std::string layout_name;
};

/// Per-point decoder input: x, y, dx, dy followed by a one-hot of the
/// nearest key. Always recomputed from a Trace, never stored.
struct FeatureSequence {
  static constexpr Eigen::Index kOneHotOffset = 4;

  Matrix rows;

  Eigen::Index length() const { return rows.rows(); }
  Eigen::Index width() const { return rows.cols(); }
};

struct SynthConfig {
  double points_per_unit = 40.0;
  /// Endpoint Gaussian std, as a fraction of the key width.
  double endpoint_sigma = 0.15;
  bool via_noise = true;
  std::uint64_t rng_seed = 7;
  /// Radius of the loop drawn for a repeated character, in key widths.
  double repeat_loop_radius = 0.4;

  /// No endpoint jitter and no via points.
  static SynthConfig zero_noise() {
    SynthConfig cfg;
    cfg.endpoint_sigma = 0.0;
    cfg.via_noise = false;
    return cfg;
  }
};

/// Normalized minimum-jerk position profile 10t^3 - 15t^4 + 6t^5 and its
/// derivatives (order 0..5) at t in [0, 1].
double min_jerk_profile(double tau, int order = 0);

/// n samples uniform in normalized time on the single-segment quintic.
/// Throws Error(kInvalidArgument) for n < 2.
std::vector<Point> min_jerk_segment(Point p0, Point p1, int n);

/// Two quintic pieces joined at a fixed via time. The junction velocity and
/// acceleration are chosen to minimize integrated squared jerk, which makes
/// position and its first four derivatives continuous at the via point.
/// Both ends start and stop at rest.
class ViaPointTrajectory {
 public:
  enum class Side { kLeft, kRight };

  ViaPointTrajectory(Point p0, Point via, Point p1, double via_time);

  double via_time() const { return via_time_; }
  /// order-th time derivative at tau in [0, 1]. At the junction, `side`
  /// picks the piece that is evaluated.
  Point derivative(double tau, int order, Side side = Side::kRight) const;
  Point position(double tau) const { return derivative(tau, 0); }

 private:
  // Coefficients c0..c5 of each piece in local time, per axis.
  std::array<std::array<double, 6>, 2> left_{};
  std::array<std::array<double, 6>, 2> right_{};
  double via_time_ = 0.5;
};

/// Via time for n uniform samples: the path-length split
/// |p0-pv| / (|p0-pv| + |pv-p1|), snapped to the nearest interior sample so
/// the via point itself is sampled.
double via_time(Point p0, Point via, Point p1, int n);

/// n samples uniform in time through p0 -> via -> p1. Throws for n < 3.
std::vector<Point> via_point_segment(Point p0, Point via, Point p1, int n);

/// Key center plus isotropic Gaussian noise with std sigma * key width.
Point perturb_endpoint(const KeyboardLayout& layout, char32_t c, double sigma, Rng& rng);

/// Uniform sample from the axis-aligned box spanned by p0 and p1.
Point sample_via(Point p0, Point p1, Rng& rng);

/// Full trace for `word`; see SynthConfig for the noise knobs. Throws
/// Error(kEmptyInput) for an empty word and Error(kUnknownChar) for a
/// character missing from the layout.
Trace synthesize_trace(const KeyboardLayout& layout, const std::u32string& word, const SynthConfig& cfg, Rng& rng);

/// Throws Error(kEmptyInput) for an empty trace.
FeatureSequence featurize(const Trace& trace, const KeyboardLayout& layout);

}  // namespace swipeforge
