#pragma once

#include <span>
#include <string>
#include <vector>

#include "swipeforge/geometry.hpp"
#include "swipeforge/pipeline.hpp"

namespace swipeforge {

/// Interior angle at p1 between the rays to p0 and p2, in degrees [0, 180].
/// Throws Error(kInvalidArgument) when p1 coincides with p0 or p2.
double angle_subtended(Point p0, Point p1, Point p2);

/// Every contiguous 3-character window, in order.
std::vector<std::u32string> extract_trigrams(std::u32string_view word);

struct AngleBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t trigrams = 0;     // distinct 3-grams whose angle falls here
  std::size_t occurrences = 0;  // 3-gram occurrences over evaluated words
  std::size_t errors = 0;       // occurrences inside a misdecoded word
  double mean_angle = 0.0;
  double error_rate = 0.0;
};

struct ErrorAnalysis {
  std::size_t evaluated = 0;
  std::vector<LengthBin> length_bins;
  std::vector<AngleBin> angle_bins;  // ten equal-width bins over [0, 180]
  std::size_t trigrams_skipped = 0;  // off-layout or degenerate geometry
};

/// Length bins use the gold word; 3-gram angles use the traced word's key
/// centers on `layout`.
ErrorAnalysis error_analysis(std::span<const Prediction> predictions, const KeyboardLayout& layout);

std::string to_json(const ErrorAnalysis& analysis);

/// Accuracy per gold-word length, bins of width 1 in increasing order.
std::vector<LengthBin> length_bins(std::span<const Prediction> predictions);

}  // namespace swipeforge
