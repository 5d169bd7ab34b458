#include "swipeforge/analysis.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include <json.hpp>

#include "swipeforge/error.hpp"

namespace swipeforge {

double angle_subtended(Point p0, Point p1, Point p2) {
  const Point a = p0 - p1;
  const Point b = p2 - p1;
  if (norm(a) == 0.0 || norm(b) == 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "angle is undefined when the vertex coincides with an end point");
  }
  // atan2 of cross and dot stays accurate near 0 and 180 degrees.
  const double cross = a.x * b.y - a.y * b.x;
  const double dot = a.x * b.x + a.y * b.y;
  return std::abs(std::atan2(cross, dot)) * 180.0 / std::numbers::pi;
}

std::vector<std::u32string> extract_trigrams(std::u32string_view word) {
  std::vector<std::u32string> out;
  for (std::size_t i = 0; i + 3 <= word.size(); ++i) out.emplace_back(word.substr(i, 3));
  return out;
}

ErrorAnalysis error_analysis(std::span<const Prediction> predictions, const KeyboardLayout& layout) {
  ErrorAnalysis out;
  out.evaluated = predictions.size();
  out.length_bins = length_bins(predictions);

  struct Tally {
    double angle = 0.0;
    std::size_t occurrences = 0;
    std::size_t errors = 0;
  };
  std::map<std::u32string, Tally> trigrams;
  for (const auto& p : predictions) {
    for (const auto& g : extract_trigrams(p.traced_word)) {
      if (!layout.contains(g[0]) || !layout.contains(g[1]) || !layout.contains(g[2])) {
        ++out.trigrams_skipped;
        continue;
      }
      const Point a = layout.key_center(g[0]);
      const Point b = layout.key_center(g[1]);
      const Point c = layout.key_center(g[2]);
      if (a == b || b == c) {
        ++out.trigrams_skipped;
        continue;
      }
      Tally& t = trigrams[g];
      t.angle = angle_subtended(a, b, c);
      ++t.occurrences;
      if (!p.correct) ++t.errors;
    }
  }

  constexpr int kBins = 10;
  out.angle_bins.resize(kBins);
  std::vector<double> angle_sum(kBins, 0.0);
  for (int i = 0; i < kBins; ++i) {
    out.angle_bins[static_cast<std::size_t>(i)].lower = 18.0 * i;
    out.angle_bins[static_cast<std::size_t>(i)].upper = 18.0 * (i + 1);
  }
  for (const auto& [gram, t] : trigrams) {
    const int i = std::min(kBins - 1, static_cast<int>(t.angle / 18.0));
    AngleBin& bin = out.angle_bins[static_cast<std::size_t>(i)];
    ++bin.trigrams;
    bin.occurrences += t.occurrences;
    bin.errors += t.errors;
    angle_sum[static_cast<std::size_t>(i)] += t.angle;
  }
  for (int i = 0; i < kBins; ++i) {
    AngleBin& bin = out.angle_bins[static_cast<std::size_t>(i)];
    if (bin.trigrams > 0) bin.mean_angle = angle_sum[static_cast<std::size_t>(i)] / static_cast<double>(bin.trigrams);
    if (bin.occurrences > 0) bin.error_rate = 100.0 * static_cast<double>(bin.errors) / static_cast<double>(bin.occurrences);
  }
  return out;
}

std::string to_json(const ErrorAnalysis& a) {
  nlohmann::ordered_json doc;
  doc["evaluated"] = a.evaluated;
  doc["length_bins"] = nlohmann::ordered_json::array();
  for (const auto& b : a.length_bins) {
    doc["length_bins"].push_back({{"length", b.length}, {"count", b.count}, {"correct", b.correct},
                                  {"accuracy", b.accuracy}});
  }
  doc["angle_bins"] = nlohmann::ordered_json::array();
  for (const auto& b : a.angle_bins) {
    doc["angle_bins"].push_back({{"lower", b.lower},
                                 {"upper", b.upper},
                                 {"trigrams", b.trigrams},
                                 {"occurrences", b.occurrences},
                                 {"errors", b.errors},
                                 {"mean_angle", b.mean_angle},
                                 {"error_rate", b.error_rate}});
  }
  doc["trigrams_skipped"] = a.trigrams_skipped;
  return doc.dump(2);
}

}  // namespace swipeforge
