#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "swipeforge/analysis.hpp"
#include "swipeforge/error.hpp"
#include "swipeforge/random.hpp"

using namespace swipeforge;

namespace {

// Law of cosines, kept separate from the atan2 form under test.
double angle_by_cosines(Point p0, Point p1, Point p2) {
  const double a = norm(p0 - p1);
  const double b = norm(p2 - p1);
  const double c = norm(p2 - p0);
  const double cosine = std::clamp((a * a + b * b - c * c) / (2.0 * a * b), -1.0, 1.0);
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

Prediction prediction(const std::u32string& word, bool correct) {
  Prediction p;
  p.traced_word = word;
  p.gold = word;
  p.correct = correct;
  p.candidates = {correct ? word : U"zzz"};
  return p;
}

}  // namespace

TEST_CASE("angle examples") {
  CHECK(angle_subtended({1, 0}, {0, 0}, {0, 1}) == doctest::Approx(90.0));
  CHECK(angle_subtended({-1, 0}, {0, 0}, {1, 0}) == doctest::Approx(180.0));
  CHECK(angle_subtended({1, 0}, {0, 0}, {2, 0}) == doctest::Approx(0.0));
  CHECK(angle_subtended({1, 0}, {0, 0}, {1, 1}) == doctest::Approx(45.0));
  CHECK(angle_subtended({1, 0}, {0, 0}, {1, 1e-9}) < 1e-6);
  CHECK_THROWS_AS(angle_subtended({0, 0}, {0, 0}, {1, 0}), Error);
  CHECK_THROWS_AS(angle_subtended({1, 0}, {0, 0}, {0, 0}), Error);
}

TEST_CASE("angle agrees with the law of cosines and is symmetric") {
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const Point a{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const Point b{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const Point c{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const double theta = angle_subtended(a, b, c);
    CHECK(theta >= 0.0);
    CHECK(theta <= 180.0);
    CHECK(theta == doctest::Approx(angle_by_cosines(a, b, c)).epsilon(1e-6));
    CHECK(theta == doctest::Approx(angle_subtended(c, b, a)).epsilon(1e-12));
    const Point shift{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    CHECK(theta == doctest::Approx(angle_subtended(a + shift, b + shift, c + shift)).epsilon(1e-9));
  }
}

TEST_CASE("trigram extraction") {
  CHECK(extract_trigrams(U"abcd") == std::vector<std::u32string>{U"abc", U"bcd"});
  CHECK(extract_trigrams(U"abc") == std::vector<std::u32string>{U"abc"});
  CHECK(extract_trigrams(U"ab").empty());
  CHECK(extract_trigrams(U"").empty());
  CHECK(extract_trigrams(U"नमस्ते").size() == 4);
}

TEST_CASE("error analysis bins") {
  const KeyboardLayout layout = bundled_layout("qwerty_en");
  const auto words = testing::lexicon_words("en_words.txt", 120);
  std::vector<Prediction> all_correct;
  for (const auto& w : words) all_correct.push_back(prediction(w, true));
  const ErrorAnalysis ok = error_analysis(all_correct, layout);
  CHECK(ok.evaluated == words.size());
  REQUIRE(ok.angle_bins.size() == 10);
  std::size_t counted = 0;
  for (const auto& b : ok.length_bins) {
    CHECK(b.accuracy == 100.0);
    counted += b.count;
  }
  CHECK(counted == words.size());
  std::size_t occurrences = 0;
  for (std::size_t i = 0; i < ok.angle_bins.size(); ++i) {
    const AngleBin& b = ok.angle_bins[i];
    CHECK(b.lower == doctest::Approx(18.0 * static_cast<double>(i)));
    CHECK(b.errors == 0);
    CHECK(b.error_rate == 0.0);
    if (b.trigrams > 0) {
      CHECK(b.mean_angle >= b.lower);
      CHECK(b.mean_angle <= b.upper);
    }
    occurrences += b.occurrences;
  }
  std::size_t expected = 0;
  for (const auto& w : words) expected += extract_trigrams(w).size();
  CHECK(occurrences + ok.trigrams_skipped == expected);

  std::vector<Prediction> all_wrong;
  for (const auto& w : words) all_wrong.push_back(prediction(w, false));
  const ErrorAnalysis bad = error_analysis(all_wrong, layout);
  for (const auto& b : bad.length_bins) CHECK(b.accuracy == 0.0);
  for (const auto& b : bad.angle_bins) {
    if (b.occurrences > 0) CHECK(b.error_rate == 100.0);
  }
}

TEST_CASE("error analysis tallies by hand") {
  const KeyboardLayout layout = bundled_layout("qwerty_en");
  // "qwe" is collinear along the top row, so its angle is 180.
  std::vector<Prediction> preds{prediction(U"qwe", false), prediction(U"qwe", true), prediction(U"aab", true),
                                prediction(U"q1w", true)};
  const ErrorAnalysis a = error_analysis(preds, layout);
  CHECK(a.trigrams_skipped == 2);
  const AngleBin& last = a.angle_bins.back();
  CHECK(last.trigrams == 1);
  CHECK(last.occurrences == 2);
  CHECK(last.errors == 1);
  CHECK(last.error_rate == 50.0);
  CHECK(last.mean_angle == doctest::Approx(180.0));
  REQUIRE(a.length_bins.size() == 1);
  CHECK(a.length_bins[0].length == 3);
  CHECK(a.length_bins[0].count == 4);
  CHECK(a.length_bins[0].correct == 3);
  CHECK(a.length_bins[0].accuracy == 75.0);
  const std::string json = to_json(a);
  CHECK(json.find("\"angle_bins\"") != std::string::npos);
  CHECK(json.find("\"trigrams_skipped\": 2") != std::string::npos);
}
