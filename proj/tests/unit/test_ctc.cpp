#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "swipeforge/ctc.hpp"
#include "swipeforge/error.hpp"
#include "swipeforge/nn/grad_check.hpp"
#include "swipeforge/nn/ops.hpp"

using namespace swipeforge;

namespace {

// Alphabet {a=0, b=1}, blank = 2.
std::set<Labels> brute_alignments(const Labels& target, int length, int symbols) {
  std::set<Labels> out;
  for (const auto& f : testing::all_frame_strings(length, symbols)) {
    if (testing::collapse_frames(f, symbols - 1) == target) out.insert(f);
  }
  return out;
}

std::set<Labels> as_set(const std::vector<Labels>& v) { return {v.begin(), v.end()}; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("alignment sets") {
  CHECK(as_set(ctc_alignments(Labels{0, 1}, 2, 2)) == std::set<Labels>{{0, 1}});
  CHECK(as_set(ctc_alignments(Labels{0}, 2, 2)) == std::set<Labels>{{0, 0}, {0, 2}, {2, 0}});
  CHECK(ctc_alignments(Labels{0, 0}, 2, 2).empty());
  CHECK(as_set(ctc_alignments(Labels{0, 0}, 3, 2)) == std::set<Labels>{{0, 2, 0}});
  for (int t = 1; t <= 5; ++t) {
    for (const Labels& target : {Labels{}, Labels{1}, Labels{0, 1}, Labels{1, 1}, Labels{0, 1, 0}}) {
      CHECK(as_set(ctc_alignments(target, t, 2)) == brute_alignments(target, t, 3));
    }
  }
  CHECK(code_of([] { ctc_alignments(Labels{0}, 9, 2); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { ctc_alignments(Labels{0}, 3, 6); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("loss on hand-computed cases") {
  EmissionSequence uniform{Matrix::Constant(2, 3, 1.0 / 3.0)};
  CHECK(ctc_log_loss(uniform, Labels{0}) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  // Three alignments of probability 1/9 each.
  CHECK(testing::alignment_probability(uniform.probs, ctc_alignments(Labels{0}, 2, 2)) ==
        doctest::Approx(1.0 / 3.0));

  EmissionSequence one{Matrix(1, 3)};
  one.probs << 0.7, 0.2, 0.1;
  CHECK(ctc_log_loss(one, Labels{0}) == doctest::Approx(-std::log(0.7)).epsilon(1e-14));
  CHECK(ctc_log_loss(one, Labels{}) == doctest::Approx(-std::log(0.1)).epsilon(1e-14));

  CHECK(code_of([&] { ctc_log_loss(uniform, Labels{0, 0}); }) == ErrorCode::kImpossibleTarget);
  CHECK(code_of([&] { ctc_log_loss(uniform, Labels{5}); }) == ErrorCode::kUnknownChar);
  EmissionSequence empty{Matrix(0, 3)};
  CHECK(code_of([&] { ctc_log_loss(empty, Labels{}); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("forward recursion equals the alignment sum") {
  const auto stats = testing::ctc_oracle_sweep(2, 5, 31);
  CHECK(stats.max_abs_error < 1e-10);
  CHECK(stats.all_rejections_correct);
  CHECK(stats.cases > 50);
  CHECK(stats.impossible > 0);
}

TEST_CASE("probabilities over all labelings sum to one") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(testing::ctc_oracle_sweep(2, 5, seed).max_normalization_error < 1e-9);
  }
}

TEST_CASE("loss is non-negative and zero for a certain alignment") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    EmissionSequence em{testing::random_emissions(5, 4, rng)};
    CHECK(ctc_log_loss(em, Labels{0, 2}) >= 0.0);
  }
  EmissionSequence sure{Matrix::Zero(4, 3)};
  sure.probs(0, 0) = sure.probs(1, 2) = sure.probs(2, 0) = sure.probs(3, 1) = 1.0;
  CHECK(ctc_log_loss(sure, Labels{0, 0, 1}) == 0.0);
  CHECK(ctc_log_loss(sure, Labels{0, 1}) > 1e20);
}

TEST_CASE("gradient with respect to emissions") {
  Rng rng(8);
  Matrix logits(5, 4);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.uniform(-2, 2);
  for (const Labels& target : {Labels{}, Labels{0}, Labels{1, 1}, Labels{2, 0, 2}}) {
    const double err = nn::grad_check(
        [&](auto x) { return ctc_log_loss(nn::log_softmax_rows(x[0]), target); }, {logits});
    CHECK(err < 1e-6);
  }
}

TEST_CASE("collapse and minimum frames") {
  CHECK(ctc_collapse(Labels{0, 0, 2, 0, 1, 1, 2}, 2) == Labels{0, 0, 1});
  CHECK(ctc_collapse(Labels{2, 2}, 2).empty());
  CHECK(ctc_min_frames(Labels{0, 0, 1}) == 4);
  CHECK(ctc_min_frames(Labels{}) == 0);
  CHECK(ctc_min_frames(Labels{1, 1, 1}) == 5);
}

TEST_CASE("argmax ties go to the lowest index") {
  Matrix m(1, 4);
  m << 0.3, 0.3, 0.3, 0.1;
  CHECK(argmax_row(m, 0) == 0);
  m << 0.1, 0.4, 0.1, 0.4;
  CHECK(argmax_row(m, 0) == 1);
}

TEST_CASE("greedy aggregation") {
  // Argmax pattern a a blank a b over {a, b, blank}.
  EmissionSequence em{Matrix(5, 3)};
  em.probs << 0.6, 0.3, 0.1,
              0.8, 0.1, 0.1,
              0.1, 0.1, 0.8,
              0.5, 0.2, 0.3,
              0.2, 0.7, 0.1;
  const ContractedSequence c = greedy_aggregate(em);
  REQUIRE(c.size() == 3);
  CHECK(c.chars == std::vector<int>{0, 0, 1});
  CHECK(c.spans == std::vector<std::pair<int, int>>{{0, 1}, {3, 3}, {4, 4}});
  CHECK(c.vectors(0, 0) == doctest::Approx(0.7));
  CHECK(c.vectors(0, 1) == doctest::Approx(0.2));
  CHECK(c.vectors.row(1) == em.probs.row(3));
  CHECK(c.vectors.row(2) == em.probs.row(4));

  EmissionSequence blanks{Matrix(3, 3)};
  blanks.probs << 0.1, 0.1, 0.8, 0.2, 0.2, 0.6, 0.0, 0.0, 1.0;
  CHECK(greedy_aggregate(blanks).empty());

  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index t = 1 + static_cast<Eigen::Index>(rng.index(12));
    EmissionSequence r{testing::random_emissions(t, 4, rng)};
    const ContractedSequence out = greedy_aggregate(r);
    CHECK(static_cast<Eigen::Index>(out.size()) <= t);
    int last = -1;
    for (std::size_t k = 0; k < out.size(); ++k) {
      CHECK(argmax_row(out.vectors, static_cast<Eigen::Index>(k)) == out.chars[k]);
      CHECK(out.chars[k] != 3);
      CHECK(std::abs(out.vectors.row(static_cast<Eigen::Index>(k)).sum() - 1.0) < 1e-12);
      CHECK(out.spans[k].first > last);
      CHECK(out.spans[k].second >= out.spans[k].first);
      last = out.spans[k].second;
    }
  }
}
