#pragma once

#include <span>
#include <utility>
#include <vector>

#include "swipeforge/matrix.hpp"
#include "swipeforge/nn/tensor.hpp"

namespace swipeforge {

using Labels = std::vector<int>;

/// Per-frame distributions over |C| characters plus the blank, which is
/// always the last column.
struct EmissionSequence {
  Matrix probs;

  Eigen::Index length() const { return probs.rows(); }
  int blank() const { return static_cast<int>(probs.cols()) - 1; }
};

/// Averaged runs of frames sharing a non-blank argmax, in frame order.
struct ContractedSequence {
  Matrix vectors;                             // K x (|C| + 1)
  std::vector<int> chars;                     // argmax character of each run
  std::vector<std::pair<int, int>> spans;     // inclusive [first, last] frame

  std::size_t size() const { return chars.size(); }
  bool empty() const { return chars.empty(); }
};

/// Index of the largest entry in row `r`; ties go to the lowest index.
int argmax_row(const Matrix& m, Eigen::Index r);

/// Merges adjacent repeats, then drops blanks.
Labels ctc_collapse(std::span<const int> frames, int blank);

/// Fewest frames that can emit `target`: its length plus one separating
/// blank per adjacent repeat.
int ctc_min_frames(std::span<const int> target);

/// Every length-T frame string over {0..alphabet_size} (blank =
/// alphabet_size) that collapses to `target`, by exhaustive enumeration.
/// Oracle scale only: Error(kInvalidArgument) unless T <= 8 and
/// alphabet_size + 1 <= 6.
std::vector<Labels> ctc_alignments(std::span<const int> target, int length, int alphabet_size);

/// -log p(target | emissions) from T x (|C|+1) log-probabilities, computed by
/// the log-space forward recursion over the blank-interleaved target as a
/// chain of differentiable ops. Throws Error(kImpossibleTarget) when T is
/// shorter than ctc_min_frames(target).
nn::Tensor ctc_log_loss(const nn::Tensor& log_probs, std::span<const int> target);

/// Same quantity for plain probabilities (no graph is recorded).
double ctc_log_loss(const EmissionSequence& emissions, std::span<const int> target);

/// Greedy aggregation: maximal runs of frames with the same argmax are
/// averaged into one vector; blank runs are dropped but still end the run
/// before them, which keeps doubled characters apart.
ContractedSequence greedy_aggregate(const EmissionSequence& emissions);

}  // namespace swipeforge
