#include "swipeforge/ctc.hpp"

#include "swipeforge/error.hpp"
#include "swipeforge/nn/ops.hpp"

namespace swipeforge {

int argmax_row(const Matrix& m, Eigen::Index r) {
  int best = 0;
  for (Eigen::Index j = 1; j < m.cols(); ++j) {
    if (m(r, j) > m(r, best)) best = static_cast<int>(j);
  }
  return best;
}

Labels ctc_collapse(std::span<const int> frames, int blank) {
  Labels out;
  int previous = -1;
  for (int f : frames) {
    if (f != previous && f != blank) out.push_back(f);
    previous = f;
  }
  return out;
}

int ctc_min_frames(std::span<const int> target) {
  int n = static_cast<int>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

std::vector<Labels> ctc_alignments(std::span<const int> target, int length, int alphabet_size) {
  if (length < 0 || length > 8 || alphabet_size < 0 || alphabet_size + 1 > 6) {
    throw Error(ErrorCode::kInvalidArgument, "ctc_alignments is limited to T <= 8 and at most 6 symbols");
  }
  const int symbols = alphabet_size + 1;
  const Labels wanted(target.begin(), target.end());
  std::vector<Labels> out;
  Labels frames(static_cast<std::size_t>(length), 0);
  long total = 1;
  for (int i = 0; i < length; ++i) total *= symbols;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = length - 1; i >= 0; --i) {
      frames[static_cast<std::size_t>(i)] = static_cast<int>(c % symbols);
      c /= symbols;
    }
    if (ctc_collapse(frames, alphabet_size) == wanted) out.push_back(frames);
  }
  return out;
}

nn::Tensor ctc_log_loss(const nn::Tensor& log_probs, std::span<const int> target) {
  const Eigen::Index frames = log_probs.rows();
  const int blank = static_cast<int>(log_probs.cols()) - 1;
  if (frames < 1) throw Error(ErrorCode::kEmptyInput, "CTC needs at least one frame");
  for (int c : target) {
    if (c < 0 || c >= blank) throw Error(ErrorCode::kUnknownChar, "CTC target label outside the alphabet");
  }
  if (ctc_min_frames(target) > frames) {
    throw Error(ErrorCode::kImpossibleTarget, "target needs more frames than the emission sequence has");
  }
  // Extended labels: blank, l1, blank, l2, ..., blank.
  std::vector<int> extended;
  extended.reserve(2 * target.size() + 1);
  extended.push_back(blank);
  for (int c : target) {
    extended.push_back(c);
    extended.push_back(blank);
  }
  const auto states = static_cast<Eigen::Index>(extended.size());

  Matrix skip_mask = Matrix::Constant(1, states, nn::kLogZero);
  for (Eigen::Index s = 2; s < states; ++s) {
    const auto u = static_cast<std::size_t>(s);
    if (extended[u] != blank && extended[u] != extended[u - 2]) skip_mask(0, s) = 0.0;
  }
  Matrix start_mask = Matrix::Constant(1, states, nn::kLogZero);
  start_mask(0, 0) = 0.0;
  if (states > 1) start_mask(0, 1) = 0.0;
  const nn::Tensor skip = nn::Tensor::constant(std::move(skip_mask));

  const nn::Tensor emit = nn::gather_cols(log_probs, extended);
  nn::Tensor alpha = nn::add(nn::slice_rows(emit, 0, 1), nn::Tensor::constant(std::move(start_mask)));
  for (Eigen::Index t = 1; t < frames; ++t) {
    nn::Tensor merged = nn::log_add_exp(alpha, nn::shift_cols(alpha, 1, nn::kLogZero));
    if (states > 2) merged = nn::log_add_exp(merged, nn::add(nn::shift_cols(alpha, 2, nn::kLogZero), skip));
    alpha = nn::add(merged, nn::slice_rows(emit, t, 1));
  }
  nn::Tensor log_likelihood = nn::slice_cols(alpha, states - 1, 1);
  if (states > 1) log_likelihood = nn::log_add_exp(log_likelihood, nn::slice_cols(alpha, states - 2, 1));
  return nn::affine(log_likelihood, -1.0);
}

double ctc_log_loss(const EmissionSequence& emissions, std::span<const int> target) {
  nn::NoGradGuard no_grad;
  return ctc_log_loss(nn::log(nn::Tensor::constant(emissions.probs)), target).item();
}

ContractedSequence greedy_aggregate(const EmissionSequence& emissions) {
  const int blank = emissions.blank();
  ContractedSequence out;
  std::vector<RowVector> rows;
  Eigen::Index t = 0;
  const Eigen::Index frames = emissions.length();
  while (t < frames) {
    const int c = argmax_row(emissions.probs, t);
    Eigen::Index end = t;
    while (end + 1 < frames && argmax_row(emissions.probs, end + 1) == c) ++end;
    if (c != blank) {
      rows.push_back(emissions.probs.middleRows(t, end - t + 1).colwise().mean());
      out.chars.push_back(c);
      out.spans.emplace_back(static_cast<int>(t), static_cast<int>(end));
    }
    t = end + 1;
  }
  out.vectors.resize(static_cast<Eigen::Index>(rows.size()), emissions.probs.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.vectors.row(static_cast<Eigen::Index>(i)) = rows[i];
  return out;
}

}  // namespace swipeforge
