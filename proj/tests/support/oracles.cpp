#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "swipeforge/error.hpp"

#include "swipeforge/dataset.hpp"
#include "swipeforge/nn/ops.hpp"

#ifndef SWIPEFORGE_TEST_DATA_DIR
#error "SWIPEFORGE_TEST_DATA_DIR must be defined"
#endif

namespace swipeforge::testing {

std::filesystem::path data_dir() { return SWIPEFORGE_TEST_DATA_DIR; }

std::vector<std::u32string> lexicon_words(const std::string& file, std::size_t limit) {
  std::vector<std::u32string> out = read_vocabulary(data_dir() / "lexicons" / file);
  if (out.size() > limit) out.resize(limit);
  return out;
}

double alignment_probability(const Matrix& probs, const std::vector<Labels>& alignments) {
  double total = 0.0;
  for (const auto& a : alignments) {
    double p = 1.0;
    for (std::size_t t = 0; t < a.size(); ++t) p *= probs(static_cast<Eigen::Index>(t), a[t]);
    total += p;
  }
  return total;
}

std::vector<Labels> all_frame_strings(int length, int symbols) {
  std::vector<Labels> out{Labels{}};
  for (int t = 0; t < length; ++t) {
    std::vector<Labels> next;
    for (const auto& prefix : out) {
      for (int s = 0; s < symbols; ++s) {
        Labels l = prefix;
        l.push_back(s);
        next.push_back(std::move(l));
      }
    }
    out = std::move(next);
  }
  return out;
}

Labels collapse_frames(const Labels& frames, int blank) {
  Labels out;
  int prev = -1;
  for (int f : frames) {
    if (f != prev && f != blank) out.push_back(f);
    prev = f;
  }
  return out;
}

CtcOracleStats ctc_oracle_sweep(int max_alphabet, int max_frames, std::uint64_t seed) {
  CtcOracleStats stats;
  Rng rng(seed);
  for (int a = 1; a <= max_alphabet; ++a) {
    for (int t = 1; t <= max_frames; ++t) {
      EmissionSequence em{random_emissions(t, a + 1, rng)};
      std::map<Labels, double> mass;
      double total = 0.0;
      for (const auto& frames : all_frame_strings(t, a + 1)) {
        const double p = alignment_probability(em.probs, {frames});
        mass[collapse_frames(frames, a)] += p;
        total += p;
      }
      double by_label = 0.0;
      std::vector<Labels> targets{Labels{}};
      for (int len = 0; len <= t; ++len) {
        std::vector<Labels> longer;
        for (const auto& target : targets) {
          const auto it = mass.find(target);
          try {
            const double p = std::exp(-ctc_log_loss(em, target));
            if (it == mass.end()) {
              stats.all_rejections_correct = false;
            } else {
              stats.max_abs_error = std::max(stats.max_abs_error, std::abs(p - it->second));
              by_label += p;
              ++stats.cases;
            }
          } catch (const Error& e) {
            if (e.code() == ErrorCode::kImpossibleTarget && it == mass.end()) {
              ++stats.impossible;
            } else {
              stats.all_rejections_correct = false;
            }
          }
          for (int c = 0; c < a; ++c) {
            Labels l = target;
            l.push_back(c);
            longer.push_back(std::move(l));
          }
        }
        targets = std::move(longer);
      }
      stats.max_normalization_error = std::max(stats.max_normalization_error, std::abs(by_label - 1.0));
      stats.max_normalization_error = std::max(stats.max_normalization_error, std::abs(total - 1.0));
    }
  }
  return stats;
}

Matrix random_emissions(Eigen::Index frames, Eigen::Index symbols, Rng& rng) {
  Matrix m(frames, symbols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 0.05 + rng.uniform();
  for (Eigen::Index r = 0; r < frames; ++r) m.row(r) /= m.row(r).sum();
  return m;
}

std::u32string collapse_key_visits(const Trace& trace, const KeyboardLayout& layout, double loop_threshold) {
  const auto& p = trace.points;
  struct Visit {
    std::size_t index;
    int key;
  };
  std::vector<Visit> visits;
  const auto on_center = [&](Point q) -> int {
    for (std::size_t k = 0; k < layout.keys().size(); ++k) {
      if (distance(q, layout.keys()[k].center()) < 1e-12) return static_cast<int>(k);
    }
    return -1;
  };
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int key = on_center(p[i]);
    if (key < 0) continue;
    const bool end = i == 0 || i + 1 == p.size();
    const bool slowing = i >= 2 && distance(p[i], p[i - 1]) < distance(p[i - 1], p[i - 2]);
    if (end || slowing) visits.push_back({i, key});
  }
  std::u32string out;
  for (std::size_t v = 0; v < visits.size(); ++v) {
    if (v > 0 && visits[v].key == visits[v - 1].key) {
      const Point c = layout.keys()[static_cast<std::size_t>(visits[v].key)].center();
      bool looped = false;
      for (std::size_t i = visits[v - 1].index + 1; i < visits[v].index; ++i) {
        if (distance(p[i], c) > loop_threshold) looped = true;
      }
      if (!looped) continue;
    }
    out.push_back(layout.keys()[static_cast<std::size_t>(visits[v].key)].ch);
  }
  return out;
}

int edit_distance(std::u32string_view a, std::u32string_view b) {
  std::vector<int> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    int diagonal = row[0];
    row[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diagonal + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diagonal = up;
    }
  }
  return row[b.size()];
}

int damerau_distance(std::u32string_view a, std::u32string_view b) {
  // Lowrance-Wagner table with a sentinel row/column.
  const std::size_t n = a.size(), m = b.size();
  const int inf = static_cast<int>(n + m);
  std::vector<std::vector<int>> d(n + 2, std::vector<int>(m + 2, 0));
  d[0][0] = inf;
  for (std::size_t i = 0; i <= n; ++i) {
    d[i + 1][0] = inf;
    d[i + 1][1] = static_cast<int>(i);
  }
  for (std::size_t j = 0; j <= m; ++j) {
    d[0][j + 1] = inf;
    d[1][j + 1] = static_cast<int>(j);
  }
  std::map<char32_t, std::size_t> last_row;
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t last_col = 0;
    for (std::size_t j = 1; j <= m; ++j) {
      const auto it = last_row.find(b[j - 1]);
      const std::size_t i1 = it == last_row.end() ? 0 : it->second;
      const std::size_t j1 = last_col;
      const int cost = a[i - 1] == b[j - 1] ? 0 : 1;
      if (cost == 0) last_col = j;
      d[i + 1][j + 1] = std::min({d[i][j] + cost, d[i + 1][j] + 1, d[i][j + 1] + 1,
                                  d[i1][j1] + static_cast<int>(i - i1 - 1) + 1 + static_cast<int>(j - j1 - 1)});
    }
    last_row[a[i - 1]] = i;
  }
  return d[n + 1][m + 1];
}

namespace {

struct Path {
  std::vector<int> tokens;
  double log_prob;
  bool truncated;
};

void expand(const TranslitModel& model, const SourceEncoding& enc, const nn::RecurrentState& state, int prev,
            std::vector<int>& tokens, double log_prob, int max_len, std::vector<Path>& out) {
  const DecoderStep step = model.decode_step(enc, state, prev);
  for (int tok = 0; tok <= model.end_token(); ++tok) {
    const double lp = log_prob + step.log_probs.value()(0, tok);
    tokens.push_back(tok);
    if (tok == model.end_token()) {
      out.push_back({tokens, lp, false});
    } else if (static_cast<int>(tokens.size()) == max_len) {
      out.push_back({tokens, lp, true});
    } else {
      expand(model, enc, step.state, tok, tokens, lp, max_len, out);
    }
    tokens.pop_back();
  }
}

}  // namespace

std::vector<TranslitCandidate> enumerate_outputs(const TranslitModel& model, std::u32string_view source, int max_len) {
  nn::NoGradGuard no_grad;
  const SourceEncoding enc = model.encode_source(source);
  std::vector<Path> paths;
  std::vector<int> tokens;
  expand(model, enc, model.initial_state(enc), model.start_token(), tokens, 0.0, max_len, paths);
  std::sort(paths.begin(), paths.end(), [](const Path& a, const Path& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  });
  std::vector<TranslitCandidate> out;
  for (const auto& p : paths) {
    TranslitCandidate c;
    for (int t : p.tokens) {
      if (t != model.end_token()) c.text.push_back(model.target_alphabet().symbol(static_cast<std::size_t>(t)));
    }
    c.log_prob = p.log_prob;
    c.truncated = p.truncated;
    out.push_back(c);
  }
  return out;
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double total = f(a) + f(b);
  for (int i = 1; i < n; ++i) total += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return total * h / 3.0;
}

int nearest_center_scan(const KeyboardLayout& layout, Point p) {
  int best = 0;
  double best_d = squared_distance(p, layout.keys()[0].center());
  for (std::size_t k = 1; k < layout.keys().size(); ++k) {
    const double d = squared_distance(p, layout.keys()[k].center());
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace swipeforge::testing
