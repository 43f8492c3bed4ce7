#pragma once

// Accuracy@delta, Kendall's tau-b and average score difference between
// predicted and gold integer scores.

#include <cstdio>
#include <map>
#include <numeric>

#include "common.hpp"

namespace tripscore {

struct LabeledPair {
  std::string subject;
  std::string value;
  int score = 0;
};

using GoldLabel = LabeledPair;
using Prediction = LabeledPair;

class PairMismatchError : public Error {
 public:
  PairMismatchError(std::vector<std::string> missing_preds, std::vector<std::string> missing_gold)
      : Error(describe(missing_preds, missing_gold)),
        missing_in_predictions(std::move(missing_preds)),
        missing_in_gold(std::move(missing_gold)) {}

  std::vector<std::string> missing_in_predictions;
  std::vector<std::string> missing_in_gold;

 private:
  static std::string describe(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::string msg = "prediction and gold pairs differ";
    auto list = [&](const char* title, const std::vector<std::string>& v) {
      if (v.empty()) return;
      msg += "\n  ";
      msg += title;
      msg += " (" + std::to_string(v.size()) + "):";
      for (const auto& p : v) msg += "\n    " + p;
    };
    list("missing from predictions", a);
    list("missing from gold", b);
    return msg;
  }
};

// Reads `subject<TAB>value<TAB>score`. With `last_column_score` the score is
// taken from the last of 3 or more fields (so a scores file with a raw
// column can be read directly).
inline std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path, int max_score = 7,
                                                   bool last_column_score = true) {
  if (!std::filesystem::exists(path)) throw IoError(path, "no such file");
  std::vector<LabeledPair> out;
  for_each_line(path, [&](std::size_t number, std::string_view line) {
    if (trim(line).empty()) return;
    auto fields = split(line, '\t');
    if (fields.size() < 3 || (!last_column_score && fields.size() != 3))
      throw ParseError(path, number, "expected subject<TAB>value<TAB>score");
    auto subject = trim(fields[0]);
    auto value = trim(fields[1]);
    auto score_text = std::string(trim(fields.back()));
    if (subject.empty() || value.empty()) throw ParseError(path, number, "empty subject or value");
    int score = 0;
    std::size_t used = 0;
    try {
      score = std::stoi(score_text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != score_text.size()) throw ParseError(path, number, "score is not an integer");
    if (score < 0 || score > max_score)
      throw ParseError(path, number, "score " + std::to_string(score) + " outside 0.." + std::to_string(max_score));
    out.push_back({std::string(subject), std::string(value), score});
  });
  return out;
}

namespace detail {

inline std::string pair_key(const LabeledPair& p) { return p.subject + "\t" + p.value; }

struct AlignedSubject {
  std::string subject;
  std::vector<int> pred;
  std::vector<int> gold;
};

// Joins predictions to gold by (subject, value). Subjects keep gold order.
inline std::vector<AlignedSubject> align(std::span<const Prediction> preds, std::span<const GoldLabel> gold) {
  std::map<std::string, int, std::less<>> pred_by_key;
  for (const auto& p : preds)
    if (!pred_by_key.emplace(pair_key(p), p.score).second)
      throw Error("duplicate prediction for " + p.subject + " / " + p.value);

  std::vector<std::string> missing_preds;
  std::vector<AlignedSubject> subjects;
  std::map<std::string, std::size_t, std::less<>> subject_pos;
  std::map<std::string, bool, std::less<>> gold_keys;
  for (const auto& g : gold) {
    auto key = pair_key(g);
    if (!gold_keys.emplace(key, true).second) throw Error("duplicate gold label for " + g.subject + " / " + g.value);
    auto it = pred_by_key.find(key);
    if (it == pred_by_key.end()) {
      missing_preds.push_back(g.subject + " / " + g.value);
      continue;
    }
    auto [pos, inserted] = subject_pos.try_emplace(g.subject, subjects.size());
    if (inserted) subjects.push_back({g.subject, {}, {}});
    subjects[pos->second].pred.push_back(it->second);
    subjects[pos->second].gold.push_back(g.score);
  }
  std::vector<std::string> missing_gold;
  for (const auto& p : preds)
    if (!gold_keys.contains(pair_key(p))) missing_gold.push_back(p.subject + " / " + p.value);
  if (!missing_preds.empty() || !missing_gold.empty())
    throw PairMismatchError(std::move(missing_preds), std::move(missing_gold));
  return subjects;
}

// Counts inversions of v while merge-sorting it.
inline std::uint64_t count_inversions(std::vector<int>& v, std::vector<int>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

inline std::uint64_t tied_pairs(std::span<const int> sorted) {
  std::uint64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace detail

struct TauB {
  double tau = 0.0;
  bool degenerate = false;  // one side entirely tied
};

// Kendall's tau-b in O(n log n) (Knight's algorithm). A side that is
// entirely tied yields tau = 0 and degenerate = true.
inline TauB kendall_tau_b(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw Error("kendall_tau_b: length mismatch");
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });

  const auto n0 = static_cast<std::uint64_t>(n) * (n - (n > 0 ? 1 : 0)) / 2;
  std::uint64_t ties_x = 0, ties_xy = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[idx[j]] == x[idx[i]]) ++j;
    const std::uint64_t t = j - i;
    ties_x += t * (t - 1) / 2;
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && y[idx[b]] == y[idx[a]]) ++b;
      const std::uint64_t u = b - a;
      ties_xy += u * (u - 1) / 2;
      a = b;
    }
    i = j;
  }

  std::vector<int> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const std::uint64_t swaps = detail::count_inversions(ys, buf, 0, n);
  const std::uint64_t ties_y = detail::tied_pairs(ys);

  const auto nx = static_cast<std::int64_t>(n0 - ties_x);
  const auto ny = static_cast<std::int64_t>(n0 - ties_y);
  if (nx == 0 || ny == 0) return {0.0, true};
  const std::int64_t concordant_minus_discordant = static_cast<std::int64_t>(n0) - static_cast<std::int64_t>(ties_x) -
                                                   static_cast<std::int64_t>(ties_y) + static_cast<std::int64_t>(ties_xy) -
                                                   2 * static_cast<std::int64_t>(swaps);
  return {static_cast<double>(concordant_minus_discordant) /
              std::sqrt(static_cast<double>(nx) * static_cast<double>(ny)),
          false};
}

inline double accuracy_at_delta(std::span<const Prediction> preds, std::span<const GoldLabel> gold, int delta = 2) {
  if (delta < 0) throw ConfigError("delta must be >= 0");
  std::size_t hits = 0, total = 0;
  for (const auto& s : detail::align(preds, gold)) {
    for (std::size_t i = 0; i < s.pred.size(); ++i) {
      hits += std::abs(s.pred[i] - s.gold[i]) <= delta;
      ++total;
    }
  }
  if (total == 0) throw Error("no pairs to evaluate");
  return static_cast<double>(hits) / static_cast<double>(total);
}

inline double avg_score_diff(std::span<const Prediction> preds, std::span<const GoldLabel> gold) {
  long long diff = 0;
  std::size_t total = 0;
  for (const auto& s : detail::align(preds, gold)) {
    for (std::size_t i = 0; i < s.pred.size(); ++i) {
      diff += std::abs(s.pred[i] - s.gold[i]);
      ++total;
    }
  }
  if (total == 0) throw Error("no pairs to evaluate");
  return static_cast<double>(diff) / static_cast<double>(total);
}

struct TauSummary {
  double mean_tau = 0.0;
  std::size_t evaluated = 0;  // subjects with >= 2 pairs (incl. degenerate)
  std::size_t skipped = 0;    // subjects with < 2 pairs
  std::size_t degenerate = 0; // all-tied subjects, counted as tau = 0
};

// Unweighted mean of per-subject tau-b.
inline TauSummary kendall_tau(std::span<const Prediction> preds, std::span<const GoldLabel> gold) {
  TauSummary out;
  double sum = 0.0;
  for (const auto& s : detail::align(preds, gold)) {
    if (s.pred.size() < 2) {
      ++out.skipped;
      continue;
    }
    auto t = kendall_tau_b(s.pred, s.gold);
    out.degenerate += t.degenerate;
    sum += t.tau;
    ++out.evaluated;
  }
  if (out.evaluated == 0) throw Error("no subject has two or more scored values; Kendall's tau undefined");
  out.mean_tau = sum / static_cast<double>(out.evaluated);
  return out;
}

struct EvalReport {
  double accuracy = 0.0;
  double kendall_tau = 0.0;
  double asd = 0.0;
  std::size_t n_subjects = 0;
  std::size_t n_pairs = 0;
  std::size_t tau_skipped = 0;
  std::size_t tau_degenerate = 0;
  int delta = 2;
};

inline EvalReport evaluate(std::span<const Prediction> preds, std::span<const GoldLabel> gold, int delta = 2) {
  EvalReport r;
  r.delta = delta;
  r.accuracy = accuracy_at_delta(preds, gold, delta);
  r.asd = avg_score_diff(preds, gold);
  const auto tau = kendall_tau(preds, gold);
  r.kendall_tau = tau.mean_tau;
  r.tau_skipped = tau.skipped;
  r.tau_degenerate = tau.degenerate;
  r.n_subjects = tau.evaluated + tau.skipped;
  r.n_pairs = gold.size();
  return r;
}

// Method / Accuracy / Kendall's Tau / ASD table, followed by a block of
// key=value lines per row.
inline std::string format_report(std::span<const std::pair<std::string, EvalReport>> rows) {
  std::string out;
  char line[256];
  std::size_t width = 6;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  const int w = static_cast<int>(width);
  std::snprintf(line, sizeof line, "%-*s  %8s  %13s  %6s\n", w, "Method", "Accuracy", "Kendall's Tau", "ASD");
  out += line;
  for (const auto& [name, r] : rows) {
    std::snprintf(line, sizeof line, "%-*s  %8.2f  %13.2f  %6.2f\n", w, name.c_str(), r.accuracy, r.kendall_tau, r.asd);
    out += line;
  }
  for (const auto& [name, r] : rows) {
    std::snprintf(line, sizeof line,
                  "method=%s\naccuracy=%.6f\ntau=%.6f\nasd=%.6f\ndelta=%d\nsubjects=%zu\npairs=%zu\n"
                  "tau_skipped_subjects=%zu\ntau_all_tied_subjects=%zu\n",
                  name.c_str(), r.accuracy, r.kendall_tau, r.asd, r.delta, r.n_subjects, r.n_pairs, r.tau_skipped,
                  r.tau_degenerate);
    out += line;
  }
  return out;
}

}  // namespace tripscore
