#pragma once

// Exhaustive pair counting for Kendall's tau-b, and naive pooled metrics.

#include <cmath>
#include <cstdlib>
#include <span>
#include <vector>

namespace tripscore::testing {

struct PairCounts {
  long long concordant = 0;
  long long discordant = 0;
  long long tied_x_only = 0;
  long long tied_y_only = 0;
  long long tied_both = 0;
};

inline PairCounts count_pairs(std::span<const int> x, std::span<const int> y) {
  PairCounts c;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const int dx = (x[i] > x[j]) - (x[i] < x[j]);
      const int dy = (y[i] > y[j]) - (y[i] < y[j]);
      if (dx == 0 && dy == 0) ++c.tied_both;
      else if (dx == 0) ++c.tied_x_only;
      else if (dy == 0) ++c.tied_y_only;
      else if (dx == dy) ++c.concordant;
      else ++c.discordant;
    }
  }
  return c;
}

// (C - D) / sqrt((C + D + Ty)(C + D + Tx)); 0 when either side is all tied.
inline double brute_tau_b(std::span<const int> x, std::span<const int> y) {
  const auto c = count_pairs(x, y);
  const long long nx = c.concordant + c.discordant + c.tied_y_only;
  const long long ny = c.concordant + c.discordant + c.tied_x_only;
  if (nx == 0 || ny == 0) return 0.0;
  return static_cast<double>(c.concordant - c.discordant) /
         std::sqrt(static_cast<double>(nx) * static_cast<double>(ny));
}

inline double naive_accuracy(std::span<const int> pred, std::span<const int> gold, int delta) {
  int hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += std::abs(pred[i] - gold[i]) <= delta ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

inline double naive_asd(std::span<const int> pred, std::span<const int> gold) {
  long long total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += std::abs(pred[i] - gold[i]);
  return static_cast<double>(total) / static_cast<double>(pred.size());
}

}  // namespace tripscore::testing
