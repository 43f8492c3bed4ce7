#pragma once

// Paragraph vectors (PV-DBOW, PV-DM concat/average) trained with negative
// sampling and asynchronous multi-worker SGD.
//
// Parameters are kept in single precision. The step functions are templates
// over the scalar type so that they can be checked against finite
// differences in double precision.

#include <atomic>
#include <functional>
#include <optional>
#include <thread>
#include <unordered_map>

#include "common.hpp"
#include "corpus.hpp"

namespace tripscore {

enum class TrainMode : std::uint8_t { dbow = 0, dm_concat = 1, dm_avg = 2 };
enum class Combine { concat, average };

inline std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::dbow: return "dbow";
    case TrainMode::dm_concat: return "dm-concat";
    case TrainMode::dm_avg: return "dm-avg";
  }
  return "?";
}

inline TrainMode parse_train_mode(std::string_view s) {
  if (s == "dbow") return TrainMode::dbow;
  if (s == "dm-concat") return TrainMode::dm_concat;
  if (s == "dm-avg") return TrainMode::dm_avg;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected dbow|dm-concat|dm-avg)");
}

struct TrainConfig {
  TrainMode mode = TrainMode::dbow;
  std::uint32_t dim = 200;
  std::uint32_t window = 5;
  std::uint32_t negative = 5;
  std::uint32_t epochs = 20;
  std::uint32_t min_count = 10;
  std::uint32_t workers = 1;
  double initial_lr = 0.025;
  double final_lr = 0.0001;
  std::uint64_t seed = 1;
  // PV-DBOW only: also train word input vectors with skip-gram.
  bool train_words = false;
  double noise_exponent = 0.75;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    auto positive = [](std::uint32_t v, const char* name) {
      if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
    };
    positive(dim, "dim");
    positive(window, "window");
    positive(negative, "negative");
    positive(epochs, "epochs");
    positive(workers, "workers");
    if (!(initial_lr > 0.0) || !(final_lr >= 0.0) || !(final_lr < initial_lr))
      throw ConfigError("learning rates must satisfy 0 <= final_lr < initial_lr");
    if (!(noise_exponent >= 0.0)) throw ConfigError("noise exponent must be >= 0");
  }

  bool uses_word_inputs() const { return mode != TrainMode::dbow || train_words; }

  std::size_t hidden_width() const {
    return mode == TrainMode::dm_concat ? static_cast<std::size_t>(2 * window + 1) * dim : dim;
  }
};

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

struct Vocabulary {
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  std::uint32_t min_count = 10;
  std::uint64_t total_tokens = 0;  // over retained words
  double noise_exponent = 0.75;
  std::vector<double> noise_cdf;
  std::unordered_map<std::string, std::int32_t> index;

  std::size_t size() const noexcept { return words.size(); }

  std::optional<std::int32_t> find(const std::string& w) const {
    auto it = index.find(w);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  double noise_probability(std::size_t i) const {
    return noise_cdf[i] - (i == 0 ? 0.0 : noise_cdf[i - 1]);
  }

  std::int32_t sample_noise(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(noise_cdf.begin(), noise_cdf.end(), u);
    if (it == noise_cdf.end()) --it;
    return static_cast<std::int32_t>(it - noise_cdf.begin());
  }

  // Rebuilds index, totals and the noise table from words/counts.
  static Vocabulary from_counts(std::vector<std::string> words, std::vector<std::uint64_t> counts,
                                std::uint32_t min_count, double exponent) {
    Vocabulary v;
    v.words = std::move(words);
    v.counts = std::move(counts);
    v.min_count = min_count;
    v.noise_exponent = exponent;
    v.noise_cdf.resize(v.words.size());
    double z = 0.0;
    for (std::size_t i = 0; i < v.words.size(); ++i) {
      v.total_tokens += v.counts[i];
      z += std::pow(static_cast<double>(v.counts[i]), exponent);
      v.noise_cdf[i] = z;
      v.index.emplace(v.words[i], static_cast<std::int32_t>(i));
    }
    for (auto& c : v.noise_cdf) c /= z;
    if (!v.noise_cdf.empty()) v.noise_cdf.back() = 1.0;
    return v;
  }
};

// Words are ordered by descending count, ties broken lexicographically.
inline Vocabulary build_vocab(std::span<const PersonDoc> docs, std::uint32_t min_count,
                              double exponent = 0.75) {
  if (docs.empty()) throw Error("cannot build vocabulary from zero documents");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& d : docs)
    for (const auto& t : d.tokens) ++counts[t];

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [w, c] : counts)
    if (c >= min_count) kept.emplace_back(w, c);
  if (kept.empty()) throw Error("empty vocabulary (no word reaches min_count " + std::to_string(min_count) + ")");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  std::vector<std::string> words;
  std::vector<std::uint64_t> cs;
  for (auto& [w, c] : kept) {
    words.push_back(w);
    cs.push_back(c);
  }
  return Vocabulary::from_counts(std::move(words), std::move(cs), min_count, exponent);
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

template <class T>
struct Parameters {
  Matrix<T> doc;       // D x dim
  Matrix<T> word_in;   // V x dim, empty when unused
  Matrix<T> word_out;  // V x hidden_width

  bool all_finite() const {
    return tripscore::all_finite<T>(doc.values()) && tripscore::all_finite<T>(word_in.values()) &&
           tripscore::all_finite<T>(word_out.values());
  }
};

struct EmbeddingModel {
  TrainConfig config;
  Vocabulary vocab;
  std::vector<std::string> doc_labels;
  std::unordered_map<std::string, std::size_t> doc_index;
  Parameters<float> params;

  std::optional<std::span<const float>> doc_vector(const std::string& subject) const {
    auto it = doc_index.find(subject);
    if (it == doc_index.end()) return std::nullopt;
    return params.doc.row(it->second);
  }

  void rebuild_doc_index() {
    doc_index.clear();
    for (std::size_t i = 0; i < doc_labels.size(); ++i)
      if (!doc_index.emplace(doc_labels[i], i).second)
        throw Error("duplicate document label '" + doc_labels[i] + "'");
  }
};

// ---------------------------------------------------------------------------
// SGD steps
// ---------------------------------------------------------------------------

inline constexpr std::int32_t kNoWord = -1;

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// log(1 + e^x), overflow-safe.
template <class T>
T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Per-worker scratch buffers, reused across steps.
template <class T>
struct Workspace {
  std::vector<T> hidden;
  std::vector<T> step;
  std::vector<T> coeff;
  std::vector<std::int32_t> negatives;
  std::vector<std::int32_t> context;
};

// Draws `k` noise words, redrawing any that equal the target. With a single
// word vocabulary no valid negative exists and the result is empty.
inline void draw_negatives(const Vocabulary& vocab, std::int32_t target, std::uint32_t k, Rng& rng,
                           std::vector<std::int32_t>& out) {
  out.clear();
  if (vocab.size() < 2) return;
  for (std::uint32_t i = 0; i < k; ++i) {
    std::int32_t w = vocab.sample_noise(rng);
    while (w == target) w = vocab.sample_noise(rng);
    out.push_back(w);
  }
}

// Negative-sampling objective on `hidden`:
//   loss = -log s(h.o_target) - sum_k log s(-h.o_neg_k)
// Adds lr * (-dloss/dhidden) to `hidden_step`. If W is non-const and
// `update_output` is set, applies the output-row updates. All gradients are
// taken at the pre-update parameters, so repeated negatives accumulate.
template <class T, class W>
T negative_sampling(std::span<const T> hidden, MatrixView<W> out, std::int32_t target,
                    std::span<const std::int32_t> negatives, T lr, std::span<T> hidden_step,
                    std::vector<T>& coeff, bool update_output = true) {
  const std::size_t n = negatives.size() + 1;
  coeff.resize(n);
  T loss = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::int32_t row = k == 0 ? target : negatives[k - 1];
    auto o = out.row(static_cast<std::size_t>(row));
    const T f = dot(hidden, o);
    T g;
    if (k == 0) {
      loss += softplus(-f);
      g = T(1) - sigmoid(f);
    } else {
      loss += softplus(f);
      g = -sigmoid(f);
    }
    coeff[k] = lr * g;
    axpy(coeff[k], o, hidden_step);
  }
  if constexpr (!std::is_const_v<W>) {
    if (update_output) {
      for (std::size_t k = 0; k < n; ++k) {
        const std::int32_t row = k == 0 ? target : negatives[k - 1];
        axpy(coeff[k], hidden, out.row(static_cast<std::size_t>(row)));
      }
    }
  }
  return loss;
}

// PV-DBOW: predict `target` from the document vector alone.
template <class T, class W>
T dbow_step(std::span<T> doc, MatrixView<W> out, std::int32_t target, std::span<const std::int32_t> negatives,
            T lr, Workspace<T>& ws, bool update_output = true) {
  ws.step.assign(doc.size(), T(0));
  const T loss = negative_sampling<T, W>(std::span<const T>(doc), out, target, negatives, lr, ws.step, ws.coeff,
                                         update_output);
  for (std::size_t i = 0; i < doc.size(); ++i) doc[i] += ws.step[i];
  return loss;
}

// PV-DM: predict `target` from the document vector combined with context
// word vectors. `context` holds word ids with kNoWord for empty slots. In
// concat mode it must have exactly 2*window slots (the output rows are
// (2*window+1)*dim wide) and empty slots contribute zeros; in average mode
// empty slots are ignored.
template <class T, class Win, class Wout>
T dm_step(std::span<T> doc, MatrixView<Win> word_in, MatrixView<Wout> word_out,
          std::span<const std::int32_t> context, std::int32_t target, std::span<const std::int32_t> negatives,
          Combine combine, T lr, Workspace<T>& ws, bool update_words = true, bool update_output = true) {
  const std::size_t dim = doc.size();
  T loss;
  if (combine == Combine::average) {
    ws.hidden.assign(doc.begin(), doc.end());
    std::size_t n = 1;
    for (auto c : context) {
      if (c == kNoWord) continue;
      auto v = word_in.row(static_cast<std::size_t>(c));
      for (std::size_t i = 0; i < dim; ++i) ws.hidden[i] += v[i];
      ++n;
    }
    const T inv = T(1) / static_cast<T>(n);
    for (auto& h : ws.hidden) h *= inv;
    ws.step.assign(dim, T(0));
    loss = negative_sampling<T, Wout>(ws.hidden, word_out, target, negatives, lr, ws.step, ws.coeff,
                                      update_output);
    for (auto& s : ws.step) s *= inv;
    for (std::size_t i = 0; i < dim; ++i) doc[i] += ws.step[i];
    if constexpr (!std::is_const_v<Win>) {
      if (update_words) {
        for (auto c : context)
          if (c != kNoWord) axpy(T(1), std::span<const T>(ws.step), word_in.row(static_cast<std::size_t>(c)));
      }
    }
  } else {
    const std::size_t width = (context.size() + 1) * dim;
    ws.hidden.assign(width, T(0));
    std::copy(doc.begin(), doc.end(), ws.hidden.begin());
    for (std::size_t j = 0; j < context.size(); ++j) {
      if (context[j] == kNoWord) continue;
      auto v = word_in.row(static_cast<std::size_t>(context[j]));
      std::copy(v.begin(), v.end(), ws.hidden.begin() + static_cast<std::ptrdiff_t>((j + 1) * dim));
    }
    ws.step.assign(width, T(0));
    loss = negative_sampling<T, Wout>(ws.hidden, word_out, target, negatives, lr, ws.step, ws.coeff,
                                      update_output);
    for (std::size_t i = 0; i < dim; ++i) doc[i] += ws.step[i];
    if constexpr (!std::is_const_v<Win>) {
      if (update_words) {
        for (std::size_t j = 0; j < context.size(); ++j) {
          if (context[j] == kNoWord) continue;
          std::span<const T> slot(ws.step.data() + (j + 1) * dim, dim);
          axpy(T(1), slot, word_in.row(static_cast<std::size_t>(context[j])));
        }
      }
    }
  }
  return loss;
}

// Skip-gram: predict `target` from one context word's input vector.
template <class T>
T skipgram_step(MatrixView<T> word_in, MatrixView<T> word_out, std::int32_t context, std::int32_t target,
                std::span<const std::int32_t> negatives, T lr, Workspace<T>& ws) {
  auto v = word_in.row(static_cast<std::size_t>(context));
  ws.step.assign(v.size(), T(0));
  const T loss =
      negative_sampling<T, T>(std::span<const T>(v), word_out, target, negatives, lr, ws.step, ws.coeff, true);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += ws.step[i];
  return loss;
}

// Model-level steps: draw negatives from the model's noise table and update
// the stored parameters. Return the loss before the update.
inline float dbow_step(EmbeddingModel& model, std::size_t doc_row, std::int32_t target, float lr, Rng& rng,
                       Workspace<float>& ws) {
  draw_negatives(model.vocab, target, model.config.negative, rng, ws.negatives);
  return dbow_step<float, float>(model.params.doc.row(doc_row), model.params.word_out.view(), target,
                                 ws.negatives, lr, ws);
}

inline float dm_step(EmbeddingModel& model, std::size_t doc_row, std::span<const std::int32_t> context,
                     std::int32_t target, Combine combine, float lr, Rng& rng, Workspace<float>& ws) {
  draw_negatives(model.vocab, target, model.config.negative, rng, ws.negatives);
  return dm_step<float, float, float>(model.params.doc.row(doc_row), model.params.word_in.view(),
                                      model.params.word_out.view(), context, target, ws.negatives, combine, lr,
                                      ws);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochStats {
  std::uint32_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double lr = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

namespace detail {

inline std::vector<std::int32_t> to_ids(const Vocabulary& vocab, std::span<const std::string> tokens) {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens)
    if (auto id = vocab.find(t)) ids.push_back(*id);
  return ids;
}

template <class T>
void init_uniform(Matrix<T>& m, std::size_t dim, Rng& rng) {
  const double half = 0.5 / static_cast<double>(dim);
  for (auto& x : m.values()) x = static_cast<T>(rng.uniform(-half, half));
}

inline std::span<const std::int32_t> fill_context(std::span<const std::int32_t> ids, std::size_t pos,
                                                  std::size_t window, std::vector<std::int32_t>& ctx) {
  ctx.clear();
  for (std::size_t off = window; off >= 1; --off)
    ctx.push_back(pos >= off ? ids[pos - off] : kNoWord);
  for (std::size_t off = 1; off <= window; ++off)
    ctx.push_back(pos + off < ids.size() ? ids[pos + off] : kNoWord);
  return ctx;
}

// Runs every prediction task of one document. Returns (loss sum, tasks).
// `lr_at(k)` gives the learning rate for the document's k-th token.
template <class Vin, class Vout, class LrFn>
std::pair<double, std::size_t> train_document(const TrainConfig& cfg, const Vocabulary& vocab,
                                              std::span<float> doc, MatrixView<Vin> word_in,
                                              MatrixView<Vout> word_out, std::span<const std::int32_t> ids,
                                              LrFn&& lr_at, Rng& rng, Workspace<float>& ws, bool learn_words) {
  double loss = 0.0;
  std::size_t tasks = 0;
  for (std::size_t pos = 0; pos < ids.size(); ++pos) {
    const float lr = lr_at(pos);
    const std::int32_t target = ids[pos];
    if (cfg.mode == TrainMode::dbow) {
      draw_negatives(vocab, target, cfg.negative, rng, ws.negatives);
      loss += dbow_step<float, Vout>(doc, word_out, target, ws.negatives, lr, ws, learn_words);
      ++tasks;
      if constexpr (!std::is_const_v<Vin>) {
        if (cfg.train_words && learn_words) {
          fill_context(ids, pos, cfg.window, ws.context);
          for (auto c : ws.context) {
            if (c == kNoWord) continue;
            draw_negatives(vocab, target, cfg.negative, rng, ws.negatives);
            loss += skipgram_step<float>(word_in, word_out, c, target, ws.negatives, lr, ws);
            ++tasks;
          }
        }
      }
    } else {
      fill_context(ids, pos, cfg.window, ws.context);
      draw_negatives(vocab, target, cfg.negative, rng, ws.negatives);
      const Combine combine = cfg.mode == TrainMode::dm_concat ? Combine::concat : Combine::average;
      loss += dm_step<float, Vin, Vout>(doc, word_in, word_out, ws.context, target, ws.negatives, combine, lr, ws,
                                        learn_words, learn_words);
      ++tasks;
    }
  }
  return {loss, tasks};
}

}  // namespace detail

// Trains paragraph vectors for `docs`. Documents without any in-vocabulary
// token are skipped (with a warning) and get no row. Document order is
// reshuffled every epoch; with workers > 1 the shuffled order is dealt
// round-robin to threads that update the shared matrices without locking.
inline EmbeddingModel train(std::span<const PersonDoc> docs, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {}, Diagnostics* diag = nullptr) {
  cfg.validate();
  if (docs.empty()) throw TrainingError("no documents to train on");

  EmbeddingModel model;
  model.config = cfg;
  model.vocab = build_vocab(docs, cfg.min_count, cfg.noise_exponent);

  std::vector<std::vector<std::int32_t>> doc_ids;
  std::uint64_t total_words = 0;
  for (const auto& d : docs) {
    auto ids = detail::to_ids(model.vocab, d.tokens);
    if (ids.empty()) {
      warn(diag, "document '" + d.subject + "' has no in-vocabulary tokens; skipped");
      continue;
    }
    total_words += ids.size();
    model.doc_labels.push_back(d.subject);
    doc_ids.push_back(std::move(ids));
  }
  if (doc_ids.empty()) throw TrainingError("no trainable documents (every document is out of vocabulary)");
  model.rebuild_doc_index();

  const std::size_t dim = cfg.dim;
  const std::size_t vocab_size = model.vocab.size();
  Rng init_rng(mix_seed(cfg.seed, 0xD0C));
  model.params.doc = Matrix<float>(doc_ids.size(), dim);
  detail::init_uniform(model.params.doc, dim, init_rng);
  if (cfg.uses_word_inputs()) {
    model.params.word_in = Matrix<float>(vocab_size, dim);
    detail::init_uniform(model.params.word_in, dim, init_rng);
  }
  model.params.word_out = Matrix<float>(vocab_size, cfg.hidden_width(), 0.0f);

  const double total_updates = static_cast<double>(total_words) * cfg.epochs;
  auto lr_for = [&](std::uint64_t done) {
    const double frac = std::min(1.0, static_cast<double>(done) / total_updates);
    return static_cast<float>(cfg.initial_lr - (cfg.initial_lr - cfg.final_lr) * frac);
  };

  std::vector<std::size_t> order(doc_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng(mix_seed(cfg.seed, 0x5F1));
  std::atomic<std::uint64_t> processed{0};

  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    const std::size_t workers = std::min<std::size_t>(cfg.workers, order.size());
    std::vector<double> loss(workers, 0.0);
    std::vector<std::size_t> tasks(workers, 0);

    auto work = [&](std::size_t w) {
      Rng rng(mix_seed(cfg.seed, epoch, w + 1));
      Workspace<float> ws;
      for (std::size_t k = w; k < order.size(); k += workers) {
        const std::size_t row = order[k];
        const auto& ids = doc_ids[row];
        const std::uint64_t base = processed.load(std::memory_order_relaxed);
        auto [l, t] = detail::train_document(cfg, model.vocab, model.params.doc.row(row),
                                             model.params.word_in.view(), model.params.word_out.view(), ids,
                                             [&](std::size_t pos) { return lr_for(base + pos); }, rng, ws, true);
        processed.fetch_add(ids.size(), std::memory_order_relaxed);
        loss[w] += l;
        tasks[w] += t;
      }
    };

    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
      for (auto& t : threads) t.join();
    }

    if (!model.params.all_finite())
      throw TrainingError("non-finite parameter detected after epoch " + std::to_string(epoch));

    if (on_epoch) {
      double l = 0.0;
      std::size_t t = 0;
      for (std::size_t w = 0; w < workers; ++w) {
        l += loss[w];
        t += tasks[w];
      }
      on_epoch({epoch, t ? l / static_cast<double>(t) : 0.0, lr_for(processed.load())});
    }
  }
  return model;
}

// Learns a vector for an unseen token sequence with all word and output
// weights frozen.
inline std::vector<float> infer_vector(const EmbeddingModel& model, std::span<const std::string> tokens,
                                       std::uint32_t epochs, std::uint64_t seed) {
  if (epochs < 1) throw ConfigError("inference epochs must be >= 1");
  const auto ids = detail::to_ids(model.vocab, tokens);
  if (ids.empty()) throw Error("cannot infer a vector: no token is in the vocabulary");

  const auto& cfg = model.config;
  Rng rng(mix_seed(seed, 0x1AF));
  Matrix<float> fresh(1, cfg.dim);
  detail::init_uniform(fresh, cfg.dim, rng);

  const double total = static_cast<double>(ids.size()) * epochs;
  Workspace<float> ws;
  for (std::uint32_t e = 0; e < epochs; ++e) {
    const double base = static_cast<double>(e) * static_cast<double>(ids.size());
    auto lr_at = [&](std::size_t pos) {
      const double frac = (base + static_cast<double>(pos)) / total;
      return static_cast<float>(cfg.initial_lr - (cfg.initial_lr - cfg.final_lr) * frac);
    };
    detail::train_document(cfg, model.vocab, fresh.row(0), model.params.word_in.view(),
                           model.params.word_out.view(), ids, lr_at, rng, ws, false);
  }
  return std::move(fresh.values());
}

}  // namespace tripscore
