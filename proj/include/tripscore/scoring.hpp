#pragma once

// Per-value models built from single-valued subjects, and raw relevance
// scores in [0, 1] for (subject, value) pairs.

#include <map>

#include "embedding.hpp"

namespace tripscore {

enum class Method { cossim, logreg };

inline std::string_view to_string(Method m) { return m == Method::cossim ? "cossim" : "logreg"; }

inline std::string_view display_name(Method m) { return m == Method::cossim ? "CosSim" : "LogReg"; }

inline Method parse_method(std::string_view s) {
  if (s == "cossim") return Method::cossim;
  if (s == "logreg") return Method::logreg;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected cossim|logreg)");
}

struct ScoreRecord {
  std::string subject;
  std::string value;
  double raw = 0.0;
  int mapped = 0;

  bool operator==(const ScoreRecord&) const = default;
};

// ---------------------------------------------------------------------------
// CosSim
// ---------------------------------------------------------------------------

struct ValueCentroid {
  std::string value;
  std::vector<double> centroid;  // unit norm
  std::size_t support = 0;
};

// Normalized mean of `vectors`; nullopt if the mean vanishes.
template <class T>
std::optional<std::vector<double>> normalized_mean(std::span<const std::span<const T>> vectors) {
  if (vectors.empty()) return std::nullopt;
  std::vector<double> mean(vectors.front().size(), 0.0);
  for (const auto& v : vectors)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += static_cast<double>(v[i]);
  for (auto& x : mean) x /= static_cast<double>(vectors.size());
  const double norm = l2_norm(std::span<const double>(mean));
  if (!(norm > 1e-12)) return std::nullopt;
  for (auto& x : mean) x /= norm;
  return mean;
}

// One centroid per group whose members have vectors in the model. Groups
// with no resolvable member, or whose member vectors cancel out, are
// omitted with a warning.
inline std::vector<ValueCentroid> build_centroids(const EmbeddingModel& model, std::span<const ValueGroup> groups,
                                                  Diagnostics* diag = nullptr) {
  if (groups.empty()) throw Error("no value groups to build centroids from");
  std::vector<ValueCentroid> out;
  for (const auto& g : groups) {
    std::vector<std::span<const float>> vectors;
    for (const auto& member : g.members)
      if (auto v = model.doc_vector(member->subject)) vectors.push_back(*v);
    if (vectors.empty()) {
      warn(diag, "value '" + g.value + "' has no member with a trained vector; no centroid");
      continue;
    }
    auto mean = normalized_mean<float>(vectors);
    if (!mean) {
      warn(diag, "value '" + g.value + "' has a zero mean vector; no centroid");
      continue;
    }
    out.push_back({g.value, std::move(*mean), vectors.size()});
  }
  return out;
}

// Cosine similarity, negatives clamped to zero.
template <class T>
double cos_sim_score(std::span<const T> person, const ValueCentroid& c) {
  if (person.size() != c.centroid.size()) throw Error("vector dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < person.size(); ++i) d += static_cast<double>(person[i]) * c.centroid[i];
  const double norm = l2_norm(person);
  if (!(norm > 0.0)) throw Error("cannot score a zero person vector");
  return std::clamp(d / norm, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// LogReg
// ---------------------------------------------------------------------------

struct Classifier {
  std::vector<std::string> labels;
  Matrix<double> weights;  // K x dim
  std::vector<double> bias;

  std::size_t classes() const noexcept { return labels.size(); }

  template <class T>
  std::vector<double> probabilities(std::span<const T> x) const {
    std::vector<double> z(classes());
    for (std::size_t k = 0; k < z.size(); ++k) {
      auto w = weights.row(k);
      double s = bias[k];
      for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * static_cast<double>(x[i]);
      z[k] = s;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (auto& v : z) {
      v = std::exp(v - zmax);
      total += v;
    }
    for (auto& v : z) v /= total;
    return z;
  }

  std::optional<std::size_t> label_index(std::string_view value) const {
    auto it = std::find(labels.begin(), labels.end(), value);
    if (it == labels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels.begin());
  }
};

struct LabeledData {
  Matrix<double> features;  // N x dim
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;
};

struct LogRegOptions {
  double reg = 1e-4;
  std::uint32_t iters = 500;
  double lr = 0.1;
};

// Mean softmax cross-entropy plus (reg/2)*||W||^2 (bias unregularized).
// Fills the gradients when the pointers are non-null.
inline double logreg_loss(const Classifier& clf, const LabeledData& data, double reg,
                          Matrix<double>* grad_w = nullptr, std::vector<double>* grad_b = nullptr) {
  const std::size_t n = data.features.rows();
  const std::size_t k = clf.classes();
  const std::size_t dim = data.features.cols();
  if (grad_w) *grad_w = Matrix<double>(k, dim, 0.0);
  if (grad_b) grad_b->assign(k, 0.0);

  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    auto x = data.features.row(s);
    auto p = clf.probabilities(x);
    loss -= std::log(std::max(p[data.labels[s]], std::numeric_limits<double>::min()));
    if (!grad_w && !grad_b) continue;
    p[data.labels[s]] -= 1.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double g = p[c] / static_cast<double>(n);
      if (grad_w) axpy(g, x, grad_w->row(c));
      if (grad_b) (*grad_b)[c] += g;
    }
  }
  loss /= static_cast<double>(n);

  double sq = 0.0;
  for (double w : clf.weights.values()) sq += w * w;
  loss += 0.5 * reg * sq;
  if (grad_w)
    for (std::size_t i = 0; i < grad_w->values().size(); ++i) grad_w->values()[i] += reg * clf.weights.values()[i];
  return loss;
}

using IterationCallback = std::function<void(std::uint32_t, double)>;

// Full-batch gradient descent from zero weights.
inline Classifier train_logreg(const LabeledData& data, const LogRegOptions& opts,
                               const IterationCallback& on_iter = {}) {
  const std::size_t k = data.class_names.size();
  if (k < 2) throw Error("single class: logistic regression needs at least two classes");
  if (data.features.rows() == 0 || data.labels.size() != data.features.rows())
    throw Error("logistic regression needs one label per training example");

  Classifier clf;
  clf.labels = data.class_names;
  clf.weights = Matrix<double>(k, data.features.cols(), 0.0);
  clf.bias.assign(k, 0.0);

  Matrix<double> gw;
  std::vector<double> gb;
  for (std::uint32_t it = 0; it < opts.iters; ++it) {
    const double loss = logreg_loss(clf, data, opts.reg, &gw, &gb);
    if (!std::isfinite(loss)) throw TrainingError("non-finite logistic regression loss at iteration " + std::to_string(it));
    if (on_iter) on_iter(it, loss);
    axpy(-opts.lr, std::span<const double>(gw.values()), std::span<double>(clf.weights.values()));
    axpy(-opts.lr, std::span<const double>(gb), std::span<double>(clf.bias));
  }
  return clf;
}

// Training set from the groups' member vectors; groups with no resolvable
// member are dropped.
inline LabeledData labeled_data(const EmbeddingModel& model, std::span<const ValueGroup> groups,
                                Diagnostics* diag = nullptr) {
  LabeledData data;
  std::vector<std::span<const float>> rows;
  for (const auto& g : groups) {
    const std::size_t before = rows.size();
    for (const auto& member : g.members) {
      if (auto v = model.doc_vector(member->subject)) {
        rows.push_back(*v);
        data.labels.push_back(data.class_names.size());
      }
    }
    if (rows.size() == before) {
      warn(diag, "value '" + g.value + "' has no member with a trained vector; not a classifier class");
      continue;
    }
    data.class_names.push_back(g.value);
  }
  data.features = Matrix<double>(rows.size(), model.config.dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), data.features.row(i).begin());
  return data;
}

inline Classifier train_logreg(const EmbeddingModel& model, std::span<const ValueGroup> groups,
                               const LogRegOptions& opts, Diagnostics* diag = nullptr) {
  return train_logreg(labeled_data(model, groups, diag), opts);
}

template <class T>
double predict_proba(const Classifier& clf, std::span<const T> person, std::string_view value) {
  auto k = clf.label_index(value);
  if (!k) {
    std::string known;
    for (const auto& l : clf.labels) known += (known.empty() ? "" : ", ") + l;
    throw Error("unknown value '" + std::string(value) + "' (known: " + known + ")");
  }
  return std::clamp(clf.probabilities(person)[*k], 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Subject scoring
// ---------------------------------------------------------------------------

struct ValueModels {
  Method method = Method::cossim;
  std::map<std::string, ValueCentroid, std::less<>> centroids;
  std::optional<Classifier> classifier;
};

inline ValueModels build_value_models(const EmbeddingModel& model, std::span<const ValueGroup> groups, Method method,
                                      const LogRegOptions& opts = {}, Diagnostics* diag = nullptr) {
  ValueModels vm;
  vm.method = method;
  if (method == Method::cossim) {
    for (auto& c : build_centroids(model, groups, diag)) {
      auto key = c.value;
      vm.centroids.emplace(std::move(key), std::move(c));
    }
  } else {
    vm.classifier = train_logreg(model, groups, opts, diag);
  }
  return vm;
}

struct SubjectScores {
  std::vector<ScoreRecord> records;
  std::vector<std::string> errors;  // one per value that could not be scored
};

// Scores each candidate in input order. Values without a model are reported
// in `errors` and skipped.
template <class T>
SubjectScores score_subject(const std::string& subject, std::span<const T> person,
                            std::span<const std::string> candidates, const ValueModels& models) {
  SubjectScores out;
  for (const auto& value : candidates) {
    try {
      double raw;
      if (models.method == Method::cossim) {
        auto it = models.centroids.find(value);
        if (it == models.centroids.end()) throw Error("no centroid for value '" + value + "'");
        raw = cos_sim_score(person, it->second);
      } else {
        if (!models.classifier) throw Error("no classifier");
        raw = predict_proba(*models.classifier, person, value);
      }
      out.records.push_back({subject, value, raw, 0});
    } catch (const Error& e) {
      out.errors.push_back(subject + ": " + e.what());
    }
  }
  return out;
}

inline SubjectScores score_subject(const EmbeddingModel& model, const std::string& subject,
                                   std::span<const std::string> candidates, const ValueModels& models) {
  auto v = model.doc_vector(subject);
  if (!v) throw Error("no vector for subject '" + subject + "'");
  return score_subject<float>(subject, *v, candidates, models);
}

}  // namespace tripscore
