#pragma once

// End-to-end commands: prepare -> train -> score -> eval.
//
// Prepared corpus directory layout:
//   docs.tsv            subject, source sentence count, space-joined tokens
//   groups.tsv          value, enriched flag (0/1), member subjects...
//   triples.tsv         deduplicated subject/value triples
//   balance_report.tsv  value, members before, members after, status
//   config.txt          effective configuration

#include <charconv>
#include <ostream>

#include "corpus.hpp"
#include "embedding.hpp"
#include "evaluation.hpp"
#include "mapping.hpp"
#include "model_io.hpp"
#include "scoring.hpp"

namespace tripscore {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::string triples;
  std::string sentences;
  std::string gold;
  std::string enrich_dir;
  std::string corpus;
  std::string model;
  std::string scores;

  Property property = Property::profession;
  std::size_t floor = 100;
  std::size_t cap = 5000;
  std::size_t enrich_pages = 200;
  bool shuffle = false;

  TrainConfig train;

  Method method = Method::cossim;
  MappingSpec mapping;
  std::uint32_t infer_epochs = 0;  // 0: use the model's epoch count
  LogRegOptions logreg;

  int delta = 2;

  // Every key accepted by set(), in to_text() order.
  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "triples",  "sentences",   "gold",       "enrich-dir",     "corpus",    "model",     "scores",
        "property", "floor",       "cap",        "enrich-pages",   "shuffle",   "seed",      "workers",
        "mode",     "dim",         "window",     "negative",       "epochs",    "min-count", "initial-lr",
        "final-lr", "train-words", "noise-exponent", "method",     "mapping",   "max-score", "log-floor",
        "infer-epochs", "reg",     "iters",      "logreg-lr",      "delta"};
    return k;
  }

  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  std::string to_text() const {
    std::string out;
    for (const auto& k : keys()) out += k + "=" + get(k) + "\n";
    return out;
  }

  // Applies `key=value` lines on top of the current values. Blank lines and
  // lines starting with '#' are ignored.
  void merge_text(std::string_view text, const std::string& origin = "config") {
    std::size_t number = 0;
    for (auto line : split(text, '\n')) {
      ++number;
      line = trim(line);
      if (line.empty() || line.front() == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError(origin, number, "expected key=value");
      try {
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ParseError(origin, number, e.what());
      }
    }
  }

  void merge_file(const std::filesystem::path& path) { merge_text(read_file(path), path.string()); }

  static PipelineConfig from_text(std::string_view text) {
    PipelineConfig c;
    c.merge_text(text);
    return c;
  }

  void validate() const {
    train.validate();
    mapping.validate();
    if (floor > cap) throw ConfigError("floor exceeds cap");
    if (delta < 0) throw ConfigError("delta must be >= 0");
    if (logreg.iters < 1 || !(logreg.lr > 0.0) || !(logreg.reg >= 0.0))
      throw ConfigError("logistic regression needs iters >= 1, lr > 0, reg >= 0");
  }
};

namespace detail {

template <class T>
T parse_number(std::string_view key, std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("invalid value '" + std::string(s) + "' for " + std::string(key));
  return v;
}

inline bool parse_bool(std::string_view key, std::string_view s) {
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  throw ConfigError("invalid boolean '" + std::string(s) + "' for " + std::string(key));
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline void PipelineConfig::set(std::string_view key, std::string_view v) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "triples") triples = v;
  else if (key == "sentences") sentences = v;
  else if (key == "gold") gold = v;
  else if (key == "enrich-dir") enrich_dir = v;
  else if (key == "corpus" || key == "out") corpus = v;
  else if (key == "model") model = v;
  else if (key == "scores") scores = v;
  else if (key == "property") property = parse_property(v);
  else if (key == "floor") floor = parse_number<std::size_t>(key, v);
  else if (key == "cap") cap = parse_number<std::size_t>(key, v);
  else if (key == "enrich-pages") enrich_pages = parse_number<std::size_t>(key, v);
  else if (key == "shuffle") shuffle = parse_bool(key, v);
  else if (key == "seed") train.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "workers") train.workers = parse_number<std::uint32_t>(key, v);
  else if (key == "mode") train.mode = parse_train_mode(v);
  else if (key == "dim") train.dim = parse_number<std::uint32_t>(key, v);
  else if (key == "window") train.window = parse_number<std::uint32_t>(key, v);
  else if (key == "negative") train.negative = parse_number<std::uint32_t>(key, v);
  else if (key == "epochs") train.epochs = parse_number<std::uint32_t>(key, v);
  else if (key == "min-count") train.min_count = parse_number<std::uint32_t>(key, v);
  else if (key == "initial-lr") train.initial_lr = parse_number<double>(key, v);
  else if (key == "final-lr") train.final_lr = parse_number<double>(key, v);
  else if (key == "train-words") train.train_words = parse_bool(key, v);
  else if (key == "noise-exponent") train.noise_exponent = parse_number<double>(key, v);
  else if (key == "method") method = parse_method(v);
  else if (key == "mapping") mapping.kind = parse_mapping(v);
  else if (key == "max-score") mapping.max_value = parse_number<int>(key, v);
  else if (key == "log-floor") mapping.log_floor = parse_number<double>(key, v);
  else if (key == "infer-epochs") infer_epochs = parse_number<std::uint32_t>(key, v);
  else if (key == "reg") logreg.reg = parse_number<double>(key, v);
  else if (key == "iters") logreg.iters = parse_number<std::uint32_t>(key, v);
  else if (key == "logreg-lr") logreg.lr = parse_number<double>(key, v);
  else if (key == "delta") delta = parse_number<int>(key, v);
  else throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

inline std::string PipelineConfig::get(std::string_view key) const {
  using detail::format_double;
  auto num = [](auto x) { return std::to_string(x); };
  if (key == "triples") return triples;
  if (key == "sentences") return sentences;
  if (key == "gold") return gold;
  if (key == "enrich-dir") return enrich_dir;
  if (key == "corpus" || key == "out") return corpus;
  if (key == "model") return model;
  if (key == "scores") return scores;
  if (key == "property") return std::string(to_string(property));
  if (key == "floor") return num(floor);
  if (key == "cap") return num(cap);
  if (key == "enrich-pages") return num(enrich_pages);
  if (key == "shuffle") return shuffle ? "true" : "false";
  if (key == "seed") return num(train.seed);
  if (key == "workers") return num(train.workers);
  if (key == "mode") return std::string(to_string(train.mode));
  if (key == "dim") return num(train.dim);
  if (key == "window") return num(train.window);
  if (key == "negative") return num(train.negative);
  if (key == "epochs") return num(train.epochs);
  if (key == "min-count") return num(train.min_count);
  if (key == "initial-lr") return format_double(train.initial_lr);
  if (key == "final-lr") return format_double(train.final_lr);
  if (key == "train-words") return train.train_words ? "true" : "false";
  if (key == "noise-exponent") return format_double(train.noise_exponent);
  if (key == "method") return std::string(to_string(method));
  if (key == "mapping") return std::string(to_string(mapping.kind));
  if (key == "max-score") return num(mapping.max_value);
  if (key == "log-floor") return format_double(mapping.log_floor);
  if (key == "infer-epochs") return num(infer_epochs);
  if (key == "reg") return format_double(logreg.reg);
  if (key == "iters") return num(logreg.iters);
  if (key == "logreg-lr") return format_double(logreg.lr);
  if (key == "delta") return num(delta);
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

inline bool operator==(const PipelineConfig& a, const PipelineConfig& b) { return a.to_text() == b.to_text(); }

// ---------------------------------------------------------------------------
// Command plumbing
// ---------------------------------------------------------------------------

struct CommandStatus {
  std::vector<std::string> warnings;
  std::vector<std::string> errors;

  int exit_code() const { return errors.empty() ? 0 : 1; }
};

inline void require_file(const std::string& path, std::string_view what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path not set");
  if (!std::filesystem::exists(path)) throw IoError(path, "missing " + std::string(what));
}

inline std::string join(std::span<const std::string> parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

struct PreparedCorpus {
  std::vector<PersonDoc> docs;
  DocMap doc_map;
  std::vector<ValueGroup> groups;
  std::vector<Triple> triples;
};

inline PreparedCorpus load_prepared(const std::filesystem::path& dir, Property property) {
  require_file((dir / "docs.tsv").string(), "prepared corpus docs.tsv");
  PreparedCorpus pc;
  for_each_line(dir / "docs.tsv", [&](std::size_t number, std::string_view line) {
    if (line.empty()) return;
    auto f = split(line, '\t');
    if (f.size() != 3) throw ParseError(dir / "docs.tsv", number, "expected subject<TAB>count<TAB>tokens");
    PersonDoc d;
    d.subject = f[0];
    d.source_sentence_count = detail::parse_number<std::size_t>("sentence count", f[1]);
    for (auto t : split(f[2], ' '))
      if (!t.empty()) d.tokens.emplace_back(t);
    pc.docs.push_back(std::move(d));
  });
  for (const auto& d : pc.docs) pc.doc_map.emplace(d.subject, std::make_shared<const PersonDoc>(d));

  require_file((dir / "groups.tsv").string(), "prepared corpus groups.tsv");
  for_each_line(dir / "groups.tsv", [&](std::size_t number, std::string_view line) {
    if (line.empty()) return;
    auto f = split(line, '\t');
    if (f.size() < 2) throw ParseError(dir / "groups.tsv", number, "expected value<TAB>enriched<TAB>members...");
    ValueGroup g{std::string(f[0]), property, {}, f[1] == "1"};
    for (std::size_t i = 2; i < f.size(); ++i) {
      auto it = pc.doc_map.find(std::string(f[i]));
      if (it == pc.doc_map.end())
        throw ParseError(dir / "groups.tsv", number, "member '" + std::string(f[i]) + "' not in docs.tsv");
      g.members.push_back(it->second);
    }
    pc.groups.push_back(std::move(g));
  });

  pc.triples = load_triples(dir / "triples.tsv", property);
  return pc;
}

// Subjects with two or more values, with their values, in load order.
inline std::vector<std::pair<std::string, std::vector<std::string>>> multi_valued_subjects(
    std::span<const Triple> triples) {
  std::vector<std::pair<std::string, std::vector<std::string>>> subjects;
  std::unordered_map<std::string, std::size_t> pos;
  for (const auto& t : triples) {
    auto [it, inserted] = pos.try_emplace(t.subject, subjects.size());
    if (inserted) subjects.push_back({t.subject, {}});
    subjects[it->second].second.push_back(t.value);
  }
  std::erase_if(subjects, [](const auto& s) { return s.second.size() < 2; });
  return subjects;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline CommandStatus cmd_prepare(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  require_file(cfg.triples, "triples file");
  require_file(cfg.sentences, "sentences file");
  if (!cfg.enrich_dir.empty() && !std::filesystem::is_directory(cfg.enrich_dir))
    throw IoError(cfg.enrich_dir, "missing enrichment directory");
  if (cfg.corpus.empty()) throw ConfigError("output directory (--out) not set");

  CommandStatus status;
  const auto triples = load_triples(cfg.triples, cfg.property);
  const auto sentences = load_sentences(cfg.sentences);

  std::vector<DocPtr> docs;
  DocMap doc_map;
  for (const auto& t : triples) {
    if (doc_map.contains(t.subject)) continue;
    auto doc = std::make_shared<const PersonDoc>(build_person_doc(t.subject, sentences.of(t.subject)));
    doc_map.emplace(t.subject, doc);
    docs.push_back(doc);
  }

  auto groups = group_single_valued(triples, doc_map);
  std::vector<std::size_t> before;
  for (const auto& g : groups) before.push_back(g.members.size());

  BalanceOptions opts;
  opts.floor = cfg.floor;
  opts.cap = cfg.cap;
  opts.enrich_pages = cfg.enrich_pages;
  if (cfg.shuffle) opts.shuffle_seed = cfg.train.seed;
  NullEnricher null_enricher;
  std::optional<DirectoryEnricher> dir_enricher;
  if (!cfg.enrich_dir.empty()) dir_enricher.emplace(cfg.enrich_dir);
  Enricher& enricher = dir_enricher ? static_cast<Enricher&>(*dir_enricher) : null_enricher;
  Diagnostics diag;
  groups = balance_groups(std::move(groups), opts, enricher, &diag);
  status.warnings = diag.warnings();

  const std::filesystem::path out = cfg.corpus;
  std::filesystem::create_directories(out);

  std::string docs_tsv;
  auto emit_doc = [&](const PersonDoc& d) {
    docs_tsv += d.subject + "\t" + std::to_string(d.source_sentence_count) + "\t" + join(d.tokens, ' ') + "\n";
  };
  for (const auto& d : docs) emit_doc(*d);
  for (const auto& g : groups)
    for (const auto& m : g.members)
      if (!doc_map.contains(m->subject)) emit_doc(*m);
  write_file(out / "docs.tsv", docs_tsv);

  std::string groups_tsv, report = "value\tbefore\tafter\tstatus\n";
  std::size_t enriched = 0, truncated = 0, written = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    // Groups still empty after enrichment have nothing to model.
    if (!g.members.empty()) {
      groups_tsv += g.value + "\t" + (g.enriched ? "1" : "0");
      for (const auto& m : g.members) groups_tsv += "\t" + m->subject;
      groups_tsv += "\n";
      ++written;
    }
    std::string state = "ok";
    if (g.members.empty()) {
      state = "empty";
    } else if (g.enriched) {
      state = "enriched";
      ++enriched;
    } else if (before[i] > cfg.cap) {
      state = "truncated";
      ++truncated;
    } else if (g.members.size() < cfg.floor) {
      state = "below-floor";
    }
    report += g.value + "\t" + std::to_string(before[i]) + "\t" + std::to_string(g.members.size()) + "\t" + state + "\n";
  }
  write_file(out / "groups.tsv", groups_tsv);
  write_file(out / "balance_report.tsv", report);

  std::string triples_tsv;
  for (const auto& t : triples) triples_tsv += t.subject + "\t" + t.value + "\n";
  write_file(out / "triples.tsv", triples_tsv);
  write_file(out / "config.txt", cfg.to_text());

  log << "prepare: " << triples.size() << " triples, " << docs.size() << " subjects, " << written
      << " groups (" << enriched << " enriched, " << truncated << " truncated)\n";
  for (const auto& w : status.warnings) log << "warning: " << w << "\n";
  return status;
}

inline CommandStatus cmd_train(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.corpus.empty()) throw ConfigError("corpus directory not set");
  if (cfg.model.empty()) throw ConfigError("model path not set");
  CommandStatus status;
  const auto corpus = load_prepared(cfg.corpus, cfg.property);

  Diagnostics diag;
  auto model = train(
      corpus.docs, cfg.train,
      [&](const EpochStats& s) {
        log << "epoch " << s.epoch << "/" << cfg.train.epochs << " loss=" << s.mean_loss << " lr=" << s.lr << "\n";
      },
      &diag);
  status.warnings = diag.warnings();
  save_model(model, cfg.model);
  write_file(cfg.model + ".config", cfg.to_text());
  log << "train: " << model.doc_labels.size() << " documents, vocabulary " << model.vocab.size() << ", "
      << status.warnings.size() << " documents skipped\n";
  return status;
}

// Writes `subject<TAB>value<TAB>raw<TAB>mapped`, raw with 6 decimals.
inline std::string format_scores(std::span<const ScoreRecord> records) {
  std::string out;
  char raw[32];
  for (const auto& r : records) {
    std::snprintf(raw, sizeof raw, "%.6f", r.raw);
    out += r.subject + "\t" + r.value + "\t" + raw + "\t" + std::to_string(r.mapped) + "\n";
  }
  return out;
}

inline CommandStatus cmd_score(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  require_file(cfg.model, "model file");
  if (cfg.corpus.empty()) throw ConfigError("corpus directory not set");
  if (cfg.scores.empty()) throw ConfigError("scores path not set");
  CommandStatus status;

  const auto model = load_model(cfg.model);
  const auto corpus = load_prepared(cfg.corpus, cfg.property);
  Diagnostics diag;
  const auto models = build_value_models(model, corpus.groups, cfg.method, cfg.logreg, &diag);
  status.warnings = diag.warnings();

  const std::uint32_t infer_epochs = cfg.infer_epochs ? cfg.infer_epochs : model.config.epochs;
  std::vector<ScoreRecord> records;
  std::size_t inferred = 0, subjects = 0;
  const auto candidates = multi_valued_subjects(corpus.triples);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& [subject, values] = candidates[i];
    std::vector<float> vec;
    if (auto v = model.doc_vector(subject)) {
      vec.assign(v->begin(), v->end());
    } else {
      auto doc = corpus.doc_map.find(subject);
      try {
        if (doc == corpus.doc_map.end()) throw Error("no document");
        vec = infer_vector(model, doc->second->tokens, infer_epochs, mix_seed(cfg.train.seed, i));
        ++inferred;
      } catch (const Error& e) {
        status.errors.push_back(subject + ": no vector (" + e.what() + ")");
        continue;
      }
    }
    auto scored = score_subject<float>(subject, vec, values, models);
    for (auto& e : scored.errors) status.errors.push_back(std::move(e));
    for (auto& r : scored.records) records.push_back(std::move(r));
    ++subjects;
  }

  records = apply_mapping(std::move(records), cfg.mapping);
  write_file(cfg.scores, format_scores(records));
  write_file(cfg.scores + ".config", cfg.to_text());

  log << "score: " << subjects << " subjects, " << records.size() << " triples scored with "
      << display_name(cfg.method) << " (" << inferred << " inferred vectors)\n";
  for (const auto& w : status.warnings) log << "warning: " << w << "\n";
  if (!status.errors.empty()) {
    log << "score: " << status.errors.size() << " failures\n";
    for (const auto& e : status.errors) log << "error: " << e << "\n";
  }
  return status;
}

inline CommandStatus cmd_eval(const PipelineConfig& cfg, std::ostream& out, std::ostream& log) {
  cfg.validate();
  require_file(cfg.scores, "scores file");
  require_file(cfg.gold, "gold file");
  const auto preds = load_labeled_pairs(cfg.scores, cfg.mapping.max_value);
  const auto gold = load_labeled_pairs(cfg.gold, cfg.mapping.max_value, false);
  const auto report = evaluate(preds, gold, cfg.delta);
  const std::pair<std::string, EvalReport> row{std::string(display_name(cfg.method)), report};
  out << format_report({&row, 1});
  log << "eval: " << report.n_pairs << " pairs over " << report.n_subjects << " subjects\n";
  return {};
}

}  // namespace tripscore
