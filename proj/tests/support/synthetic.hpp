#pragma once

// Synthetic triple-scoring corpus: each value ("pseudo-profession") owns a
// disjoint vocabulary; single-valued subjects draw all tokens from their
// value's vocabulary, mixed subjects draw from exactly two.

#include <tripscore/corpus.hpp>
#include <tripscore/evaluation.hpp>

namespace tripscore::testing {

struct SyntheticOptions {
  std::size_t vocab_per_topic = 200;
  std::vector<std::size_t> docs_per_topic = {50, 50, 50, 50, 50};
  std::size_t tokens_per_doc = 100;
  std::size_t words_per_sentence = 10;
  std::size_t mixed_subjects = 20;
  std::size_t distractors = 3;  // non-true candidate values per mixed subject
  std::uint64_t seed = 42;
};

struct MixedSubject {
  std::string subject;
  std::size_t topic_a = 0;
  std::size_t topic_b = 0;
  std::vector<std::size_t> distractors;
};

inline std::string topic_value(std::size_t t) { return "Profession" + std::to_string(t); }
inline std::string topic_word(std::size_t t, std::size_t w) {
  return "t" + std::to_string(t) + "w" + std::to_string(w);
}

struct SyntheticCorpus {
  std::vector<Triple> triples;
  std::vector<std::pair<std::string, std::string>> sentences;
  std::vector<MixedSubject> mixed;
  std::vector<GoldLabel> gold;  // mixed subjects only: 7 true, 0 distractor

  std::size_t topics() const { return topic_count; }
  std::size_t topic_count = 0;

  void write(const std::filesystem::path& dir) const {
    std::string t, s, g;
    for (const auto& x : triples) t += x.subject + "\t" + x.value + "\n";
    for (const auto& [subj, sent] : sentences) s += subj + "\t" + sent + "\n";
    for (const auto& x : gold) g += x.subject + "\t" + x.value + "\t" + std::to_string(x.score) + "\n";
    write_file(dir / "triples.tsv", t);
    write_file(dir / "sentences.tsv", s);
    write_file(dir / "gold.tsv", g);
  }

  // Person documents, one per subject, in triple order.
  std::vector<PersonDoc> docs() const {
    std::unordered_map<std::string, std::vector<std::string>> by_subject;
    std::vector<std::string> order;
    for (const auto& [subj, sent] : sentences) {
      auto [it, inserted] = by_subject.try_emplace(subj);
      if (inserted) order.push_back(subj);
      it->second.push_back(sent);
    }
    std::vector<PersonDoc> out;
    for (const auto& subj : order) out.push_back(build_person_doc(subj, by_subject[subj]));
    return out;
  }
};

inline SyntheticCorpus make_synthetic(const SyntheticOptions& opt) {
  SyntheticCorpus c;
  c.topic_count = opt.docs_per_topic.size();
  Rng rng(opt.seed);
  std::size_t person = 0;

  auto emit_doc = [&](const std::string& subject, auto&& pick_topic) {
    std::string sentence;
    std::size_t in_sentence = 0;
    for (std::size_t k = 0; k < opt.tokens_per_doc; ++k) {
      const std::size_t topic = pick_topic();
      sentence += " " + topic_word(topic, rng.below(opt.vocab_per_topic));
      if (++in_sentence == opt.words_per_sentence || k + 1 == opt.tokens_per_doc) {
        c.sentences.emplace_back(subject, subject + sentence + ".");
        sentence.clear();
        in_sentence = 0;
      }
    }
  };

  for (std::size_t t = 0; t < c.topic_count; ++t) {
    for (std::size_t d = 0; d < opt.docs_per_topic[t]; ++d) {
      const std::string subject = "Person " + std::to_string(person++);
      c.triples.push_back({subject, Property::profession, topic_value(t)});
      emit_doc(subject, [t] { return t; });
    }
  }

  for (std::size_t m = 0; m < opt.mixed_subjects; ++m) {
    MixedSubject ms;
    ms.subject = "Person " + std::to_string(person++);
    ms.topic_a = rng.below(c.topic_count);
    do ms.topic_b = rng.below(c.topic_count);
    while (ms.topic_b == ms.topic_a);
    std::vector<std::size_t> others;
    for (std::size_t t = 0; t < c.topic_count; ++t)
      if (t != ms.topic_a && t != ms.topic_b) others.push_back(t);
    rng.shuffle(others);
    others.resize(std::min(opt.distractors, others.size()));
    ms.distractors = others;

    // Candidate order: true and distractor values interleaved by topic id.
    std::vector<std::size_t> candidates = {ms.topic_a, ms.topic_b};
    candidates.insert(candidates.end(), others.begin(), others.end());
    std::sort(candidates.begin(), candidates.end());
    for (auto t : candidates) {
      c.triples.push_back({ms.subject, Property::profession, topic_value(t)});
      const bool truth = t == ms.topic_a || t == ms.topic_b;
      c.gold.push_back({ms.subject, topic_value(t), truth ? 7 : 0});
    }
    emit_doc(ms.subject, [&] { return rng.below(2) ? ms.topic_a : ms.topic_b; });
    c.mixed.push_back(std::move(ms));
  }
  return c;
}

}  // namespace tripscore::testing
