// tripscore: prepare / train / score / eval.
//
// Every flag is also a config-file key (`key=value`, see --config); flags
// given on the command line override the file.

#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "tripscore/pipeline.hpp"

namespace {

struct FlagSpec {
  const char* key;
  const char* help;
};

const FlagSpec kShared[] = {
    {"seed", "random seed"},
    {"workers", "training threads (1 = deterministic)"},
};

const FlagSpec kPrepare[] = {
    {"triples", "triples TSV (subject<TAB>value)"},
    {"sentences", "sentences TSV (subject<TAB>sentence)"},
    {"property", "profession|nationality"},
    {"floor", "enrich groups with fewer members (default 100)"},
    {"cap", "truncate groups to this many members (default 5000)"},
    {"enrich-dir", "directory of <value>.txt enrichment pages"},
    {"enrich-pages", "pages retrieved per enriched value (default 200)"},
    {"shuffle", "shuffle oversized groups before truncation (true|false)"},
    {"out", "output corpus directory"},
};

const FlagSpec kTrain[] = {
    {"corpus", "prepared corpus directory"},
    {"model", "model file to write"},
    {"property", "profession|nationality"},
    {"mode", "dbow|dm-concat|dm-avg (default dbow)"},
    {"dim", "vector size (default 200)"},
    {"window", "context window (default 5)"},
    {"negative", "negative samples (default 5)"},
    {"epochs", "training epochs (default 20)"},
    {"min-count", "minimum word count (default 10)"},
    {"initial-lr", "initial learning rate (default 0.025)"},
    {"final-lr", "final learning rate (default 0.0001)"},
    {"train-words", "dbow: also train word vectors (true|false)"},
    {"noise-exponent", "noise distribution exponent (default 0.75)"},
};

const FlagSpec kScore[] = {
    {"corpus", "prepared corpus directory"},
    {"model", "trained model file"},
    {"scores", "scores TSV to write"},
    {"property", "profession|nationality"},
    {"method", "cossim|logreg (default cossim)"},
    {"mapping", "lin|log|range (default lin)"},
    {"max-score", "top of the score scale (default 7)"},
    {"log-floor", "lowest probability distinguished by log mapping (default 1e-4)"},
    {"infer-epochs", "epochs for inferring missing vectors (0 = model epochs)"},
    {"reg", "logreg L2 strength (default 1e-4)"},
    {"iters", "logreg iterations (default 500)"},
    {"logreg-lr", "logreg learning rate (default 0.1)"},
};

const FlagSpec kEval[] = {
    {"scores", "scores TSV"},
    {"gold", "gold TSV (subject<TAB>value<TAB>score)"},
    {"method", "row label: cossim|logreg"},
    {"delta", "accuracy tolerance (default 2)"},
    {"max-score", "top of the score scale (default 7)"},
};

struct Subcommand {
  Subcommand(CLI::App& root, const char* name, const char* description)
      : app(root.add_subcommand(name, description)) {
    app->add_option("--config", config, "key=value configuration file");
  }
  Subcommand(const Subcommand&) = delete;
  Subcommand& operator=(const Subcommand&) = delete;

  CLI::App* app;
  std::string config;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  template <std::size_t N>
  void add(const FlagSpec (&flags)[N]) {
    for (const auto& f : flags)
      options.emplace_back(f.key, app->add_option(std::string("--") + f.key, values[f.key], f.help));
  }

  tripscore::PipelineConfig resolve() const {
    tripscore::PipelineConfig cfg;
    if (!config.empty()) cfg.merge_file(config);
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) cfg.set(key, values.at(key));
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App root{"Relevance scores for multi-valued knowledge-base triples from paragraph vectors"};
  root.require_subcommand(1);

  Subcommand prepare(root, "prepare", "build person documents and balanced value groups");
  Subcommand train(root, "train", "train paragraph vectors over all person documents");
  Subcommand score(root, "score", "score every multi-valued subject's values");
  Subcommand eval(root, "eval", "compare scores with gold labels");
  for (auto* s : {&prepare, &train, &score, &eval}) s->add(kShared);
  prepare.add(kPrepare);
  train.add(kTrain);
  score.add(kScore);
  eval.add(kEval);

  CLI11_PARSE(root, argc, argv);

  try {
    tripscore::CommandStatus status;
    if (*prepare.app) {
      status = tripscore::cmd_prepare(prepare.resolve(), std::cerr);
    } else if (*train.app) {
      status = tripscore::cmd_train(train.resolve(), std::cerr);
    } else if (*score.app) {
      status = tripscore::cmd_score(score.resolve(), std::cerr);
    } else {
      status = tripscore::cmd_eval(eval.resolve(), std::cout, std::cerr);
    }
    return status.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
