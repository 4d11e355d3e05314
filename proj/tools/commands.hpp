#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace isolab::cli {

struct PretrainArgs {
  std::string config;
  std::string data;
  std::string split;
  std::string out;
  std::optional<std::uint64_t> seed;  // overrides the config's seed
};
int cmd_pretrain(const PretrainArgs& args);

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string target;
  std::string target_domains;  // optional comma list; default: whole corpus
  int way = 5;
  int shots = 2;
  int queries = 5;
  int episodes = 500;
  std::string seeds = "1,2,3,4,5";  // episode-sampling seeds
  std::string out;                  // optional report path
};
int cmd_eval(const EvalArgs& args);

struct IsotropyArgs {
  std::string embeddings;  // either this ...
  std::string checkpoint;  // ... or checkpoint+data
  std::string data;
  std::string domains;  // optional comma list restricting the corpus
  bool per_domain = false;
  int subsample = 0;  // 0 = use all rows
  std::uint64_t seed = 1;
  std::string dump_embeddings;  // optional: write the measured vectors here
};
int cmd_isotropy(const IsotropyArgs& args);

struct WhitenArgs {
  std::string embeddings;
  std::string out;
  std::string fit_on;   // optional: fit the map on this file instead
  std::string map_out;  // optional: dump mean+transform
};
int cmd_whiten(const WhitenArgs& args);

struct SweepArgs {
  std::string config;
  std::string data;
  std::string split;
  std::string out;
  std::string param = "lambda";
  std::string values;
  std::string seeds = "1,2,3";
  std::string target_domains;  // default: the split's excluded domains
  int episodes = 500;
  std::uint64_t episode_seed = 1;
};
int cmd_sweep(const SweepArgs& args);

struct ReportArgs {
  std::string checkpoint;
  std::string data;
  std::string domains;   // optional comma list
  std::string trainlog;  // optional; default <checkpoint dir>/trainlog.jsonl
  std::string out;
};
int cmd_report(const ReportArgs& args);

struct SynthArgs {
  std::string config;  // optional; defaults when empty
  std::string out;
  std::optional<std::uint64_t> seed;
};
int cmd_synth(const SynthArgs& args);

}  // namespace isolab::cli
