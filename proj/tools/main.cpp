#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "isolab/errors.hpp"

using namespace isolab;
using namespace isolab::cli;

// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
int main(int argc, char** argv) {
  CLI::App app{"isolab: isotropy-regularized supervised pre-training for few-shot "
               "intent detection at desk scale"};
  app.require_subcommand(1);

  PretrainArgs pretrain;
  auto* sub_pretrain =
      app.add_subcommand("pretrain", "train an encoder on the source domains");
  sub_pretrain->add_option("--config", pretrain.config, "training config JSON")->required();
  sub_pretrain->add_option("--data", pretrain.data, "corpus JSONL")->required();
  sub_pretrain->add_option("--split", pretrain.split, "domain split JSON")->required();
  sub_pretrain->add_option("--out", pretrain.out, "output directory")->required();
  std::uint64_t pretrain_seed = 0;
  auto* pretrain_seed_opt =
      sub_pretrain->add_option("--seed", pretrain_seed, "override the config seed");

  EvalArgs eval;
  auto* sub_eval = app.add_subcommand("eval", "episodic few-shot evaluation");
  sub_eval->add_option("--checkpoint", eval.checkpoints, "checkpoint file (repeatable)")
      ->required();
  sub_eval->add_option("--target", eval.target, "target corpus JSONL")->required();
  sub_eval->add_option("--target-domains", eval.target_domains,
                       "comma list restricting the target corpus");
  sub_eval->add_option("--C", eval.way, "classes per episode");
  sub_eval->add_option("--K", eval.shots, "support examples per class");
  sub_eval->add_option("--Q", eval.queries, "query examples per class");
  sub_eval->add_option("--episodes", eval.episodes, "episodes per seed");
  sub_eval->add_option("--seeds", eval.seeds, "comma list of episode seeds");
  sub_eval->add_option("--out", eval.out, "write the JSON report here");

  IsotropyArgs iso;
  auto* sub_iso = app.add_subcommand("isotropy", "measure I(V) of an embedding set");
  sub_iso->add_option("--embeddings", iso.embeddings, "embedding text file");
  sub_iso->add_option("--checkpoint", iso.checkpoint, "checkpoint file");
  sub_iso->add_option("--data", iso.data, "corpus JSONL to encode");
  sub_iso->add_option("--domains", iso.domains, "comma list restricting the corpus");
  sub_iso->add_flag("--per-domain", iso.per_domain, "also print per-domain isotropy");
  sub_iso->add_option("--subsample", iso.subsample, "subsample size (default: all)");
  sub_iso->add_option("--seed", iso.seed, "subsample seed");
  sub_iso->add_option("--dump-embeddings", iso.dump_embeddings,
                      "also write the measured vectors to this file");

  WhitenArgs whiten;
  auto* sub_whiten = app.add_subcommand("whiten", "fit and apply a whitening map");
  sub_whiten->add_option("--embeddings", whiten.embeddings, "embedding text file")
      ->required();
  sub_whiten->add_option("--out", whiten.out, "output embedding file")->required();
  sub_whiten->add_option("--fit-on", whiten.fit_on, "fit the map on this file instead");
  sub_whiten->add_option("--map-out", whiten.map_out, "dump the fitted map here");

  SweepArgs sweep;
  auto* sub_sweep =
      app.add_subcommand("sweep", "train across regularizer weights, plot accuracy vs isotropy");
  sub_sweep->add_option("--config", sweep.config, "base training config JSON")->required();
  sub_sweep->add_option("--data", sweep.data, "corpus JSONL")->required();
  sub_sweep->add_option("--split", sweep.split, "domain split JSON")->required();
  sub_sweep->add_option("--param", sweep.param,
                        "swept field: lambda, lambda1, lambda2, tau, l2_weight");
  sub_sweep->add_option("--values", sweep.values, "comma list of values")->required();
  sub_sweep->add_option("--seeds", sweep.seeds, "comma list of training seeds");
  sub_sweep->add_option("--target-domains", sweep.target_domains,
                        "evaluation domains (default: the split's excluded list)");
  sub_sweep->add_option("--episodes", sweep.episodes, "evaluation episodes per run");
  sub_sweep->add_option("--episode-seed", sweep.episode_seed, "shared episode seed");
  sub_sweep->add_option("--out", sweep.out, "output directory")->required();

  ReportArgs report;
  auto* sub_report =
      app.add_subcommand("report", "covariance/correlation heatmaps, isotropy, timing");
  sub_report->add_option("--checkpoint", report.checkpoint, "checkpoint file")->required();
  sub_report->add_option("--data", report.data, "corpus JSONL")->required();
  sub_report->add_option("--domains", report.domains, "comma list restricting the corpus");
  sub_report->add_option("--trainlog", report.trainlog,
                         "train log (default: trainlog.jsonl beside the checkpoint)");
  sub_report->add_option("--out", report.out, "output directory")->required();

  SynthArgs synth;
  auto* sub_synth = app.add_subcommand("synth", "generate a synthetic intent corpus");
  sub_synth->add_option("--config", synth.config, "synth config JSON (defaults if omitted)");
  sub_synth->add_option("--out", synth.out, "output corpus JSONL")->required();
  std::uint64_t synth_seed = 0;
  auto* synth_seed_opt = sub_synth->add_option("--seed", synth_seed, "override the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sub_pretrain) {
      if (*pretrain_seed_opt) pretrain.seed = pretrain_seed;
      return cmd_pretrain(pretrain);
    }
    if (*sub_eval) return cmd_eval(eval);
    if (*sub_iso) return cmd_isotropy(iso);
    if (*sub_whiten) return cmd_whiten(whiten);
    if (*sub_sweep) return cmd_sweep(sweep);
    if (*sub_report) return cmd_report(report);
    if (*sub_synth) {
      if (*synth_seed_opt) synth.seed = synth_seed;
      return cmd_synth(synth);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DegenerateInput& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
