#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include "artifacts.hpp"
#include "config_io.hpp"
#include "isolab/checkpoint.hpp"
#include "isolab/embedding_io.hpp"
#include "isolab/errors.hpp"
#include "isolab/fewshot.hpp"
#include "isolab/geometry.hpp"
#include "isolab/textio.hpp"
#include "isolab/train.hpp"

namespace fs = std::filesystem;

namespace isolab::cli {

namespace {

Matrix encode_dataset(const ModelParams& params, const Dataset& data) {
  const Tokenizer tokenizer(params.tokenizer);
  const std::size_t n = data.size();
  const std::size_t d = params.encoder.rep_dim();
  Matrix reps(n, d);
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t stop = std::min(n, start + kChunk);
    std::vector<std::vector<int>> tokens;
    for (std::size_t i = start; i < stop; ++i)
      tokens.push_back(tokenizer.tokenize(data.utterances[i].text));
    const Matrix chunk = encode(params, tokens, EncodeMode::kEval);
    std::copy_n(chunk.data(), chunk.size(), reps.data() + start * d);
  }
  return reps;
}

// Unreadable or malformed inputs are configuration errors (exit 2); IoError
// stays reserved for failures producing outputs (exit 1).
Dataset load_corpus(const std::string& path, const std::string& domains_csv) {
  try {
    Dataset data = load_jsonl(path);
    if (!domains_csv.empty()) data = subset_by_domains(data, split_list(domains_csv));
    return data;
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

EmbeddingMatrix read_embeddings_input(const std::string& path) {
  try {
    return read_embeddings(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

ModelParams load_checkpoint_input(const std::string& path) {
  try {
    return checkpoint_load(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create output directory: " + path);
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

int cmd_pretrain(const PretrainArgs& args) {
  TrainConfig config = load_train_config(args.config);
  if (args.seed) config.seed = *args.seed;

  const Dataset corpus = load_corpus(args.data, "");
  const SplitSpec split = load_split_spec(args.split);
  auto [source, val] = split_by_domain(corpus, split);

  const TrainResult result = train(source, val, config);

  ensure_directory(args.out);
  const std::string ckpt_path = join_path(args.out, "checkpoint.bin");
  checkpoint_save(result.params, ckpt_path);

  // Train log: one JSON line per step (pinned schema) with eval records
  // interleaved at their step and a closing summary line. Wall-time fields
  // make this file nondeterministic; everything else is seed-stable.
  std::string log_text;
  std::size_t next_eval = 0;
  for (const auto& [step, breakdown] : result.log.steps) {
    log_text += loss_line_json(step, breakdown, config.objective);
    log_text += '\n';
    if (next_eval < result.log.evals.size() &&
        result.log.evals[next_eval].step == step) {
      const EvalPoint& e = result.log.evals[next_eval];
      log_text += "{\"step\":" + std::to_string(e.step) +
                  ",\"val_accuracy\":" + format_double(e.accuracy) +
                  ",\"val_isotropy\":" + format_double(e.isotropy) + "}\n";
      ++next_eval;
    }
  }
  log_text += "{\"best_step\":" + std::to_string(result.log.best_step) +
              ",\"best_val_accuracy\":" + format_double(result.log.best_accuracy) +
              ",\"stopping_step\":" + std::to_string(result.log.stopping_step) +
              ",\"best_checkpoint\":\"checkpoint.bin\"}\n";
  write_text(join_path(args.out, "trainlog.jsonl"), log_text);

  // Per-term timing decomposition, scaled to one epoch over the source set.
  double t_ce = 0.0, t_cl = 0.0, t_cor = 0.0;
  for (const auto& [step, b] : result.log.steps) {
    t_ce += b.t_ce;
    t_cl += b.t_cl;
    t_cor += b.t_cor;
  }
  const double steps_per_epoch =
      static_cast<double>(source.size()) / static_cast<double>(config.batch_size);
  const double epochs = result.log.steps.empty()
                            ? 0.0
                            : static_cast<double>(result.log.steps.size()) / steps_per_epoch;
  nlohmann::json timing;
  timing["steps"] = result.log.steps.size();
  timing["epochs"] = epochs;
  timing["total_seconds"] = {{"ce", t_ce}, {"cl", t_cl}, {"cor", t_cor}};
  if (epochs > 0.0)
    timing["per_epoch_seconds"] = {
        {"ce", t_ce / epochs}, {"cl", t_cl / epochs}, {"cor", t_cor / epochs}};
  write_text(join_path(args.out, "timing.json"), timing.dump(2) + "\n");

  Manifest manifest("pretrain");
  manifest.set("config", train_config_to_json(config));
  manifest.set("split", split_spec_to_json(split));
  manifest.set("seed", config.seed);
  manifest.add_input(args.config);
  manifest.add_input(args.data);
  manifest.add_input(args.split);
  manifest.add_output("checkpoint.bin");
  manifest.add_output("trainlog.jsonl");
  manifest.add_output("timing.json");
  manifest.write(join_path(args.out, "manifest.json"));

  std::cout << "trained " << result.log.stopping_step << " steps (best step "
            << result.log.best_step << ", val acc "
            << format_fixed(result.log.best_accuracy * 100.0, 2) << "%)\n"
            << "epoch time decomposition: ce "
            << format_fixed(epochs > 0 ? t_ce / epochs : 0.0, 3) << "s, cl "
            << format_fixed(epochs > 0 ? t_cl / epochs : 0.0, 3) << "s, cor "
            << format_fixed(epochs > 0 ? t_cor / epochs : 0.0, 3) << "s\n"
            << "checkpoint: " << ckpt_path << "\n";
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  if (args.checkpoints.empty()) throw ConfigError("eval: need at least one --checkpoint");
  const Dataset target = load_corpus(args.target, args.target_domains);
  const auto seeds = parse_seed_list(args.seeds);
  if (seeds.empty()) throw ConfigError("eval: empty seed list");

  std::vector<ModelParams> models;
  for (const auto& path : args.checkpoints) models.push_back(load_checkpoint_input(path));
  for (const auto& m : models) {
    if (m.encoder.rep_dim() != models.front().encoder.rep_dim())
      throw ConfigError("eval: checkpoints disagree on representation dimension d");
  }

  std::vector<EvalReport> aggregates;
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const Matrix reps = encode_dataset(models[mi], target);
    std::vector<EvalReport> per_seed;
    for (std::uint64_t seed : seeds) {
      EpisodeSpec spec;
      spec.way = args.way;
      spec.shots = args.shots;
      spec.queries = args.queries;
      spec.episodes = args.episodes;
      spec.seed = seed;
      per_seed.push_back(evaluate_cached(reps, target, spec));
    }
    EvalReport agg = per_seed.size() == 1 ? per_seed.front() : aggregate_reports(per_seed);
    std::cout << args.checkpoints[mi] << ": " << agg.summary_line() << "\n";
    aggregates.push_back(std::move(agg));
  }

  std::string report_text;
  if (aggregates.size() == 1) {
    report_text = aggregates.front().to_json() + "\n";
  } else {
    nlohmann::json doc;
    for (std::size_t i = 0; i < aggregates.size(); ++i) {
      doc["reports"].push_back(nlohmann::json::parse(aggregates[i].to_json()));
      doc["reports"].back()["checkpoint"] = args.checkpoints[i];
    }
    if (aggregates.size() == 2) {
      const double diff = aggregates[0].mean - aggregates[1].mean;
      doc["paired_mean_difference"] = diff;
      std::cout << "paired mean difference (episodes shared): "
                << format_fixed(diff * 100.0, 2) << " accuracy points\n";
    }
    report_text = doc.dump(2) + "\n";
  }

  if (!args.out.empty()) {
    write_text(args.out, report_text);
    Manifest manifest("eval");
    manifest.set("C", args.way);
    manifest.set("K", args.shots);
    manifest.set("Q", args.queries);
    manifest.set("episodes", args.episodes);
    manifest.set("seeds", seeds);
    for (const auto& c : args.checkpoints) manifest.add_input(c);
    manifest.add_input(args.target);
    manifest.add_output(args.out);
    manifest.write(args.out + ".manifest.json");
  }
  return 0;
}

int cmd_isotropy(const IsotropyArgs& args) {
  const bool from_file = !args.embeddings.empty();
  const bool from_model = !args.checkpoint.empty() || !args.data.empty();
  if (from_file == from_model)
    throw ConfigError("isotropy: pass either --embeddings or --checkpoint with --data");

  if (from_file) {
    if (args.per_domain)
      throw ConfigError("isotropy: --per-domain needs --checkpoint and --data");
    const EmbeddingMatrix v = read_embeddings_input(args.embeddings);
    std::cout << format_fixed(isotropy(v), 6) << "\n";
    return 0;
  }

  if (args.checkpoint.empty() || args.data.empty())
    throw ConfigError("isotropy: --checkpoint and --data go together");
  const ModelParams params = load_checkpoint_input(args.checkpoint);
  const Dataset data = load_corpus(args.data, args.domains);
  if (data.size() < 2) throw ConfigError("isotropy: corpus too small");

  Matrix reps = encode_dataset(params, data);
  std::vector<int> kept(data.size());
  std::iota(kept.begin(), kept.end(), 0);
  if (args.subsample > 0 && static_cast<std::size_t>(args.subsample) < data.size()) {
    Rng rng(args.seed);
    rng.shuffle(kept);
    kept.resize(static_cast<std::size_t>(args.subsample));
    std::sort(kept.begin(), kept.end());
    Matrix sub(kept.size(), reps.cols());
    for (std::size_t i = 0; i < kept.size(); ++i)
      std::copy_n(reps.data() + static_cast<std::size_t>(kept[i]) * reps.cols(),
                  reps.cols(), sub.data() + i * reps.cols());
    reps = std::move(sub);
  }

  if (!args.dump_embeddings.empty())
    write_embeddings(args.dump_embeddings, EmbeddingMatrix(reps));
  std::cout << format_fixed(isotropy(EmbeddingMatrix(reps)), 6) << "\n";
  if (args.per_domain) {
    for (int dom = 0; dom < data.num_domains(); ++dom) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < kept.size(); ++i)
        if (data.utterances[static_cast<std::size_t>(kept[i])].domain == dom)
          rows.push_back(i);
      if (rows.size() < 2) continue;
      Matrix sub(rows.size(), reps.cols());
      for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(reps.data() + rows[i] * reps.cols(), reps.cols(),
                    sub.data() + i * reps.cols());
      std::cout << data.domain_names[static_cast<std::size_t>(dom)] << " "
                << format_fixed(isotropy(EmbeddingMatrix(sub)), 6) << "\n";
    }
  }
  return 0;
}

int cmd_whiten(const WhitenArgs& args) {
  const EmbeddingMatrix input = read_embeddings_input(args.embeddings);
  const EmbeddingMatrix fit_data =
      args.fit_on.empty() ? input : read_embeddings_input(args.fit_on);

  const WhiteningMap map = fit_whitening(fit_data);
  const EmbeddingMatrix out = apply_whitening(map, input);

  const double before = isotropy(input);
  const double after = isotropy(out);

  write_embeddings(args.out, out);
  write_text(args.out + ".isotropy.json", "{\"before\":" + format_double(before) +
                                              ",\"after\":" + format_double(after) + "}\n");
  if (!args.map_out.empty()) {
    // map dump: dimension, mean vector, then the d x d transform
    std::string text = std::to_string(map.mean.size()) + "\n";
    for (std::size_t j = 0; j < map.mean.size(); ++j) {
      if (j) text += ' ';
      text += format_double(map.mean[j]);
    }
    text += '\n';
    for (std::size_t i = 0; i < map.transform.rows(); ++i) {
      for (std::size_t j = 0; j < map.transform.cols(); ++j) {
        if (j) text += ' ';
        text += format_double(map.transform(i, j));
      }
      text += '\n';
    }
    write_text(args.map_out, text);
  }

  Manifest manifest("whiten");
  manifest.add_input(args.embeddings);
  if (!args.fit_on.empty()) manifest.add_input(args.fit_on);
  manifest.set("isotropy_before", before);
  manifest.set("isotropy_after", after);
  manifest.add_output(args.out);
  manifest.write(args.out + ".manifest.json");

  std::cout << "before " << format_fixed(before, 6) << "\nafter " << format_fixed(after, 6)
            << "\n";
  return 0;
}

int cmd_sweep(const SweepArgs& args) {
  TrainConfig base = load_train_config(args.config);
  const Dataset corpus = load_corpus(args.data, "");
  const SplitSpec split = load_split_spec(args.split);
  auto [source, val] = split_by_domain(corpus, split);

  const std::vector<std::string> target_domains = !args.target_domains.empty()
                                                      ? split_list(args.target_domains)
                                                      : split.excluded_domains;
  if (target_domains.empty())
    throw ConfigError("sweep: no target domains (give --target-domains or exclude some)");
  const Dataset target = subset_by_domains(corpus, target_domains);

  const auto values = parse_double_list(args.values);
  if (values.empty()) throw ConfigError("sweep: --values is empty");
  const auto seeds = parse_seed_list(args.seeds);
  if (seeds.empty()) throw ConfigError("sweep: empty seed list");

  ensure_directory(args.out);

  // Fixed-length training: early stopping off so runs are comparable
  // across values; training and episode seeds are shared for paired curves.
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<double, double>> curve;  // (isotropy, accuracy)
  for (const double value : values) {
    std::vector<double> accs;
    double iso_mean = 0.0;
    for (const std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg.eval_every = cfg.max_steps;
      cfg.patience_steps = cfg.max_steps;
      if (args.param == "lambda") {
        cfg.objective.lambda = value;
        if (!cfg.objective.use_cl && !cfg.objective.use_cor) cfg.objective.use_cor = true;
        if (value == 0.0) {
          cfg.objective.use_cl = false;
          cfg.objective.use_cor = false;
        }
      } else if (args.param == "lambda1") {
        cfg.objective.lambda1 = value;
      } else if (args.param == "lambda2") {
        cfg.objective.lambda2 = value;
      } else if (args.param == "tau") {
        cfg.objective.tau = value;
      } else if (args.param == "l2_weight") {
        cfg.objective.l2_weight = value;
      } else {
        throw ConfigError("sweep: unsupported --param " + args.param);
      }

      const TrainResult result = train(source, val, cfg);
      const Matrix reps = encode_dataset(result.params, target);
      iso_mean += isotropy(EmbeddingMatrix(reps)) / static_cast<double>(seeds.size());
      EpisodeSpec spec;
      spec.episodes = args.episodes;
      spec.seed = args.episode_seed;
      accs.push_back(evaluate_cached(reps, target, spec).mean);
    }
    const double acc_mean =
        std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
    double acc_std = 0.0;
    if (accs.size() > 1) {
      for (double a : accs) acc_std += (a - acc_mean) * (a - acc_mean);
      acc_std = std::sqrt(acc_std / static_cast<double>(accs.size() - 1));
    }
    rows.push_back({format_double(value), format_double(iso_mean), format_double(acc_mean),
                    format_double(acc_std)});
    curve.emplace_back(iso_mean, acc_mean);
    std::cout << args.param << "=" << format_double(value) << " isotropy "
              << format_fixed(iso_mean, 4) << " acc " << format_fixed(acc_mean * 100.0, 2)
              << "% ± " << format_fixed(acc_std * 100.0, 2) << "\n";
  }

  write_csv(join_path(args.out, "sweep.csv"),
            {args.param, "isotropy", "mean_accuracy", "std"}, rows);
  svg_line_plot(join_path(args.out, "sweep.svg"), "accuracy vs isotropy (" + args.param + " sweep)",
                "isotropy I(V)", "mean accuracy", {{args.param, curve}});

  Manifest manifest("sweep");
  manifest.set("config", train_config_to_json(base));
  manifest.set("param", args.param);
  manifest.set("values", values);
  manifest.set("seeds", seeds);
  manifest.set("episodes", args.episodes);
  manifest.set("episode_seed", args.episode_seed);
  manifest.set("target_domains", target_domains);
  manifest.add_input(args.config);
  manifest.add_input(args.data);
  manifest.add_input(args.split);
  manifest.add_output("sweep.csv");
  manifest.add_output("sweep.svg");
  manifest.write(join_path(args.out, "manifest.json"));
  return 0;
}

int cmd_report(const ReportArgs& args) {
  const ModelParams params = load_checkpoint_input(args.checkpoint);
  const Dataset data = load_corpus(args.data, args.domains);
  if (data.size() < 2) throw ConfigError("report: corpus too small");

  const Matrix reps = encode_dataset(params, data);
  const EmbeddingMatrix em(reps);
  const Matrix cov = covariance(em);
  const Matrix cor = correlation(em);

  ensure_directory(args.out);
  write_matrix_csv(join_path(args.out, "covariance.csv"), cov);
  write_matrix_csv(join_path(args.out, "correlation.csv"), cor);
  svg_heatmap(join_path(args.out, "covariance.svg"), "feature covariance", cov);
  svg_heatmap(join_path(args.out, "correlation.svg"), "feature correlation", cor);

  nlohmann::json summary;
  summary["isotropy"]["overall"] = isotropy(em);
  for (int dom = 0; dom < data.num_domains(); ++dom) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.utterances[i].domain == dom) rows.push_back(i);
    if (rows.size() < 2) continue;
    Matrix sub(rows.size(), reps.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy_n(reps.data() + rows[i] * reps.cols(), reps.cols(),
                  sub.data() + i * reps.cols());
    summary["isotropy"]["per_domain"][data.domain_names[static_cast<std::size_t>(dom)]] =
        isotropy(EmbeddingMatrix(sub));
  }

  double offdiag = 0.0;
  const std::size_t d = cor.rows();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i != j) offdiag += std::abs(cor(i, j));
  summary["mean_abs_offdiagonal_correlation"] =
      d > 1 ? offdiag / static_cast<double>(d * (d - 1)) : 0.0;

  // Timing table from the train log, when one is available.
  std::string trainlog = args.trainlog;
  if (trainlog.empty()) {
    const fs::path guess = fs::path(args.checkpoint).parent_path() / "trainlog.jsonl";
    if (fs::exists(guess)) trainlog = guess.string();
  }
  if (!trainlog.empty() && fs::exists(trainlog)) {
    double t_ce = 0.0, t_cl = 0.0, t_cor = 0.0;
    std::size_t steps = 0;
    std::ifstream in(trainlog, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto doc = nlohmann::json::parse(line, nullptr, false);
      if (doc.is_discarded() || !doc.contains("t_ce")) continue;
      t_ce += doc["t_ce"].get<double>();
      t_cl += doc.value("t_cl", 0.0);
      t_cor += doc.value("t_cor", 0.0);
      ++steps;
    }
    summary["timing"] = {{"steps", steps},
                         {"total_seconds", {{"ce", t_ce}, {"cl", t_cl}, {"cor", t_cor}}}};
  } else {
    summary["timing"] = "unavailable";
  }

  write_text(join_path(args.out, "summary.json"), summary.dump(2) + "\n");

  Manifest manifest("report");
  manifest.add_input(args.checkpoint);
  manifest.add_input(args.data);
  manifest.add_output("covariance.csv");
  manifest.add_output("covariance.svg");
  manifest.add_output("correlation.csv");
  manifest.add_output("correlation.svg");
  manifest.add_output("summary.json");
  manifest.write(join_path(args.out, "manifest.json"));

  std::cout << "isotropy " << format_fixed(summary["isotropy"]["overall"].get<double>(), 6)
            << ", report written to " << args.out << "\n";
  return 0;
}

int cmd_synth(const SynthArgs& args) {
  SynthConfig cfg;
  if (!args.config.empty()) cfg = load_synth_config(args.config);
  if (args.seed) cfg.seed = *args.seed;

  const Dataset data = generate_synthetic(cfg);
  save_jsonl(data, args.out);

  Manifest manifest("synth");
  manifest.set("config", synth_config_to_json(cfg));
  manifest.set("seed", cfg.seed);
  if (!args.config.empty()) manifest.add_input(args.config);
  manifest.add_output(args.out);
  manifest.write(args.out + ".manifest.json");

  std::cout << "wrote " << data.size() << " utterances, " << data.num_labels()
            << " intents, " << data.num_domains() << " domains to " << args.out << "\n";
  return 0;
}

}  // namespace isolab::cli
