#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isolab/dataset.hpp"
#include "isolab/matrix.hpp"
#include "isolab/model.hpp"
#include "isolab/rng.hpp"

namespace isolab {

// C-way K-shot episodic protocol: sample C classes, K support and Q query
// examples per class, fit a probe on the support set, score the queries.
struct EpisodeSpec {
  int way = 5;       // C
  int shots = 2;     // K
  int queries = 5;   // Q
  int episodes = 500;
  std::uint64_t seed = 1;
};

struct Episode {
  std::vector<int> class_ids;                // C dataset label ids
  std::vector<std::vector<int>> support;     // C x K utterance indices
  std::vector<std::vector<int>> query;       // C x Q utterance indices
};

// Classes are drawn without replacement from the labels having at least
// K+Q examples; examples without replacement within each class. Throws
// DegenerateInput when fewer than C classes are eligible.
Episode sample_episode(const Dataset& data, const EpisodeSpec& spec, Rng& rng);

// Multinomial logistic regression fitted by full-batch gradient descent
// with backtracking line search, zero initialization, objective
// mean-CE + (l2_weight/2)*||W||^2. Deterministic; the L2 term makes the
// optimum unique.
struct LogRegProbe {
  Matrix W;               // C x d
  std::vector<double> b;  // C
  double l2_weight = 1.0;
  int max_iters = 500;
  double tol = 1e-6;
  bool converged = false;
  int iterations = 0;
};

LogRegProbe fit_probe(const Matrix& x, const std::vector<int>& labels, int num_classes,
                      double l2_weight = 1.0, int max_iters = 500, double tol = 1e-6);

std::vector<double> probe_probabilities(const LogRegProbe& probe, const double* x,
                                        std::size_t d);
int probe_predict(const LogRegProbe& probe, const double* x, std::size_t d);

struct EvalReport {
  double mean = 0.0;
  double stddev = 0.0;
  int n_episodes = 0;
  int way = 0, shots = 0, queries = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_episode;

  // {"mean":..,"std":..,"n_episodes":..,"C":..,"K":..,"Q":..,
  //  "seeds":[..],"per_episode":[..]}
  std::string to_json() const;
  // "acc = 78.83% ± 1.25"
  std::string summary_line() const;
};

// Encodes the target once in eval mode (the encoder is never modified),
// then runs spec.episodes episodes on the cached representations. stddev is
// the sample standard deviation over per-episode accuracies.
EvalReport evaluate(const ModelParams& params, const Dataset& target,
                    const EpisodeSpec& spec);

// Same protocol on representations the caller already encoded; rows of
// `reps` align with target.utterances.
EvalReport evaluate_cached(const Matrix& reps, const Dataset& target,
                           const EpisodeSpec& spec);

// Combines per-model reports (typically one per training seed) into a
// paired summary: mean over all episodes, stddev across the input means.
EvalReport aggregate_reports(const std::vector<EvalReport>& reports);

}  // namespace isolab
