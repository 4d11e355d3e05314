#include "isolab/fewshot.hpp"

#include <algorithm>
#include <cmath>

#include "isolab/errors.hpp"
#include "isolab/textio.hpp"

namespace isolab {

Episode sample_episode(const Dataset& data, const EpisodeSpec& spec, Rng& rng) {
  if (spec.way < 2) throw ContractViolation("sample_episode: need way >= 2");
  const auto by_label = data.indices_by_label();

  std::vector<int> eligible;
  for (std::size_t label = 0; label < by_label.size(); ++label) {
    if (static_cast<int>(by_label[label].size()) >= spec.shots + spec.queries)
      eligible.push_back(static_cast<int>(label));
  }
  if (static_cast<int>(eligible.size()) < spec.way)
    throw DegenerateInput("sample_episode: only " + std::to_string(eligible.size()) +
                          " eligible classes for a " + std::to_string(spec.way) +
                          "-way episode");

  // Partial Fisher-Yates: the first `way` entries are a uniform draw
  // without replacement.
  for (int i = 0; i < spec.way; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(rng.below(eligible.size() - static_cast<std::size_t>(i)));
    std::swap(eligible[static_cast<std::size_t>(i)], eligible[j]);
  }

  Episode ep;
  for (int c = 0; c < spec.way; ++c) {
    const int label = eligible[static_cast<std::size_t>(c)];
    ep.class_ids.push_back(label);
    std::vector<int> pool = by_label[static_cast<std::size_t>(label)];
    const int need = spec.shots + spec.queries;
    for (int i = 0; i < need; ++i) {
      const std::size_t j =
          static_cast<std::size_t>(i) +
          static_cast<std::size_t>(rng.below(pool.size() - static_cast<std::size_t>(i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    ep.support.emplace_back(pool.begin(), pool.begin() + spec.shots);
    ep.query.emplace_back(pool.begin() + spec.shots, pool.begin() + need);
  }
  return ep;
}

namespace {

// Objective value and gradient of mean-CE + (l2/2)||W||^2 at (W, b).
double probe_objective(const Matrix& x, const std::vector<int>& y, int C,
                       const std::vector<double>& wb, double l2,
                       std::vector<double>* grad) {
  const std::size_t n = x.rows(), d = x.cols();
  const std::size_t cs = static_cast<std::size_t>(C);
  const double* w = wb.data();           // C x d, row-major
  const double* b = wb.data() + cs * d;  // C

  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  double loss = 0.0;
  std::vector<double> logits(cs);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data() + i * d;
    for (std::size_t c = 0; c < cs; ++c) {
      double acc = b[c];
      const double* wc = w + c * d;
      for (std::size_t j = 0; j < d; ++j) acc += wc[j] * xi[j];
      logits[c] = acc;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v - mx);
    const double lse = mx + std::log(denom);
    loss += lse - logits[static_cast<std::size_t>(y[i])];

    if (grad) {
      double* gw = grad->data();
      double* gb = grad->data() + cs * d;
      for (std::size_t c = 0; c < cs; ++c) {
        const double p = std::exp(logits[c] - lse) -
                         (c == static_cast<std::size_t>(y[i]) ? 1.0 : 0.0);
        gb[c] += p;
        double* gwc = gw + c * d;
        for (std::size_t j = 0; j < d; ++j) gwc[j] += p * xi[j];
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  double reg = 0.0;
  for (std::size_t k = 0; k < cs * d; ++k) reg += w[k] * w[k];
  loss += 0.5 * l2 * reg;
  if (grad) {
    for (double& g : *grad) g *= inv_n;
    for (std::size_t k = 0; k < cs * d; ++k) (*grad)[k] += l2 * wb[k];
  }
  return loss;
}

}  // namespace

LogRegProbe fit_probe(const Matrix& x, const std::vector<int>& labels, int num_classes,
                      double l2_weight, int max_iters, double tol) {
  if (num_classes < 2) throw ContractViolation("fit_probe: need at least 2 classes");
  if (x.rows() != labels.size())
    throw ContractViolation("fit_probe: label count mismatch");
  const std::size_t d = x.cols();
  const std::size_t nw = static_cast<std::size_t>(num_classes) * d;

  std::vector<double> wb(nw + static_cast<std::size_t>(num_classes), 0.0);
  std::vector<double> grad(wb.size(), 0.0);
  std::vector<double> trial(wb.size(), 0.0);

  double fx = probe_objective(x, labels, num_classes, wb, l2_weight, &grad);
  LogRegProbe probe;
  probe.l2_weight = l2_weight;
  probe.max_iters = max_iters;
  probe.tol = tol;

  int iter = 0;
  for (; iter < max_iters; ++iter) {
    double gnorm2 = 0.0;
    for (double g : grad) gnorm2 += g * g;
    if (std::sqrt(gnorm2) <= tol) {
      probe.converged = true;
      break;
    }
    // Backtracking line search along -grad with the Armijo condition; the
    // objective never increases.
    double step = 1.0;
    bool moved = false;
    while (step > 1e-20) {
      for (std::size_t k = 0; k < wb.size(); ++k) trial[k] = wb[k] - step * grad[k];
      const double ft = probe_objective(x, labels, num_classes, trial, l2_weight, nullptr);
      if (ft <= fx - 1e-4 * step * gnorm2) {
        wb.swap(trial);
        fx = ft;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    fx = probe_objective(x, labels, num_classes, wb, l2_weight, &grad);
  }
  probe.iterations = iter;

  probe.W = Matrix(static_cast<std::size_t>(num_classes), d);
  std::copy(wb.begin(), wb.begin() + static_cast<std::ptrdiff_t>(nw),
            probe.W.values().begin());
  probe.b.assign(wb.begin() + static_cast<std::ptrdiff_t>(nw), wb.end());
  return probe;
}

std::vector<double> probe_probabilities(const LogRegProbe& probe, const double* x,
                                        std::size_t d) {
  const std::size_t C = probe.W.rows();
  std::vector<double> logits(C);
  for (std::size_t c = 0; c < C; ++c) {
    double acc = probe.b[c];
    for (std::size_t j = 0; j < d; ++j) acc += probe.W(c, j) * x[j];
    logits[c] = acc;
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double denom = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    denom += v;
  }
  for (double& v : logits) v /= denom;
  return logits;
}

int probe_predict(const LogRegProbe& probe, const double* x, std::size_t d) {
  const auto probs = probe_probabilities(probe, x, d);
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

EvalReport evaluate_cached(const Matrix& reps, const Dataset& target,
                           const EpisodeSpec& spec) {
  if (reps.rows() != target.size())
    throw ContractViolation("evaluate: representation rows do not match dataset");
  const std::size_t d = reps.cols();

  EvalReport report;
  report.way = spec.way;
  report.shots = spec.shots;
  report.queries = spec.queries;
  report.seeds = {spec.seed};

  Rng rng(spec.seed);
  for (int e = 0; e < spec.episodes; ++e) {
    const Episode ep = sample_episode(target, spec, rng);

    Matrix support(static_cast<std::size_t>(spec.way * spec.shots), d);
    std::vector<int> labels;
    std::size_t row = 0;
    for (int c = 0; c < spec.way; ++c) {
      for (int idx : ep.support[static_cast<std::size_t>(c)]) {
        std::copy_n(reps.data() + static_cast<std::size_t>(idx) * d, d,
                    support.data() + row * d);
        labels.push_back(c);
        ++row;
      }
    }

    const LogRegProbe probe = fit_probe(support, labels, spec.way);
    int correct = 0, total = 0;
    for (int c = 0; c < spec.way; ++c) {
      for (int idx : ep.query[static_cast<std::size_t>(c)]) {
        const int pred =
            probe_predict(probe, reps.data() + static_cast<std::size_t>(idx) * d, d);
        correct += (pred == c) ? 1 : 0;
        ++total;
      }
    }
    report.per_episode.push_back(static_cast<double>(correct) /
                                 static_cast<double>(total));
  }

  report.n_episodes = static_cast<int>(report.per_episode.size());
  double sum = 0.0;
  for (double a : report.per_episode) sum += a;
  report.mean = report.n_episodes ? sum / report.n_episodes : 0.0;
  if (report.n_episodes > 1) {
    double ss = 0.0;
    for (double a : report.per_episode) ss += (a - report.mean) * (a - report.mean);
    report.stddev = std::sqrt(ss / (report.n_episodes - 1));
  }
  return report;
}

EvalReport evaluate(const ModelParams& params, const Dataset& target,
                    const EpisodeSpec& spec) {
  const Tokenizer tokenizer(params.tokenizer);
  const std::size_t n = target.size();
  const std::size_t d = params.encoder.rep_dim();
  Matrix reps(n, d);

  // One eval-mode encoding pass over the whole target, chunked; episodes
  // are then pure index sets over the cached rows.
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t stop = std::min(n, start + kChunk);
    std::vector<std::vector<int>> tokens;
    tokens.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i)
      tokens.push_back(tokenizer.tokenize(target.utterances[i].text));
    const Matrix chunk = encode(params, tokens, EncodeMode::kEval);
    std::copy_n(chunk.data(), chunk.size(), reps.data() + start * d);
  }
  return evaluate_cached(reps, target, spec);
}

EvalReport aggregate_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ContractViolation("aggregate_reports: no reports");
  EvalReport out;
  out.way = reports.front().way;
  out.shots = reports.front().shots;
  out.queries = reports.front().queries;

  double sum = 0.0;
  for (const auto& r : reports) {
    out.per_episode.insert(out.per_episode.end(), r.per_episode.begin(),
                           r.per_episode.end());
    for (std::uint64_t s : r.seeds) out.seeds.push_back(s);
    sum += r.mean;
  }
  out.n_episodes = static_cast<int>(out.per_episode.size());
  double total = 0.0;
  for (double a : out.per_episode) total += a;
  out.mean = out.n_episodes ? total / out.n_episodes : 0.0;

  // Spread across runs (model seeds), not across episodes.
  const double group_mean = sum / static_cast<double>(reports.size());
  if (reports.size() > 1) {
    double ss = 0.0;
    for (const auto& r : reports) ss += (r.mean - group_mean) * (r.mean - group_mean);
    out.stddev = std::sqrt(ss / static_cast<double>(reports.size() - 1));
  }
  return out;
}

std::string EvalReport::to_json() const {
  std::string out = "{\"mean\":" + format_double(mean);
  out += ",\"std\":" + format_double(stddev);
  out += ",\"n_episodes\":" + std::to_string(n_episodes);
  out += ",\"C\":" + std::to_string(way);
  out += ",\"K\":" + std::to_string(shots);
  out += ",\"Q\":" + std::to_string(queries);
  out += ",\"seeds\":[";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  out += "],\"per_episode\":[";
  for (std::size_t i = 0; i < per_episode.size(); ++i) {
    if (i) out += ',';
    out += format_double(per_episode[i]);
  }
  out += "]}";
  return out;
}

std::string EvalReport::summary_line() const {
  return "acc = " + format_fixed(mean * 100.0, 2) + "% ± " +
         format_fixed(stddev * 100.0, 2);
}

}  // namespace isolab
