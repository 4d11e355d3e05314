#include "isolab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "isolab/errors.hpp"
#include "isolab/rng.hpp"

namespace isolab {

std::vector<std::vector<int>> Dataset::indices_by_label() const {
  std::vector<std::vector<int>> out(label_names.size());
  for (std::size_t i = 0; i < utterances.size(); ++i)
    out[static_cast<std::size_t>(utterances[i].label)].push_back(static_cast<int>(i));
  return out;
}

void SplitSpec::validate() const {
  const std::vector<const std::vector<std::string>*> lists = {
      &train_domains, &validation_domains, &excluded_domains};
  std::set<std::string> seen;
  for (const auto* list : lists) {
    for (const auto& name : *list) {
      if (!seen.insert(name).second)
        throw ConfigError("split: domain \"" + name + "\" appears in two lists");
    }
  }
}

Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus: " + path);

  Dataset data;
  std::map<std::string, int> domain_ids;
  std::map<std::pair<int, std::string>, int> label_ids;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ": line " + std::to_string(lineno) + ": malformed JSON: " +
                    e.what());
    }
    for (const char* field : {"text", "label", "domain"}) {
      if (!obj.contains(field) || !obj[field].is_string())
        throw IoError(path + ": line " + std::to_string(lineno) +
                      ": missing or non-string field \"" + field + "\"");
    }

    const std::string domain = obj["domain"].get<std::string>();
    auto [dit, dnew] = domain_ids.try_emplace(domain, data.num_domains());
    if (dnew) data.domain_names.push_back(domain);
    const int domain_id = dit->second;

    const std::string label = obj["label"].get<std::string>();
    auto [lit, lnew] = label_ids.try_emplace({domain_id, label}, data.num_labels());
    if (lnew) data.label_names.push_back(label);

    data.utterances.push_back({obj["text"].get<std::string>(), lit->second, domain_id});
  }
  return data;
}

void save_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write corpus: " + path);
  for (const auto& u : data.utterances) {
    nlohmann::json obj;
    obj["text"] = u.text;
    obj["label"] = data.label_names[static_cast<std::size_t>(u.label)];
    obj["domain"] = data.domain_names[static_cast<std::size_t>(u.domain)];
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("corpus write failed: " + path);
}

namespace {

Dataset restrict_to(const Dataset& data, const std::set<int>& domain_ids) {
  Dataset out;
  std::map<int, int> domain_remap;
  std::map<int, int> label_remap;
  for (const auto& u : data.utterances) {
    if (!domain_ids.count(u.domain)) continue;
    auto [dit, dnew] = domain_remap.try_emplace(u.domain, out.num_domains());
    if (dnew)
      out.domain_names.push_back(data.domain_names[static_cast<std::size_t>(u.domain)]);
    auto [lit, lnew] = label_remap.try_emplace(u.label, out.num_labels());
    if (lnew)
      out.label_names.push_back(data.label_names[static_cast<std::size_t>(u.label)]);
    out.utterances.push_back({u.text, lit->second, dit->second});
  }
  return out;
}

std::set<int> resolve_domains(const Dataset& data, const std::vector<std::string>& names) {
  std::set<int> ids;
  for (const auto& name : names) {
    const auto it =
        std::find(data.domain_names.begin(), data.domain_names.end(), name);
    if (it == data.domain_names.end())
      throw ConfigError("split: domain \"" + name + "\" not present in corpus");
    ids.insert(static_cast<int>(it - data.domain_names.begin()));
  }
  return ids;
}

}  // namespace

std::pair<Dataset, Dataset> split_by_domain(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  const auto train_ids = resolve_domains(data, spec.train_domains);
  const auto val_ids = resolve_domains(data, spec.validation_domains);
  resolve_domains(data, spec.excluded_domains);  // existence check only
  return {restrict_to(data, train_ids), restrict_to(data, val_ids)};
}

Dataset subset_by_domains(const Dataset& data, const std::vector<std::string>& domains) {
  return restrict_to(data, resolve_domains(data, domains));
}

void SynthConfig::validate() const {
  if (domains < 1 || intents_per_domain < 1 || utterances_per_intent < 1)
    throw ConfigError("synth: counts must be positive");
  if (signature_tokens_per_intent < 1)
    throw ConfigError("synth: need at least one signature token per intent");
  if (noise_vocab_size < 1) throw ConfigError("synth: noise vocabulary must be non-empty");
  if (signature_prob < 0.0 || signature_prob > 1.0)
    throw ConfigError("synth: signature_prob must be in [0, 1]");
  if (min_utterance_len < 1 || max_utterance_len < min_utterance_len)
    throw ConfigError("synth: bad utterance length range");
  if (zipf_exponent <= 0.0) throw ConfigError("synth: zipf_exponent must be positive");
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  const int n_intents = cfg.domains * cfg.intents_per_domain;
  const int sig_pool = n_intents * cfg.signature_tokens_per_intent;

  // Shuffled signature pool: which tokens belong to which intent depends on
  // the seed, while sets stay disjoint across intents. Noise ids follow the
  // pool so the vocabularies never collide.
  std::vector<int> pool(static_cast<std::size_t>(sig_pool));
  for (int i = 0; i < sig_pool; ++i) pool[static_cast<std::size_t>(i)] = i;
  rng.shuffle(pool);

  // Zipf CDF over the noise vocabulary, rank frequencies 1/r^s.
  std::vector<double> zipf_cdf(static_cast<std::size_t>(cfg.noise_vocab_size));
  double z = 0.0;
  for (int r = 1; r <= cfg.noise_vocab_size; ++r) {
    z += 1.0 / std::pow(static_cast<double>(r), cfg.zipf_exponent);
    zipf_cdf[static_cast<std::size_t>(r - 1)] = z;
  }
  for (double& c : zipf_cdf) c /= z;

  Dataset data;
  for (int dom = 0; dom < cfg.domains; ++dom)
    data.domain_names.push_back("d" + std::to_string(dom));

  for (int dom = 0; dom < cfg.domains; ++dom) {
    for (int intent = 0; intent < cfg.intents_per_domain; ++intent) {
      const int global_intent = dom * cfg.intents_per_domain + intent;
      data.label_names.push_back("d" + std::to_string(dom) + "_i" +
                                 std::to_string(intent));
      const int* sig = pool.data() +
                       static_cast<std::size_t>(global_intent) *
                           static_cast<std::size_t>(cfg.signature_tokens_per_intent);

      for (int u = 0; u < cfg.utterances_per_intent; ++u) {
        const int len =
            cfg.min_utterance_len +
            static_cast<int>(rng.below(static_cast<std::uint64_t>(
                cfg.max_utterance_len - cfg.min_utterance_len + 1)));
        std::string text;
        for (int k = 0; k < len; ++k) {
          int token_id;
          if (rng.uniform() < cfg.signature_prob) {
            token_id = sig[rng.below(
                static_cast<std::uint64_t>(cfg.signature_tokens_per_intent))];
          } else {
            const double r = rng.uniform();
            const auto it = std::lower_bound(zipf_cdf.begin(), zipf_cdf.end(), r);
            token_id = sig_pool + static_cast<int>(it - zipf_cdf.begin());
          }
          if (k) text += ' ';
          text += 't' + std::to_string(token_id);
        }
        data.utterances.push_back({std::move(text), global_intent, dom});
      }
    }
  }
  return data;
}

}  // namespace isolab
