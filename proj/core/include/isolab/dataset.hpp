#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace isolab {

struct Utterance {
  std::string text;
  int label;
  int domain;
};

// Labeled utterances with domain tags. Label ids are dense in [0, L) and
// are keyed by (domain, label string), so a label id always belongs to a
// single domain's label set.
struct Dataset {
  std::vector<Utterance> utterances;
  std::vector<std::string> label_names;
  std::vector<std::string> domain_names;

  std::size_t size() const { return utterances.size(); }
  int num_labels() const { return static_cast<int>(label_names.size()); }
  int num_domains() const { return static_cast<int>(domain_names.size()); }
  // Utterance indices grouped by label id.
  std::vector<std::vector<int>> indices_by_label() const;
};

// Domain-based split: the three lists must be pairwise disjoint. Domains of
// the corpus that appear in no list are dropped, like excluded ones.
struct SplitSpec {
  std::vector<std::string> train_domains;
  std::vector<std::string> validation_domains;
  std::vector<std::string> excluded_domains;

  void validate() const;  // throws ConfigError on overlap
};

// One JSON object per line: {"text": ..., "label": ..., "domain": ...}.
// Label and domain ids are assigned by first appearance. Malformed lines
// raise IoError naming the line number.
Dataset load_jsonl(const std::string& path);
void save_jsonl(const Dataset& data, const std::string& path);

// Routes utterances into (train, val) by domain; excluded domains are
// dropped and label/domain id spaces are re-densified per split. Throws
// ConfigError when a spec domain does not exist in the data.
std::pair<Dataset, Dataset> split_by_domain(const Dataset& data, const SplitSpec& spec);

// Re-densified restriction of the dataset to the named domains; used to
// carve evaluation targets out of a corpus.
Dataset subset_by_domains(const Dataset& data, const std::vector<std::string>& domains);

// Synthetic intent corpus: each intent owns a disjoint set of signature
// tokens; every token is drawn from that set with probability
// signature_prob, otherwise from a shared Zipf-distributed noise
// vocabulary. Tokens render as "t<id>".
struct SynthConfig {
  int domains = 10;
  int intents_per_domain = 15;
  int utterances_per_intent = 30;
  int signature_tokens_per_intent = 6;
  int noise_vocab_size = 512;
  double signature_prob = 0.6;
  int min_utterance_len = 4;
  int max_utterance_len = 12;
  double zipf_exponent = 1.2;
  std::uint64_t seed = 1;

  void validate() const;
};

Dataset generate_synthetic(const SynthConfig& cfg);

}  // namespace isolab
