#include "config_io.hpp"

#include <fstream>
#include <set>

#include "isolab/errors.hpp"
#include "isolab/objectives.hpp"
#include "isolab/textio.hpp"

namespace isolab::cli {

namespace {

nlohmann::json parse_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": malformed JSON: " + e.what());
  }
}

void reject_unknown_keys(const nlohmann::json& doc, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key))
      throw ConfigError(where + ": unknown field \"" + key + "\"");
  }
}

template <typename T>
void read_field(const nlohmann::json& doc, const char* key, T& into,
                const std::string& where) {
  if (!doc.contains(key)) return;
  try {
    into = doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": field \"" + key + "\" has the wrong type");
  }
}

ObjectiveConfig objective_from_json(const nlohmann::json& doc) {
  reject_unknown_keys(doc,
                      {"use_cl", "use_cor", "lambda", "lambda1", "lambda2", "tau",
                       "cov_variant", "l2_weight", "squared_frobenius"},
                      "objective");
  ObjectiveConfig cfg;
  read_field(doc, "use_cl", cfg.use_cl, "objective");
  read_field(doc, "use_cor", cfg.use_cor, "objective");
  read_field(doc, "lambda", cfg.lambda, "objective");
  read_field(doc, "lambda1", cfg.lambda1, "objective");
  read_field(doc, "lambda2", cfg.lambda2, "objective");
  read_field(doc, "tau", cfg.tau, "objective");
  read_field(doc, "l2_weight", cfg.l2_weight, "objective");
  read_field(doc, "squared_frobenius", cfg.squared_frobenius, "objective");
  if (doc.contains("cov_variant"))
    cfg.cov_variant = cov_variant_from_string(doc.at("cov_variant").get<std::string>());
  return cfg;
}

EncoderConfig encoder_from_json(const nlohmann::json& doc) {
  reject_unknown_keys(doc,
                      {"vocab_size", "d_emb", "d_h", "d", "dropout_rate",
                       "embedding_init_scale", "batchnorm", "lowercase"},
                      "encoder");
  EncoderConfig cfg;
  read_field(doc, "vocab_size", cfg.vocab_size, "encoder");
  read_field(doc, "d_emb", cfg.d_emb, "encoder");
  read_field(doc, "d_h", cfg.d_h, "encoder");
  read_field(doc, "d", cfg.d, "encoder");
  read_field(doc, "dropout_rate", cfg.dropout_rate, "encoder");
  read_field(doc, "embedding_init_scale", cfg.embedding_init_scale, "encoder");
  read_field(doc, "batchnorm", cfg.batchnorm, "encoder");
  read_field(doc, "lowercase", cfg.lowercase, "encoder");
  return cfg;
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  reject_unknown_keys(doc,
                      {"preset", "learning_rate", "weight_decay", "batch_size",
                       "max_steps", "patience_steps", "eval_every", "seed",
                       "val_episodes", "val_way", "val_shots", "val_queries",
                       "objective", "encoder"},
                      "train config");
  TrainConfig cfg;
  if (doc.contains("preset")) {
    const std::string preset = doc.at("preset").get<std::string>();
    if (preset == "desk") {
      cfg.learning_rate = 1e-3;
    } else if (preset == "paper") {
      cfg.learning_rate = 2e-5;
    } else {
      throw ConfigError("train config: unknown preset \"" + preset + "\"");
    }
  }
  read_field(doc, "learning_rate", cfg.learning_rate, "train config");
  read_field(doc, "weight_decay", cfg.weight_decay, "train config");
  read_field(doc, "batch_size", cfg.batch_size, "train config");
  read_field(doc, "max_steps", cfg.max_steps, "train config");
  read_field(doc, "patience_steps", cfg.patience_steps, "train config");
  read_field(doc, "eval_every", cfg.eval_every, "train config");
  read_field(doc, "seed", cfg.seed, "train config");
  read_field(doc, "val_episodes", cfg.val_episodes, "train config");
  read_field(doc, "val_way", cfg.val_way, "train config");
  read_field(doc, "val_shots", cfg.val_shots, "train config");
  read_field(doc, "val_queries", cfg.val_queries, "train config");
  if (doc.contains("objective")) cfg.objective = objective_from_json(doc.at("objective"));
  if (doc.contains("encoder")) cfg.encoder = encoder_from_json(doc.at("encoder"));
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  return train_config_from_json(parse_json_file(path));
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json doc;
  doc["learning_rate"] = cfg.learning_rate;
  doc["weight_decay"] = cfg.weight_decay;
  doc["batch_size"] = cfg.batch_size;
  doc["max_steps"] = cfg.max_steps;
  doc["patience_steps"] = cfg.patience_steps;
  doc["eval_every"] = cfg.eval_every;
  doc["seed"] = cfg.seed;
  doc["val_episodes"] = cfg.val_episodes;
  doc["val_way"] = cfg.val_way;
  doc["val_shots"] = cfg.val_shots;
  doc["val_queries"] = cfg.val_queries;
  doc["objective"] = {{"use_cl", cfg.objective.use_cl},
                      {"use_cor", cfg.objective.use_cor},
                      {"lambda", cfg.objective.lambda},
                      {"lambda1", cfg.objective.lambda1},
                      {"lambda2", cfg.objective.lambda2},
                      {"tau", cfg.objective.tau},
                      {"cov_variant", to_string(cfg.objective.cov_variant)},
                      {"l2_weight", cfg.objective.l2_weight},
                      {"squared_frobenius", cfg.objective.squared_frobenius}};
  doc["encoder"] = {{"vocab_size", cfg.encoder.vocab_size},
                    {"d_emb", cfg.encoder.d_emb},
                    {"d_h", cfg.encoder.d_h},
                    {"d", cfg.encoder.d},
                    {"dropout_rate", cfg.encoder.dropout_rate},
                    {"embedding_init_scale", cfg.encoder.embedding_init_scale},
                    {"batchnorm", cfg.encoder.batchnorm},
                    {"lowercase", cfg.encoder.lowercase}};
  return doc;
}

SplitSpec load_split_spec(const std::string& path) {
  const nlohmann::json doc = parse_json_file(path);
  reject_unknown_keys(doc, {"train_domains", "validation_domains", "excluded_domains"},
                      "split spec");
  SplitSpec spec;
  read_field(doc, "train_domains", spec.train_domains, "split spec");
  read_field(doc, "validation_domains", spec.validation_domains, "split spec");
  read_field(doc, "excluded_domains", spec.excluded_domains, "split spec");
  spec.validate();
  return spec;
}

nlohmann::json split_spec_to_json(const SplitSpec& spec) {
  return {{"train_domains", spec.train_domains},
          {"validation_domains", spec.validation_domains},
          {"excluded_domains", spec.excluded_domains}};
}

SynthConfig load_synth_config(const std::string& path) {
  const nlohmann::json doc = parse_json_file(path);
  reject_unknown_keys(doc,
                      {"domains", "intents_per_domain", "utterances_per_intent",
                       "signature_tokens_per_intent", "noise_vocab_size",
                       "signature_prob", "min_utterance_len", "max_utterance_len",
                       "zipf_exponent", "seed"},
                      "synth config");
  SynthConfig cfg;
  read_field(doc, "domains", cfg.domains, "synth config");
  read_field(doc, "intents_per_domain", cfg.intents_per_domain, "synth config");
  read_field(doc, "utterances_per_intent", cfg.utterances_per_intent, "synth config");
  read_field(doc, "signature_tokens_per_intent", cfg.signature_tokens_per_intent,
             "synth config");
  read_field(doc, "noise_vocab_size", cfg.noise_vocab_size, "synth config");
  read_field(doc, "signature_prob", cfg.signature_prob, "synth config");
  read_field(doc, "min_utterance_len", cfg.min_utterance_len, "synth config");
  read_field(doc, "max_utterance_len", cfg.max_utterance_len, "synth config");
  read_field(doc, "zipf_exponent", cfg.zipf_exponent, "synth config");
  read_field(doc, "seed", cfg.seed, "synth config");
  cfg.validate();
  return cfg;
}

nlohmann::json synth_config_to_json(const SynthConfig& cfg) {
  return {{"domains", cfg.domains},
          {"intents_per_domain", cfg.intents_per_domain},
          {"utterances_per_intent", cfg.utterances_per_intent},
          {"signature_tokens_per_intent", cfg.signature_tokens_per_intent},
          {"noise_vocab_size", cfg.noise_vocab_size},
          {"signature_prob", cfg.signature_prob},
          {"min_utterance_len", cfg.min_utterance_len},
          {"max_utterance_len", cfg.max_utterance_len},
          {"zipf_exponent", cfg.zipf_exponent},
          {"seed", cfg.seed}};
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= csv.size()) {
    std::size_t j = csv.find(',', i);
    if (j == std::string::npos) j = csv.size();
    if (j > i) out.push_back(csv.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  for (const auto& item : split_list(csv)) {
    const auto v = parse_double(item);
    if (!v) throw ConfigError("not a number: \"" + item + "\"");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(csv)) {
    const auto v = parse_int(item);
    if (!v || *v < 0) throw ConfigError("not a seed: \"" + item + "\"");
    out.push_back(static_cast<std::uint64_t>(*v));
  }
  return out;
}

}  // namespace isolab::cli
