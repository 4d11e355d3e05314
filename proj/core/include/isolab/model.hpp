#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "isolab/matrix.hpp"
#include "isolab/rng.hpp"
#include "isolab/tape.hpp"

namespace isolab {

// Hashing tokenizer: whitespace split, optional lowercasing, then FNV-1a 64
// of the token bytes mapped into [1, vocab_size). Id 0 is reserved for the
// UNK token that stands in for empty utterances. Same string, same id,
// everywhere.
struct TokenizerConfig {
  int vocab_size = 4096;
  bool lowercase = true;
};

class Tokenizer {
 public:
  static constexpr int kUnkId = 0;

  explicit Tokenizer(TokenizerConfig cfg = {});

  // Never returns an empty sequence; an utterance with no tokens maps to
  // {kUnkId}.
  std::vector<int> tokenize(std::string_view text) const;
  int token_id(std::string_view token) const;
  const TokenizerConfig& config() const { return cfg_; }

 private:
  TokenizerConfig cfg_;
};

struct BatchNormParams {
  Matrix gamma;         // 1 x d, trainable scale
  Matrix beta;          // 1 x d, trainable shift
  Matrix running_mean;  // 1 x d
  Matrix running_var;   // 1 x d, entries stay > 0
  double momentum = 0.1;
  double eps = 1e-5;
};

// The trainable encoder standing in for the PLM: embedding table, mean
// pooling, MLP with tanh hidden activations and inverted dropout, optional
// batch normalization on the final representation.
struct EncoderParams {
  Matrix embedding_table;                          // vocab_size x d_emb
  std::vector<std::pair<Matrix, Matrix>> layers;   // (W: in x out, b: 1 x out)
  double dropout_rate = 0.1;
  std::optional<BatchNormParams> batchnorm;

  std::size_t embed_dim() const { return embedding_table.cols(); }
  std::size_t rep_dim() const { return layers.back().first.cols(); }
};

// Linear classification head: p(y|h) = softmax(W h + b).
struct HeadParams {
  Matrix W;  // L x d
  Matrix b;  // 1 x L
  std::size_t num_classes() const { return W.rows(); }
};

// theta = {encoder phi, head W, b}; nothing else is trainable.
struct ModelParams {
  TokenizerConfig tokenizer;
  EncoderParams encoder;
  HeadParams head;
};

struct EncoderConfig {
  int vocab_size = 4096;
  int d_emb = 64;
  int d_h = 128;
  int d = 32;
  double dropout_rate = 0.1;
  // Std-dev of the embedding-table initialization. Small tables start the
  // representation space near-isotropic (partition-function exponents stay
  // small) and leave feature geometry to be shaped by training.
  double embedding_init_scale = 0.5;
  bool batchnorm = false;
  bool lowercase = true;
};

// Deterministic initialization from the rng stream: embedding table standard
// normal, MLP and head weights Glorot-normal, biases zero.
ModelParams init_model(const EncoderConfig& cfg, int num_classes, Rng& rng);

enum class EncodeMode { kTrain, kEval };

struct EncoderVars {
  Var table;
  std::vector<std::pair<Var, Var>> layers;
  Var bn_gamma;
  Var bn_beta;
  bool has_bn = false;
};
struct HeadVars {
  Var W;
  Var b;
};
struct ModelVars {
  EncoderVars encoder;
  HeadVars head;
};

// Copies all trainable parameters onto the tape as leaves, in the canonical
// parameter order (see collect_params).
ModelVars bind_params(Tape& tape, const ModelParams& params);

// The bound vars in collect_params order, for gradient extraction.
std::vector<Var> collect_vars(const ModelVars& vars);

// Batch statistics observed by a train-mode pass with batch norm enabled;
// the caller folds them into the running averages.
struct BatchNormStats {
  Matrix mean;  // 1 x d
  Matrix var;   // 1 x d, biased (1/N)
};

// Records one encoder pass on the tape and returns the representation node
// (N x d). Train mode samples a fresh dropout mask per hidden layer from rng
// (inverted scaling 1/(1-p)) and, with batch norm on, normalizes by batch
// statistics, reporting them through bn_stats. Eval mode is deterministic:
// no dropout, running statistics.
Var encode_graph(Tape& tape, const EncoderVars& vars, const EncoderParams& params,
                 const std::vector<std::vector<int>>& token_batch, EncodeMode mode,
                 Rng* rng, BatchNormStats* bn_stats = nullptr);

// Head logits node: H W^T + b, shape N x L.
Var logits_graph(Tape& tape, const HeadVars& head, Var h);

// Plain (non-recording) encode; same arithmetic as encode_graph.
Matrix encode(const ModelParams& params, const std::vector<std::vector<int>>& token_batch,
              EncodeMode mode, Rng* rng = nullptr, BatchNormStats* bn_stats = nullptr);

// Folds batch statistics into the running averages with the configured
// momentum.
void update_running_stats(BatchNormParams& bn, const BatchNormStats& stats);

// softmax(W h + b), computed with max subtraction; entries sum to 1.
std::vector<double> classify(const HeadParams& head, const std::vector<double>& h);

// Trainable parameters in canonical order. `decay` marks weight matrices
// (embedding table, layer weights, head weight); biases and batch-norm
// scale/shift are exempt from weight decay.
struct ParamRef {
  std::string name;
  Matrix* value;
  bool decay;
};
std::vector<ParamRef> collect_params(ModelParams& params);
std::vector<const Matrix*> collect_param_values(const ModelParams& params);

// Flat view of the trainable parameters, in collect_params order.
std::vector<double> flatten(const ModelParams& params);
void unflatten(ModelParams& params, const std::vector<double>& flat);

}  // namespace isolab
