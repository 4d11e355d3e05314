#pragma once

#include <string>

#include "isolab/model.hpp"

namespace isolab {

// Checkpoint binary format:
//   bytes 0..7   magic "ISOLAB01"
//   bytes 8..11  uint32 little-endian header length
//   header       UTF-8 JSON: format version, tokenizer config, encoder
//                hyperparameters, and the ordered tensor list (name, rows,
//                cols)
//   payload      the tensors' entries as little-endian 64-bit floats, in
//                header order
//
// The tokenizer config travels inside the header so evaluation can never
// drift from training. Save/load round-trips are bit-exact.
void checkpoint_save(const ModelParams& params, const std::string& path);
ModelParams checkpoint_load(const std::string& path);

}  // namespace isolab
