#pragma once

#include <string>

#include "isolab/geometry.hpp"

namespace isolab {

// Plain-text embedding format: first line "n d", then n lines of d decimal
// floats separated by single spaces, UTF-8 with LF line endings. Values are
// written with shortest round-trip formatting, so write/read is exact.
EmbeddingMatrix read_embeddings(const std::string& path);
void write_embeddings(const std::string& path, const EmbeddingMatrix& v);

}  // namespace isolab
