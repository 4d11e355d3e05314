#include "isolab/embedding_io.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "isolab/errors.hpp"
#include "isolab/textio.hpp"

namespace isolab {

namespace {
std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}
}  // namespace

EmbeddingMatrix read_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw IoError(path + ": missing header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_ws(line);
  if (header.size() != 2)
    throw IoError(path + ": header must be \"n d\"");
  const auto n = parse_int(header[0]);
  const auto d = parse_int(header[1]);
  if (!n || !d || *n < 0 || *d <= 0)
    throw IoError(path + ": invalid header values");

  Matrix m(static_cast<std::size_t>(*n), static_cast<std::size_t>(*d));
  for (long long i = 0; i < *n; ++i) {
    if (!std::getline(in, line))
      throw IoError(path + ": truncated at row " + std::to_string(i + 1));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_ws(line);
    if (static_cast<long long>(fields.size()) != *d)
      throw IoError(path + ": row " + std::to_string(i + 1) + " has " +
                    std::to_string(fields.size()) + " values, expected " +
                    std::to_string(*d));
    for (long long j = 0; j < *d; ++j) {
      const auto val = parse_double(fields[static_cast<std::size_t>(j)]);
      if (!val)
        throw IoError(path + ": bad float at row " + std::to_string(i + 1));
      m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = *val;
    }
  }
  return EmbeddingMatrix(std::move(m), false);
}

void write_embeddings(const std::string& path, const EmbeddingMatrix& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding file: " + path);
  out << v.n() << ' ' << v.d() << '\n';
  for (std::size_t i = 0; i < v.n(); ++i) {
    for (std::size_t j = 0; j < v.d(); ++j) {
      if (j) out << ' ';
      out << format_double(v.values(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace isolab
