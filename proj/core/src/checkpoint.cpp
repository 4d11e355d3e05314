#include "isolab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "isolab/errors.hpp"

namespace isolab {

namespace {

constexpr char kMagic[8] = {'I', 'S', 'O', 'L', 'A', 'B', '0', '1'};
constexpr int kFormatVersion = 1;

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f64_le(std::string& out, double d) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

using Kind = CheckpointError::Kind;

struct TensorEntry {
  std::string name;
  const Matrix* m;
};

std::vector<TensorEntry> tensor_list(const ModelParams& params) {
  std::vector<TensorEntry> out;
  auto& p = const_cast<ModelParams&>(params);
  for (const auto& ref : collect_params(p)) out.push_back({ref.name, ref.value});
  if (params.encoder.batchnorm) {
    out.push_back({"bn.running_mean", &params.encoder.batchnorm->running_mean});
    out.push_back({"bn.running_var", &params.encoder.batchnorm->running_var});
  }
  return out;
}

}  // namespace

void checkpoint_save(const ModelParams& params, const std::string& path) {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["tokenizer"] = {{"vocab_size", params.tokenizer.vocab_size},
                         {"lowercase", params.tokenizer.lowercase}};
  header["encoder"] = {{"dropout_rate", params.encoder.dropout_rate},
                       {"num_layers", params.encoder.layers.size()},
                       {"batchnorm", params.encoder.batchnorm.has_value()}};
  if (params.encoder.batchnorm) {
    header["encoder"]["bn_momentum"] = params.encoder.batchnorm->momentum;
    header["encoder"]["bn_eps"] = params.encoder.batchnorm->eps;
  }
  nlohmann::json tensors = nlohmann::json::array();
  const auto list = tensor_list(params);
  for (const auto& t : list) {
    tensors.push_back({{"name", t.name}, {"rows", t.m->rows()}, {"cols", t.m->cols()}});
  }
  header["tensors"] = std::move(tensors);

  std::string blob;
  blob.append(kMagic, sizeof(kMagic));
  const std::string header_str = header.dump();
  put_u32_le(blob, static_cast<std::uint32_t>(header_str.size()));
  blob += header_str;
  for (const auto& t : list)
    for (double v : t.m->values()) put_f64_le(blob, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("checkpoint write failed: " + path);
}

ModelParams checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + 4)
    throw CheckpointError(Kind::Truncated, path + ": file shorter than checkpoint preamble");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(Kind::BadMagic, path + ": not an ISOLAB01 checkpoint");

  std::uint32_t header_len = 0;
  for (int i = 0; i < 4; ++i)
    header_len |= static_cast<std::uint32_t>(bytes[sizeof(kMagic) + i]) << (8 * i);
  const std::size_t header_off = sizeof(kMagic) + 4;
  if (bytes.size() < header_off + header_len)
    throw CheckpointError(Kind::Truncated, path + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_off),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(header_off + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::Corrupt, path + ": unparsable header: " + e.what());
  }

  try {
    if (header.at("format_version").get<int>() != kFormatVersion)
      throw CheckpointError(Kind::BadVersion,
                            path + ": unsupported format version " +
                                header["format_version"].dump());

    ModelParams params;
    params.tokenizer.vocab_size = header.at("tokenizer").at("vocab_size").get<int>();
    params.tokenizer.lowercase = header.at("tokenizer").at("lowercase").get<bool>();
    params.encoder.dropout_rate = header.at("encoder").at("dropout_rate").get<double>();
    const auto num_layers = header.at("encoder").at("num_layers").get<std::size_t>();
    const bool has_bn = header.at("encoder").at("batchnorm").get<bool>();

    std::size_t expected_payload = 0;
    struct Decl {
      std::string name;
      std::size_t rows, cols;
    };
    std::vector<Decl> decls;
    for (const auto& t : header.at("tensors")) {
      decls.push_back({t.at("name").get<std::string>(), t.at("rows").get<std::size_t>(),
                       t.at("cols").get<std::size_t>()});
      expected_payload += decls.back().rows * decls.back().cols * 8;
    }

    const std::size_t payload_off = header_off + header_len;
    const std::size_t payload_len = bytes.size() - payload_off;
    if (payload_len < expected_payload)
      throw CheckpointError(Kind::Truncated, path + ": payload shorter than tensor list");
    if (payload_len > expected_payload)
      throw CheckpointError(Kind::Corrupt,
                            path + ": payload length does not match tensor shapes");

    params.encoder.layers.resize(num_layers);
    if (has_bn) params.encoder.batchnorm.emplace();
    if (has_bn) {
      params.encoder.batchnorm->momentum =
          header.at("encoder").at("bn_momentum").get<double>();
      params.encoder.batchnorm->eps = header.at("encoder").at("bn_eps").get<double>();
    }

    const unsigned char* p = bytes.data() + payload_off;
    for (const auto& decl : decls) {
      Matrix m(decl.rows, decl.cols);
      for (std::size_t i = 0; i < m.size(); ++i, p += 8) m.data()[i] = get_f64_le(p);

      if (decl.name == "embedding_table") {
        params.encoder.embedding_table = std::move(m);
      } else if (decl.name.rfind("layer", 0) == 0) {
        const auto dot = decl.name.find('.');
        const std::size_t idx = static_cast<std::size_t>(
            std::stoul(decl.name.substr(5, dot - 5)));
        if (idx >= num_layers)
          throw CheckpointError(Kind::Corrupt, path + ": layer index out of range");
        if (decl.name.substr(dot + 1) == "weight")
          params.encoder.layers[idx].first = std::move(m);
        else
          params.encoder.layers[idx].second = std::move(m);
      } else if (decl.name == "bn.gamma" && has_bn) {
        params.encoder.batchnorm->gamma = std::move(m);
      } else if (decl.name == "bn.beta" && has_bn) {
        params.encoder.batchnorm->beta = std::move(m);
      } else if (decl.name == "bn.running_mean" && has_bn) {
        params.encoder.batchnorm->running_mean = std::move(m);
      } else if (decl.name == "bn.running_var" && has_bn) {
        params.encoder.batchnorm->running_var = std::move(m);
      } else if (decl.name == "head.weight") {
        params.head.W = std::move(m);
      } else if (decl.name == "head.bias") {
        params.head.b = std::move(m);
      } else {
        throw CheckpointError(Kind::Corrupt, path + ": unknown tensor " + decl.name);
      }
    }

    // Shape chain sanity: every layer must have been filled consistently.
    if (params.encoder.embedding_table.empty())
      throw CheckpointError(Kind::Corrupt, path + ": missing embedding table");
    std::size_t prev = params.encoder.embed_dim();
    for (const auto& [w, b] : params.encoder.layers) {
      if (w.rows() != prev || b.rows() != 1 || b.cols() != w.cols())
        throw CheckpointError(Kind::Corrupt, path + ": layer shapes do not chain");
      prev = w.cols();
    }
    if (params.head.W.empty() || params.head.W.cols() != prev)
      throw CheckpointError(Kind::Corrupt, path + ": head shape does not match encoder");
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::Corrupt, path + ": malformed header field: " + e.what());
  }
}

}  // namespace isolab
