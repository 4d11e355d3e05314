#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "isolab/matrix.hpp"

namespace isolab::cli {

// FNV-1a 64 over the file bytes, rendered "fnv1a:<hex>"; the manifest's
// input fingerprint.
std::string content_hash(const std::string& path);

// Run manifest written beside a command's outputs: the full effective
// configuration, seeds, input-file hashes, and produced outputs. Contains
// nothing nondeterministic, so reruns are byte-identical.
class Manifest {
 public:
  explicit Manifest(std::string command) { doc_["command"] = std::move(command); }
  void set(const std::string& key, const nlohmann::json& value) { doc_[key] = value; }
  void add_input(const std::string& path) { doc_["inputs"][path] = content_hash(path); }
  void add_output(const std::string& path) { doc_["outputs"].push_back(path); }
  void write(const std::string& path) const;

 private:
  nlohmann::json doc_;
};

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Hand-rolled static SVG plots; no plotting dependency. Output is valid
// XML with locale-independent numbers.
void svg_line_plot(const std::string& path, const std::string& title,
                   const std::string& x_label, const std::string& y_label,
                   const std::vector<Series>& series);

// d x d heatmap with a blue-white-red diverging palette centered at 0.
void svg_heatmap(const std::string& path, const std::string& title, const Matrix& values);

// CSV with a header row; all numbers formatted with shortest round-trip
// notation and '.' decimal separator.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Matrix as a d x d CSV grid (no header), for heatmap exports.
void write_matrix_csv(const std::string& path, const Matrix& values);

}  // namespace isolab::cli
