#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mffssim/error.hpp"

namespace mffssim {

/// Named scalar results of a run, serialized as JSON with stable keys:
/// "Q", "ssim", "psnr_db", "iterations", "trace".
struct MetricReport {
  std::map<std::string, double> entries;
  std::vector<double> trace;
  std::optional<nlohmann::json> config;

  void set(const std::string& key, double value) { entries[key] = value; }

  double at(const std::string& key) const {
    auto it = entries.find(key);
    if (it == entries.end()) throw std::out_of_range("report has no entry '" + key + "'");
    return it->second;
  }

  bool contains(const std::string& key) const { return entries.count(key) != 0; }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : entries) {
      if (key == "iterations") {
        j[key] = static_cast<long long>(std::llround(value));
      } else {
        j[key] = value;
      }
    }
    if (!trace.empty()) j["trace"] = trace;
    if (config) j["config"] = *config;
    return j;
  }
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace mffssim
