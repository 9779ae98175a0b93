#pragma once

// JSON documents for models and moment tables. Requires nlohmann/json.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "binbps/errors.hpp"
#include "binbps/model.hpp"
#include "binbps/oracle.hpp"

namespace binbps {

inline nlohmann::json to_json(const MrfModel& model) {
  return {
      {"dim", model.dim()},
      {"seed", model.seed()},
      {"sigma_m", model.sigma_m()},
      {"sigma_r", model.sigma_r()},
      {"couplings", std::vector<double>(model.couplings().begin(), model.couplings().end())},
      {"fields", std::vector<double>(model.fields().begin(), model.fields().end())},
  };
}

inline MrfModel mrf_from_json(const nlohmann::json& doc) {
  try {
    const auto dim = doc.at("dim").get<std::size_t>();
    MrfModel model(dim, doc.at("couplings").get<std::vector<double>>(),
                   doc.at("fields").get<std::vector<double>>());
    return mrf_with_metadata(std::move(model), doc.value("sigma_m", 0.0),
                             doc.value("sigma_r", 0.0), doc.value("seed", std::uint64_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model document: ") + e.what());
  }
}

/// {first: [...], second: [[...], ...]}; `second` is omitted for
/// first-moments-only tables.
inline nlohmann::json to_json(const MomentTable& table) {
  nlohmann::json doc;
  doc["first"] = table.first;
  if (table.has_second()) {
    const std::size_t d = table.dim();
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < d; ++i) {
      rows.push_back(std::vector<double>(table.second.begin() + static_cast<std::ptrdiff_t>(i * d),
                                         table.second.begin() + static_cast<std::ptrdiff_t>((i + 1) * d)));
    }
    doc["second"] = std::move(rows);
  }
  return doc;
}

inline MomentTable moments_from_json(const nlohmann::json& doc) {
  try {
    MomentTable table;
    table.first = doc.at("first").get<std::vector<double>>();
    table.total_weight = doc.value("total_weight", 1.0);
    if (doc.contains("second")) {
      const auto rows = doc.at("second").get<std::vector<std::vector<double>>>();
      const std::size_t d = table.dim();
      detail::check_dim(rows.size(), d, "second-moment rows");
      table.second.reserve(d * d);
      for (const auto& row : rows) {
        detail::check_dim(row.size(), d, "second-moment row");
        table.second.insert(table.second.end(), row.begin(), row.end());
      }
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed moment document: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
}

}  // namespace binbps
