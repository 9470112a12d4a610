// Copyright 2026 The snd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef SND_HARNESS_REPORT_HPP_
#define SND_HARNESS_REPORT_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "snd/error.hpp"

namespace snd {

inline constexpr const char* kCsvHeader = "scenario,method,eta,seed,metric,value";

inline const std::set<std::string>& MetricNames() {
  static const std::set<std::string> names = {"acc",       "auc",        "mse",      "cos",    "mi",
                                              "attack_acc", "bytes_up", "bytes_down", "wall_ms"};
  return names;
}

// Shortest text that reads back to the same double; "inf" / "nan" for the
// special values.
inline std::string FormatNumber(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct ReportRow {
  std::string scenario;
  std::string method;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

class Report {
 public:
  void Add(ReportRow row) {
    Require(MetricNames().count(row.metric) == 1, ErrorCode::kInvalidArgument,
            "metric '" + row.metric + "' is not in the report schema");
    rows_.push_back(std::move(row));
  }

  void Add(const std::string& scenario, const std::string& method, double eta, std::uint64_t seed,
           const std::string& metric, double value) {
    Add(ReportRow{scenario, method, eta, seed, metric, value});
  }

  void Append(const Report& other) {
    rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
    for (const auto& [k, v] : other.extras_.items()) extras_[k] = v;
  }

  // Scenario-level values outside the row schema (e.g. a similarity score).
  void SetExtra(const std::string& scenario, const std::string& key, nlohmann::json value) {
    extras_[scenario][key] = std::move(value);
  }

  const std::vector<ReportRow>& rows() const { return rows_; }
  const nlohmann::json& extras() const { return extras_; }

  std::string ToCsv() const {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const ReportRow& r : rows_)
      out += r.scenario + "," + r.method + "," + FormatNumber(r.eta) + "," + std::to_string(r.seed) +
             "," + r.metric + "," + FormatNumber(r.value) + "\n";
    return out;
  }

  // {"scenarios": {name: {"rows": [...], "extras": {...}}}}
  nlohmann::json ToJson() const {
    nlohmann::json scenarios = nlohmann::json::object();
    auto number = [](double v) -> nlohmann::json {
      if (std::isfinite(v)) return v;
      return FormatNumber(v);
    };
    for (const ReportRow& r : rows_) {
      scenarios[r.scenario]["rows"].push_back({{"method", r.method},
                                               {"eta", number(r.eta)},
                                               {"seed", r.seed},
                                               {"metric", r.metric},
                                               {"value", number(r.value)}});
    }
    for (const auto& [name, extra] : extras_.items()) scenarios[name]["extras"] = extra;
    return nlohmann::json{{"scenarios", scenarios}};
  }

  void WriteCsv(const std::string& path) const { WriteText(path, ToCsv()); }
  void WriteJson(const std::string& path) const { WriteText(path, ToJson().dump(2) + "\n"); }

 private:
  static void WriteText(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
    out << text;
    Require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path);
  }

  std::vector<ReportRow> rows_;
  nlohmann::json extras_ = nlohmann::json::object();
};

}  // namespace snd

#endif  // SND_HARNESS_REPORT_HPP_
