// Copyright 2026 The msim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "msim/corpus_io.hpp"
#include "msim/errors.hpp"
#include "msim/pipeline.hpp"

namespace msim {

struct ReportRow {
  std::string config_hash;
  std::string experiment;
  std::string strategy;
  std::string model;
  std::string source;  // manifest directory
  std::map<std::string, double> metrics;
};

struct ReportTable {
  std::vector<ReportRow> rows;
  std::vector<std::string> metrics;  // column order
  std::vector<std::string> warnings;
};

/// Collects every eval manifest under `roots` (recursively). Rows are keyed
/// by (config hash, model); a later manifest for the same key is ignored
/// with a warning.
inline ReportTable collect_reports(const std::vector<std::filesystem::path>& roots) {
  namespace fs = std::filesystem;
  std::vector<fs::path> manifests;
  for (const auto& root : roots) {
    if (!fs::exists(root)) throw DataError("report input " + root.string() + " does not exist");
    if (fs::is_regular_file(root)) {
      manifests.push_back(root);
      continue;
    }
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().filename() == files::kManifest) {
        manifests.push_back(entry.path());
      }
    }
  }
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty()) throw DataError("no manifest.json found under the report inputs");

  ReportTable t;
  std::set<std::string> versions;
  std::set<std::string> metric_set;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& path : manifests) {
    const Json m = read_json_file(path);
    if (!m.is_object() || m.value("command", "") != "eval") continue;
    versions.insert(m.value("tool_version", "?"));
    const fs::path reports_path = path.parent_path() / files::kReports;
    const Json reports = read_json_file(reports_path);
    if (!reports.is_array()) throw DataError(reports_path.string() + ": expected a JSON array");
    ReportRow row;
    row.config_hash = m.value("config_hash", "");
    row.experiment = m.value("experiment", "");
    row.strategy = m.value("strategy", "");
    row.model = m.value("model", "");
    const std::string tag = m.value("tag", "");
    if (!tag.empty()) row.model = tag;
    row.source = path.parent_path().string();
    for (const auto& r : reports) {
      if (!r.is_object() || !r.contains("metric") || !r.contains("value") || !r["value"].is_number()) {
        throw DataError(reports_path.string() + ": malformed report entry");
      }
      row.metrics[r["metric"].get<std::string>()] = r["value"].get<double>();
      metric_set.insert(r["metric"].get<std::string>());
    }
    const auto key = std::make_pair(row.config_hash, row.model);
    if (index.count(key)) {
      t.warnings.push_back("duplicate run " + row.source + " ignored");
      continue;
    }
    index[key] = t.rows.size();
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw DataError("no eval manifests found under the report inputs");
  if (versions.size() > 1) {
    std::string v;
    for (const auto& x : versions) v += (v.empty() ? "" : ", ") + x;
    t.warnings.push_back("runs come from different tool versions: " + v);
  }
  t.metrics.assign(metric_set.begin(), metric_set.end());
  return t;
}

inline std::string report_cell(const ReportRow& r, const std::string& metric, const char* fmt) {
  const auto it = r.metrics.find(metric);
  if (it == r.metrics.end()) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, fmt, it->second);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string render_csv(const ReportTable& t) {
  std::string out = "experiment,strategy,model,config_hash";
  for (const auto& m : t.metrics) out += "," + m;
  out += "\n";
  for (const auto& r : t.rows) {
    out += csv_escape(r.experiment) + "," + csv_escape(r.strategy) + "," + csv_escape(r.model) + "," +
           r.config_hash;
    for (const auto& m : t.metrics) out += "," + report_cell(r, m, "%.17g");
    out += "\n";
  }
  return out;
}

inline std::string render_markdown(const ReportTable& t) {
  std::string out = "| experiment | strategy | model | config |";
  for (const auto& m : t.metrics) out += " " + m + " |";
  out += "\n|---|---|---|---|";
  for (std::size_t i = 0; i < t.metrics.size(); ++i) out += "---:|";
  out += "\n";
  for (const auto& r : t.rows) {
    out += "| " + r.experiment + " | " + r.strategy + " | " + r.model + " | " +
           r.config_hash.substr(0, 12) + " |";
    for (const auto& m : t.metrics) out += " " + report_cell(r, m, "%.4f") + " |";
    out += "\n";
  }
  return out;
}

inline ReportTable cmd_report(const std::vector<std::filesystem::path>& roots,
                              const std::filesystem::path& out, const Log& log = {}) {
  ReportTable t = collect_reports(roots);
  std::filesystem::create_directories(out);
  {
    std::ofstream f(out / "report.csv", std::ios::binary | std::ios::trunc);
    f << render_csv(t);
  }
  {
    std::ofstream f(out / "report.md", std::ios::binary | std::ios::trunc);
    f << render_markdown(t);
  }
  if (log) {
    for (const auto& w : t.warnings) log("warning: " + w);
    log("report with " + std::to_string(t.rows.size()) + " rows written to " + out.string());
  }
  return t;
}

}  // namespace msim
