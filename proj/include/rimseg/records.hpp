// Copyright 2026 The rimseg Authors
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

// One CSV row per experiment run.
//
// Configuration fields are written in shortest round-trip form so a row can
// be re-run exactly; measurements use 6 significant digits. Fields that do
// not apply to a run (e.g. ASA without ground truth) are left empty.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rimseg {

struct ExperimentRecord {
  std::string image_id;
  std::string method;  // ours | ours_no_recons | slic
  std::string status = "ok";

  // configuration snapshot
  std::uint64_t seed = 0;
  std::size_t n_target = 0;  // N for ours, k for slic
  double lambda = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double sigma = 0.0;
  std::size_t iterations = 0;
  double learning_rate = 0.0;
  double width_mult = 0.0;
  double compactness = 0.0;
  int epsilon = 1;

  // measurements
  std::size_t n_superpixels_used = 0;
  std::size_t n_components = 0;
  std::optional<double> asa;
  std::optional<double> br;
  std::optional<double> initial_loss;
  std::optional<double> final_loss;
  double wall_time_s = 0.0;

  bool ok() const { return status == "ok"; }
  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

inline const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> columns = {
      "image",  "method",     "status",     "seed",        "n_target",
      "lambda", "alpha",      "beta",       "sigma",       "iterations",
      "lr",     "width_mult", "compactness", "epsilon",    "n_superpixels_used",
      "n_components", "asa",  "br",         "initial_loss", "final_loss",
      "wall_time_s"};
  return columns;
}

namespace detail {

inline std::string format_exact(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

inline std::string format_measurement(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_measurement(*v) : std::string();
}

// RFC 4180 quoting for fields holding separators, quotes or newlines.
inline std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw std::invalid_argument("csv: unterminated quoted field");
  return fields;
}

template <typename U>
U parse_number(const std::string& s, const char* column) {
  U value{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
    throw std::invalid_argument(std::string("csv: bad value '") + s + "' in column " + column);
  }
  return value;
}

inline double parse_real(const std::string& s, const char* column) {
  if (s == "nan" || s == "-nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return parse_number<double>(s, column);
}

inline std::optional<double> parse_optional(const std::string& s, const char* column) {
  if (s.empty()) return std::nullopt;
  return parse_real(s, column);
}

}  // namespace detail

inline std::string csv_header() {
  std::string line;
  for (const auto& c : record_columns()) line += (line.empty() ? "" : ",") + c;
  return line;
}

inline std::string to_csv_row(const ExperimentRecord& r) {
  using namespace detail;
  const std::vector<std::string> fields = {
      csv_quote(r.image_id),
      csv_quote(r.method),
      csv_quote(r.status),
      std::to_string(r.seed),
      std::to_string(r.n_target),
      format_exact(r.lambda),
      format_exact(r.alpha),
      format_exact(r.beta),
      format_exact(r.sigma),
      std::to_string(r.iterations),
      format_exact(r.learning_rate),
      format_exact(r.width_mult),
      format_exact(r.compactness),
      std::to_string(r.epsilon),
      std::to_string(r.n_superpixels_used),
      std::to_string(r.n_components),
      format_optional(r.asa),
      format_optional(r.br),
      format_optional(r.initial_loss),
      format_optional(r.final_loss),
      format_measurement(r.wall_time_s)};
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) line += (i ? "," : "") + fields[i];
  return line;
}

inline ExperimentRecord parse_csv_row(std::string_view line) {
  using namespace detail;
  const std::vector<std::string> f = csv_split(line);
  if (f.size() != record_columns().size()) {
    throw std::invalid_argument("csv: expected " + std::to_string(record_columns().size()) +
                                " fields, got " + std::to_string(f.size()));
  }
  ExperimentRecord r;
  std::size_t i = 0;
  r.image_id = f[i++];
  r.method = f[i++];
  r.status = f[i++];
  r.seed = parse_number<std::uint64_t>(f[i++], "seed");
  r.n_target = parse_number<std::size_t>(f[i++], "n_target");
  r.lambda = parse_real(f[i++], "lambda");
  r.alpha = parse_real(f[i++], "alpha");
  r.beta = parse_real(f[i++], "beta");
  r.sigma = parse_real(f[i++], "sigma");
  r.iterations = parse_number<std::size_t>(f[i++], "iterations");
  r.learning_rate = parse_real(f[i++], "lr");
  r.width_mult = parse_real(f[i++], "width_mult");
  r.compactness = parse_real(f[i++], "compactness");
  r.epsilon = parse_number<int>(f[i++], "epsilon");
  r.n_superpixels_used = parse_number<std::size_t>(f[i++], "n_superpixels_used");
  r.n_components = parse_number<std::size_t>(f[i++], "n_components");
  r.asa = parse_optional(f[i++], "asa");
  r.br = parse_optional(f[i++], "br");
  r.initial_loss = parse_optional(f[i++], "initial_loss");
  r.final_loss = parse_optional(f[i++], "final_loss");
  r.wall_time_s = parse_real(f[i++], "wall_time_s");
  return r;
}

inline void write_records(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  out << csv_header() << '\n';
  for (const auto& r : records) out << to_csv_row(r) << '\n';
}

inline std::vector<ExperimentRecord> read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) throw std::invalid_argument("csv: unexpected header '" + line + "'");
  std::vector<ExperimentRecord> records;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    records.push_back(parse_csv_row(line));
  }
  return records;
}

}  // namespace rimseg
