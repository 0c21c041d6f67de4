// NRMSE scoring of observer estimates, from an in-memory run or a CSV log.
#pragma once

#include "harpy/simulator.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace harpy {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// RMSE of `estimated` against `actual`, divided by the peak-to-peak range of
/// `actual`.
inline double nrmse(std::span<const double> actual, std::span<const double> estimated) {
  if (actual.size() != estimated.size()) {
    throw EvalError("nrmse: length mismatch (" + std::to_string(actual.size()) + " actual vs " +
                    std::to_string(estimated.size()) + " estimated)");
  }
  if (actual.size() < 2) throw EvalError("nrmse: need at least 2 samples");
  const auto [lo, hi] = std::minmax_element(actual.begin(), actual.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw EvalError("nrmse: actual signal is constant (zero range)");
  double sq = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = estimated[i] - actual[i];
    sq += e * e;
  }
  return std::sqrt(sq / static_cast<double>(actual.size())) / range;
}

inline double nrmse(const std::vector<double>& actual, const std::vector<double>& estimated) {
  return nrmse(std::span<const double>(actual), std::span<const double>(estimated));
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }

  bool has(const std::string& name) const { return find(name).has_value(); }

  std::vector<double> numeric(const std::string& name) const {
    const auto col = find(name);
    if (!col) throw EvalError("missing column " + name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string& cell = rows[r][*col];
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw EvalError("column " + name + ", data row " + std::to_string(r + 1) + ": not a number '" +
                        cell + "'");
      }
      out.push_back(v);
    }
    return out;
  }

  std::vector<std::string> text(const std::string& name) const {
    const auto col = find(name);
    if (!col) throw EvalError("missing column " + name);
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[*col]);
    return out;
  }

  /// Throws naming every column of `names` that is absent.
  void require(const std::vector<std::string>& names) const {
    std::string missing;
    for (const auto& n : names) {
      if (!has(n)) missing += (missing.empty() ? "" : ", ") + n;
    }
    if (!missing.empty()) throw EvalError("missing columns: " + missing);
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Plain comma-separated table; every row must have as many fields as the header.
inline CsvTable read_csv(std::istream& is, const std::string& source = "<csv>") {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line) || line.empty()) throw EvalError(source + ": empty file");
  t.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw EvalError(source + ":" + std::to_string(lineno) + ": length mismatch, " +
                      std::to_string(cells.size()) + " fields but the header has " +
                      std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw EvalError(path + ": cannot open file");
  return read_csv(f, path);
}

// ---------------------------------------------------------------------------
// Report

inline const std::array<std::string, 6>& truth_columns() {
  static const std::array<std::string, 6> c{"F_x[N]", "F_y[N]", "F_z[N]", "tau_x[N m]", "tau_y[N m]",
                                            "tau_z[N m]"};
  return c;
}

inline const std::array<std::string, 6>& estimate_columns() {
  static const std::array<std::string, 6> c{"r_Fx[N]", "r_Fy[N]", "r_Fz[N]", "r_tx[N m]", "r_ty[N m]",
                                            "r_tz[N m]"};
  return c;
}

struct NrmseReport {
  std::string scenario;
  std::string mode;
  std::vector<double> k0;       // as recorded for the run, generalized-velocity order
  double excluded_until = 0.0;  // samples with t < this are left out, s
  std::size_t samples = 0;
  std::array<double, 6> value{};

  double operator[](std::size_t i) const { return value[i]; }
};

/// Scores channel by channel over the rows flagged false in `warmup`.
inline NrmseReport score(const std::array<std::vector<double>, 6>& truth,
                         const std::array<std::vector<double>, 6>& estimate, const std::vector<bool>& warmup) {
  NrmseReport rep;
  for (std::size_t c = 0; c < 6; ++c) {
    if (truth[c].size() != warmup.size() || estimate[c].size() != warmup.size()) {
      throw EvalError("score: length mismatch in channel " + wrench_components()[c]);
    }
    std::vector<double> a, e;
    for (std::size_t i = 0; i < warmup.size(); ++i) {
      if (warmup[i]) continue;
      a.push_back(truth[c][i]);
      e.push_back(estimate[c][i]);
    }
    try {
      rep.value[c] = nrmse(a, e);
    } catch (const EvalError& err) {
      throw EvalError(wrench_components()[c] + ": " + err.what());
    }
    rep.samples = a.size();
  }
  return rep;
}

inline NrmseReport evaluate(const SimLog& log) {
  if (!log.observer_enabled) throw EvalError("evaluate: the run has no observer output");
  std::array<std::vector<double>, 6> truth, est;
  std::vector<bool> warmup;
  for (const LogRow& r : log.rows) {
    for (int c = 0; c < 6; ++c) {
      truth[c].push_back(r.gen_thrust[c]);
      est[c].push_back(r.r[c]);
    }
    warmup.push_back(r.warmup);
  }
  NrmseReport rep = score(truth, est, warmup);
  rep.scenario = log.scenario;
  rep.mode = to_string(log.mode);
  rep.k0.assign(log.k0.data(), log.k0.data() + kDof);
  rep.excluded_until = log.warmup_end;
  return rep;
}

/// Scores a logged run. Metadata comes from the sidecar when it exists.
inline NrmseReport evaluate(const CsvTable& t, const nlohmann::json& meta = {}) {
  std::vector<std::string> need{"t[s]", "warmup"};
  need.insert(need.end(), truth_columns().begin(), truth_columns().end());
  need.insert(need.end(), estimate_columns().begin(), estimate_columns().end());
  t.require(need);
  std::array<std::vector<double>, 6> truth, est;
  for (int c = 0; c < 6; ++c) {
    truth[c] = t.numeric(truth_columns()[c]);
    est[c] = t.numeric(estimate_columns()[c]);
  }
  const std::vector<double> flags = t.numeric("warmup");
  std::vector<bool> warmup(flags.size());
  for (std::size_t i = 0; i < flags.size(); ++i) warmup[i] = flags[i] != 0.0;
  NrmseReport rep = score(truth, est, warmup);

  const std::vector<double> time = t.numeric("t[s]");
  rep.excluded_until = 0.0;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (!warmup[i]) {
      rep.excluded_until = time[i];
      break;
    }
  }
  rep.scenario = meta.value("scenario", std::string("unknown"));
  rep.mode = meta.value("observer_mode", std::string("unknown"));
  if (meta.contains("K0")) rep.k0 = meta["K0"].get<std::vector<double>>();
  if (meta.contains("warmup_end")) rep.excluded_until = meta["warmup_end"].get<double>();
  return rep;
}

inline nlohmann::json read_metadata(const std::string& log_path) {
  const std::string path = metadata_path(log_path);
  if (!std::filesystem::exists(path)) return nlohmann::json::object();
  std::ifstream f(path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(path + ": " + e.what());
  }
}

inline NrmseReport evaluate_file(const std::string& log_path) {
  return evaluate(read_csv_file(log_path), read_metadata(log_path));
}

inline void write_report_csv(const NrmseReport& rep, std::ostream& os) {
  os << "component,nrmse,scenario,mode\n";
  for (std::size_t c = 0; c < 6; ++c) {
    std::string line = wrench_components()[c] + ",";
    detail::append_number(line, rep.value[c]);
    os << line << ',' << rep.scenario << ',' << rep.mode << '\n';
  }
}

inline nlohmann::ordered_json report_metadata(const NrmseReport& rep) {
  nlohmann::ordered_json j;
  j["scenario"] = rep.scenario;
  j["observer_mode"] = rep.mode;
  j["K0"] = rep.k0;
  j["excluded_before_s"] = rep.excluded_until;
  j["samples"] = rep.samples;
  j["normalization"] = "peak-to-peak range of the true signal";
  return j;
}

inline void write_report_table(const NrmseReport& rep, std::ostream& os) {
  char buf[64];
  os << "scenario " << rep.scenario << ", observer " << rep.mode << ", " << rep.samples
     << " samples after t = ";
  auto res = std::to_chars(buf, buf + sizeof(buf), rep.excluded_until, std::chars_format::fixed, 3);
  os << std::string(buf, res.ptr) << " s\n";
  os << "+-----------+----------+\n";
  os << "| component |    NRMSE |\n";
  os << "+-----------+----------+\n";
  for (std::size_t c = 0; c < 6; ++c) {
    res = std::to_chars(buf, buf + sizeof(buf), rep.value[c], std::chars_format::fixed, 4);
    std::string num(buf, res.ptr);
    std::string name = wrench_components()[c];
    os << "| " << name << std::string(10 - std::min<std::size_t>(10, name.size()), ' ') << "| "
       << std::string(8 - std::min<std::size_t>(8, num.size()), ' ') << num << " |\n";
  }
  os << "+-----------+----------+\n";
}

}  // namespace harpy
