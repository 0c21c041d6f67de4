// harpy: run walking scenarios, score the observer, draw figures, and run the
// built-in property suite.

#include "harpy/harpy.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct StageError : std::runtime_error {
  StageError(std::string stage, const std::string& what) : std::runtime_error(what), stage(std::move(stage)) {}
  std::string stage;
};

struct RunOptions {
  std::vector<std::string> scenarios;
  std::string config;
  std::string out = ".";
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> duration;
};

harpy::Scenario prepare(const std::string& path, const RunOptions& o) {
  harpy::Scenario sc;
  try {
    if (!path.empty()) sc = harpy::load_scenario(path);
    if (o.mode) {
      sc.observer.mode = harpy::parse_observer_mode(*o.mode);
      sc.observer.k0.reset();
    }
    if (o.seed) sc.seed = *o.seed;
    if (o.dt) sc.dt = *o.dt;
    if (o.duration) sc.duration = *o.duration;
    sc.validate();
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
  return sc;
}

int cmd_run(const RunOptions& o) {
  std::vector<std::string> paths = o.scenarios;
  if (!o.config.empty()) paths.insert(paths.begin(), o.config);
  if (paths.empty()) paths.emplace_back();  // built-in defaults

  std::vector<harpy::Scenario> scs;
  for (const auto& p : paths) scs.push_back(prepare(p, o));

  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw StageError("run", "cannot create " + o.out + ": " + ec.message());

  std::vector<std::future<harpy::SimLog>> jobs;
  for (const auto& sc : scs) {
    jobs.push_back(std::async(std::launch::async, [sc] { return harpy::run(sc); }));
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    harpy::SimLog log;
    try {
      log = jobs[i].get();
    } catch (const std::exception& e) {
      throw StageError("run", scs[i].name + ": " + e.what());
    }
    const std::string path = (fs::path(o.out) / fs::path(scs[i].log_path).filename()).string();
    try {
      harpy::save_log(log, path);
    } catch (const std::exception& e) {
      throw StageError("run", e.what());
    }
    std::cout << scs[i].name << ": " << log.rows.size() << " samples, observer "
              << (log.observer_enabled ? harpy::to_string(log.mode) : "off");
    if (log.fell_at) std::cout << ", fell at t = " << *log.fell_at << " s";
    std::cout << " -> " << path << '\n';
  }
  return 0;
}

std::string stem_of(const std::string& log) { return fs::path(log).stem().string(); }

int cmd_eval(const std::string& log, const std::string& out) {
  harpy::NrmseReport rep;
  try {
    rep = harpy::evaluate_file(log);
  } catch (const std::exception& e) {
    throw StageError("eval", e.what());
  }
  const fs::path dir = out.empty() ? fs::path(log).parent_path() : fs::path(out);
  std::error_code ec;
  if (!dir.empty()) fs::create_directories(dir, ec);
  const std::string csv = (dir / (stem_of(log) + "_nrmse.csv")).string();
  const std::string meta = (dir / (stem_of(log) + "_nrmse.json")).string();
  std::ofstream f(csv, std::ios::binary);
  std::ofstream m(meta, std::ios::binary);
  if (!f || !m) throw StageError("eval", "cannot write report next to " + csv);
  harpy::write_report_csv(rep, f);
  m << harpy::report_metadata(rep).dump(2) << '\n';
  harpy::write_report_table(rep, std::cout);
  std::cout << "report: " << csv << '\n';
  return 0;
}

std::set<std::string> parse_selection(const std::string& s) {
  std::set<std::string> out;
  if (s == "all") {
    out.insert(harpy::plot_families().begin(), harpy::plot_families().end());
    return out;
  }
  if (s == "none") return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

int cmd_plot(const std::string& log, const std::string& out, const std::string& select) {
  const auto selection = parse_selection(select);
  std::vector<std::string> written;
  try {
    if (selection.empty()) {
      std::cout << "nothing selected\n";
      return 0;
    }
    const harpy::CsvTable table = harpy::read_csv_file(log);
    const fs::path dir = out.empty() ? fs::path(log).parent_path() : fs::path(out);
    written = harpy::plot(table, selection, dir.empty() ? "." : dir.string(), stem_of(log));
  } catch (const std::exception& e) {
    throw StageError("plot", e.what());
  }
  for (const auto& w : written) std::cout << w << '\n';
  return 0;
}

int cmd_verify() {
  bool ok = true;
  for (const auto& c : harpy::fixture_checks()) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    ok = ok && c.pass;
  }
  if (!ok) throw StageError("verify", "property suite failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thruster-assisted biped simulator and thrust observer"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "simulate scenarios and write CSV logs");
  run->add_option("scenario", ro.scenarios, "scenario YAML files (defaults when omitted)");
  run->add_option("--config", ro.config, "scenario YAML file");
  run->add_option("--out", ro.out, "output directory");
  run->add_option("--observer-mode", ro.mode, "override the observer mode")
      ->check(CLI::IsMember({"supplied", "constraint"}));
  run->add_option("--seed", ro.seed, "perturbation seed");
  run->add_option("--dt", ro.dt, "time step, s")->check(CLI::PositiveNumber);
  run->add_option("--duration", ro.duration, "simulated time, s")->check(CLI::PositiveNumber);

  std::string eval_log, eval_out;
  auto* eval = app.add_subcommand("eval", "NRMSE of the thrust estimate from a log");
  eval->add_option("log", eval_log, "CSV log written by run")->required();
  eval->add_option("--out", eval_out, "report directory (default: next to the log)");

  std::string plot_log, plot_out, plot_select = "all";
  auto* plot = app.add_subcommand("plot", "SVG figures from a log");
  plot->add_option("log", plot_log, "CSV log written by run")->required();
  plot->add_option("--out", plot_out, "figure directory (default: next to the log)");
  plot->add_option("--select", plot_select, "comma list of estimate, grf, states; all; none");

  auto* verify = app.add_subcommand("verify", "model, integrator and observer property suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(ro);
    if (*eval) return cmd_eval(eval_log, eval_out);
    if (*plot) return cmd_plot(plot_log, plot_out, plot_select);
    if (*verify) return cmd_verify();
  } catch (const StageError& e) {
    std::cerr << "harpy " << e.stage << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "harpy: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
