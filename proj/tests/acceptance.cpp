// Acceptance run: one PASS/FAIL line per criterion.
//   harpy_acceptance [--criterion N] --cli path/to/harpy --scenarios dir
#include "harpy/harpy.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

using namespace harpy;
namespace fs = std::filesystem;

namespace {

// Tolerances not already carried by harpy::tol.
constexpr double kModelRuntime = 10.0;  // s
constexpr int kEstimatePanels = 6;

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void add(const CheckResult& c) {
    pass = pass && c.pass;
    notes.push_back(c.name + ": " + (c.pass ? "ok" : "FAILED") + " (" + c.detail + ")");
  }
  void add(const std::string& what, bool ok, const std::string& detail) { add(CheckResult{what, ok, detail}); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) { return detail::num(v); }

std::string report_line(const NrmseReport& r) {
  std::string s;
  for (int c = 0; c < 6; ++c) s += (c ? " " : "") + wrench_components()[c] + "=" + num(r[c]);
  return s;
}

struct Context {
  std::string cli;
  std::string scenarios;
};

Verdict model_correctness(const Context&) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  v.add(check_mass_matrix());
  v.add(check_jacobians());
  v.add(check_skew_symmetry());
  const double elapsed = seconds_since(t0);
  v.add("runtime", elapsed < kModelRuntime, num(elapsed) + " s, limit " + num(kModelRuntime) + " s");
  return v;
}

Verdict integrator_correctness(const Context&) {
  Verdict v;
  v.add(check_free_fall());
  v.add(check_rk4_order());
  v.add(check_energy_audit(run(Scenario{})));
  return v;
}

Verdict filter_property(const Context&) {
  Verdict v;
  v.add(check_filter_step());
  return v;
}

Verdict supplied_mode(const Context&) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const SimLog log = run(Scenario{});
  const double elapsed = seconds_since(t0);
  v.add("completed", !log.fell_at, log.fell_at ? "fell at " + num(*log.fell_at) + " s" : "5 s walked");
  const NrmseReport rep = evaluate(log);
  bool ok = true;
  for (int c = 0; c < 6; ++c) ok = ok && rep[c] < (c == 4 ? tol::kSuppliedNrmseTauY : tol::kSuppliedNrmse);
  v.add("NRMSE", ok,
        report_line(rep) + "; limit " + num(tol::kSuppliedNrmse) + ", tau_y " + num(tol::kSuppliedNrmseTauY));
  v.add("runtime", elapsed < tol::kSuppliedRuntime,
        num(elapsed) + " s, limit " + num(tol::kSuppliedRuntime) + " s");
  return v;
}

Verdict constraint_mode(const Context&) {
  Verdict v;
  const SimLog con = run(constraint_scenario());
  v.add("completed", !con.fell_at, con.fell_at ? "fell at " + num(*con.fell_at) + " s" : "5 s walked");
  const NrmseReport rc = evaluate(con);
  const NrmseReport rs = evaluate(run(Scenario{}));
  bool band = true, order = true;
  std::string limits;
  for (int c = 0; c < 6; ++c) {
    const double limit = tol::kTableBand * tol::kTableI[c];
    band = band && rc[c] < limit;
    order = order && rc[c] >= rs[c];
    limits += (c ? " " : "") + num(limit);
  }
  v.add("NRMSE band", band, report_line(rc) + "; limits " + limits);
  v.add("ordering against supplied", order, "supplied " + report_line(rs));
  return v;
}

Verdict constraint_oracle(const Context&) {
  Verdict v;
  v.add(check_constraint_grf_static());
  v.add(check_double_support_flags(run(Scenario{})));
  return v;
}

Verdict determinism(const Context&) {
  Verdict v;
  const SimLog a = run(Scenario{});
  const std::string bytes = csv_bytes(a);
  v.add("repeat run byte-identical", bytes == csv_bytes(run(Scenario{})), std::to_string(bytes.size()) + " bytes");
  Scenario off;
  off.observer.enabled = false;
  v.add("observer leaves truth untouched", truth_identical(a, run(off)), "observer on vs off");
  return v;
}

struct Shell {
  int code = -1;
  std::string out;
};

Shell shell(const std::string& cmd) {
  Shell s;
  FILE* p = popen((cmd + " 2>&1").c_str(), "r");
  if (!p) return s;
  char buf[4096];
  while (auto n = std::fread(buf, 1, sizeof buf, p)) s.out.append(buf, n);
  const int status = pclose(p);
  s.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return s;
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

Verdict cli_round_trip(const Context& ctx) {
  Verdict v;
  if (ctx.cli.empty() || ctx.scenarios.empty()) {
    v.add("arguments", false, "--cli and --scenarios are required");
    return v;
  }
  const fs::path dir = fs::temp_directory_path() / "harpy_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string exe = "'" + ctx.cli + "'";
  const std::string log = "'" + (dir / "default.csv").string() + "'";

  const Shell r = shell(exe + " run --config '" + ctx.scenarios + "/default.yaml' --out '" + dir.string() + "'");
  v.add("run", r.code == 0, "exit " + std::to_string(r.code));
  const Shell e = shell(exe + " eval " + log);
  v.add("eval", e.code == 0, "exit " + std::to_string(e.code));
  const Shell p = shell(exe + " plot " + log);
  v.add("plot", p.code == 0, "exit " + std::to_string(p.code));

  const auto slurp = [](const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string est = slurp(dir / "default_estimate.svg");
  const std::size_t panels = count(est, "<g class=\"panel\">");
  v.add("estimate SVG", panels == kEstimatePanels, std::to_string(panels) + " panels");
  const std::string grf = slurp(dir / "default_grf.svg");
  v.add("GRF SVG", grf.rfind("<svg", 0) == 0 && count(grf, "<polyline class=\"trace\"") > 0,
        std::to_string(count(grf, "<polyline class=\"trace\"")) + " traces");
  bool csv_ok = false;
  std::string csv_note = "missing";
  try {
    const CsvTable t = read_csv_file((dir / "default_nrmse.csv").string());
    csv_ok = t.rows.size() == 6 && t.has("nrmse");
    csv_note = std::to_string(t.rows.size()) + " rows";
  } catch (const std::exception& ex) {
    csv_note = ex.what();
  }
  v.add("NRMSE CSV", csv_ok, csv_note);
  if (!v.pass) v.notes.push_back("cli output:\n" + r.out + e.out + p.out);
  fs::remove_all(dir);
  return v;
}

struct Criterion {
  const char* title;
  std::function<Verdict(const Context&)> check;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {"model correctness", model_correctness},
      {"integrator correctness", integrator_correctness},
      {"observer filter property", filter_property},
      {"supplied-GRF observer", supplied_mode},
      {"constraint-GRF observer", constraint_mode},
      {"constraint GRF oracle", constraint_oracle},
      {"determinism and passivity", determinism},
      {"CLI round trip", cli_round_trip},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"harpy acceptance"};
  int only = 0;
  Context ctx;
  app.add_option("--criterion", only, "run a single criterion")->check(CLI::Range(1, 8));
  app.add_option("--cli", ctx.cli, "harpy executable");
  app.add_option("--scenarios", ctx.scenarios, "scenario directory");
  CLI11_PARSE(app, argc, argv);

  bool all = true;
  for (std::size_t i = 0; i < criteria().size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (only && only != n) continue;
    const Criterion& c = criteria()[i];
    Verdict v;
    try {
      v = c.check(ctx);
    } catch (const std::exception& e) {
      v.add("exception", false, e.what());
    }
    all = all && v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << c.title << '\n';
    for (const auto& note : v.notes) std::cout << "    " << note << '\n';
    std::cout.flush();
  }
  return all ? 0 : 1;
}
