// Minimal SVG line plots for logged runs: estimate vs truth, ground force
// comparison, and robot states.
#pragma once

#include "harpy/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace harpy {

struct Trace {
  std::string label;
  std::string color;
  std::vector<double> y;
  bool dashed = false;
};

struct Band {
  double t0 = 0.0;
  double t1 = 0.0;
};

struct Panel {
  std::string title;
  std::string y_label;
  std::vector<double> t;
  std::vector<Trace> traces;
  std::vector<Band> bands;  // shaded, e.g. rank-deficient windows
  std::string band_label;
};

struct Figure {
  std::string title;
  int columns = 2;
  std::vector<Panel> panels;
};

namespace detail {

inline std::string fmt(double v, int digits = 2) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

// "Nice" tick spacing for a span.
inline double tick_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

inline int tick_digits(double step) { return std::max(0, -static_cast<int>(std::floor(std::log10(step)))); }

inline void render_panel(std::string& s, const Panel& p, double x0, double y0, double w, double h) {
  const double ml = 62, mr = 12, mt = 24, mb = 40;
  const double pw = w - ml - mr, ph = h - mt - mb;
  s += "<g class=\"panel\">\n";
  s += "<text class=\"panel-title\" x=\"" + fmt(x0 + ml + pw / 2) + "\" y=\"" + fmt(y0 + 16) +
       "\" text-anchor=\"middle\" font-size=\"13\">" + escape(p.title) + "</text>\n";
  if (p.t.empty()) {
    s += "</g>\n";
    return;
  }
  const double t_lo = p.t.front(), t_hi = std::max(p.t.back(), p.t.front() + 1e-9);
  double lo = 1e300, hi = -1e300;
  for (const Trace& tr : p.traces)
    for (double v : tr.y)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  if (!(lo <= hi)) lo = -1.0, hi = 1.0;
  if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto X = [&](double t) { return x0 + ml + (t - t_lo) / (t_hi - t_lo) * pw; };
  auto Y = [&](double v) { return y0 + mt + (hi - std::clamp(v, lo, hi)) / (hi - lo) * ph; };

  for (const Band& b : p.bands) {
    s += "<rect class=\"rank-deficient\" x=\"" + fmt(X(b.t0)) + "\" y=\"" + fmt(y0 + mt) + "\" width=\"" +
         fmt(std::max(0.5, X(b.t1) - X(b.t0))) + "\" height=\"" + fmt(ph) +
         "\" fill=\"#f2c14e\" fill-opacity=\"0.25\"/>\n";
  }
  s += "<rect x=\"" + fmt(x0 + ml) + "\" y=\"" + fmt(y0 + mt) + "\" width=\"" + fmt(pw) + "\" height=\"" +
       fmt(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";

  const double ys = tick_step(hi - lo);
  for (double v = std::ceil(lo / ys) * ys; v <= hi; v += ys) {
    s += "<line x1=\"" + fmt(x0 + ml - 4) + "\" y1=\"" + fmt(Y(v)) + "\" x2=\"" + fmt(x0 + ml + pw) +
         "\" y2=\"" + fmt(Y(v)) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + fmt(x0 + ml - 6) + "\" y=\"" + fmt(Y(v) + 4) +
         "\" text-anchor=\"end\" font-size=\"10\">" + fmt(std::abs(v) < 1e-12 ? 0.0 : v, tick_digits(ys)) +
         "</text>\n";
  }
  const double ts = tick_step(t_hi - t_lo);
  for (double t = std::ceil(t_lo / ts) * ts; t <= t_hi + 1e-12; t += ts) {
    s += "<text x=\"" + fmt(X(t)) + "\" y=\"" + fmt(y0 + mt + ph + 14) +
         "\" text-anchor=\"middle\" font-size=\"10\">" + fmt(t, tick_digits(ts)) + "</text>\n";
  }
  s += "<text class=\"x-label\" x=\"" + fmt(x0 + ml + pw / 2) + "\" y=\"" + fmt(y0 + h - 8) +
       "\" text-anchor=\"middle\" font-size=\"11\">time [s]</text>\n";
  s += "<text class=\"y-label\" transform=\"translate(" + fmt(x0 + 14) + "," + fmt(y0 + mt + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\" font-size=\"11\">" + escape(p.y_label) + "</text>\n";

  // Decimate to keep files small; plots carry at most ~1500 vertices per trace.
  const std::size_t stride = std::max<std::size_t>(1, p.t.size() / 1500);
  for (const Trace& tr : p.traces) {
    s += "<polyline class=\"trace\" data-label=\"" + escape(tr.label) + "\" fill=\"none\" stroke=\"" +
         tr.color + "\" stroke-width=\"1.2\"" + (tr.dashed ? " stroke-dasharray=\"4 3\"" : "") + " points=\"";
    for (std::size_t i = 0; i < tr.y.size(); i += stride) {
      if (!std::isfinite(tr.y[i])) continue;
      s += fmt(X(p.t[i])) + "," + fmt(Y(tr.y[i])) + " ";
    }
    s += "\"/>\n";
  }
  double ly = y0 + mt + 12;
  for (const Trace& tr : p.traces) {
    s += "<line x1=\"" + fmt(x0 + ml + pw - 110) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" +
         fmt(x0 + ml + pw - 92) + "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + tr.color + "\" stroke-width=\"2\"" +
         (tr.dashed ? " stroke-dasharray=\"4 3\"" : "") + "/>\n";
    s += "<text x=\"" + fmt(x0 + ml + pw - 88) + "\" y=\"" + fmt(ly) + "\" font-size=\"10\">" +
         escape(tr.label) + "</text>\n";
    ly += 13;
  }
  if (!p.bands.empty() && !p.band_label.empty()) {
    s += "<rect x=\"" + fmt(x0 + ml + pw - 110) + "\" y=\"" + fmt(ly - 9) +
         "\" width=\"18\" height=\"8\" fill=\"#f2c14e\" fill-opacity=\"0.5\"/>\n";
    s += "<text x=\"" + fmt(x0 + ml + pw - 88) + "\" y=\"" + fmt(ly) + "\" font-size=\"10\">" +
         escape(p.band_label) + "</text>\n";
  }
  s += "</g>\n";
}

}  // namespace detail

inline std::string render_svg(const Figure& fig) {
  const double pw = 460, ph = 230, top = 34;
  const int cols = std::max(1, fig.columns);
  const int rows = (static_cast<int>(fig.panels.size()) + cols - 1) / cols;
  const double W = cols * pw, H = top + rows * ph;
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt(W, 0) + "\" height=\"" +
                  detail::fmt(H, 0) + "\" viewBox=\"0 0 " + detail::fmt(W, 0) + " " + detail::fmt(H, 0) +
                  "\" font-family=\"sans-serif\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + detail::fmt(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       detail::escape(fig.title) + "</text>\n";
  for (std::size_t i = 0; i < fig.panels.size(); ++i) {
    const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
    detail::render_panel(s, fig.panels[i], c * pw, top + r * ph, pw, ph);
  }
  s += "</svg>\n";
  return s;
}

// ---------------------------------------------------------------------------
// Figure families

inline const std::vector<std::string>& plot_families() {
  static const std::vector<std::string> f{"estimate", "grf", "states"};
  return f;
}

namespace detail {

inline std::vector<Band> flagged_windows(const std::vector<double>& t, const std::vector<double>& flag) {
  std::vector<Band> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (flag[i] == 0.0) continue;
    const double t1 = i + 1 < t.size() ? t[i + 1] : t[i];
    if (!out.empty() && std::abs(out.back().t1 - t[i]) < 1e-12) {
      out.back().t1 = t1;
    } else {
      out.push_back({t[i], t1});
    }
  }
  return out;
}

}  // namespace detail

/// True vs estimated generalized force and torque, one panel per channel.
inline Figure estimate_figure(const CsvTable& log) {
  std::vector<std::string> need{"t[s]"};
  need.insert(need.end(), truth_columns().begin(), truth_columns().end());
  need.insert(need.end(), estimate_columns().begin(), estimate_columns().end());
  log.require(need);
  Figure fig;
  fig.title = "Generalized thruster force: true vs estimated";
  const auto t = log.numeric("t[s]");
  static const char* units[6] = {"N", "N", "N", "N m", "N m", "N m"};
  for (int c = 0; c < 6; ++c) {
    Panel p;
    p.title = wrench_components()[c];
    p.y_label = wrench_components()[c] + " [" + units[c] + "]";
    p.t = t;
    p.traces.push_back({"true", "#1f77b4", log.numeric(truth_columns()[c]), false});
    p.traces.push_back({"estimate", "#d62728", log.numeric(estimate_columns()[c]), true});
    fig.panels.push_back(std::move(p));
  }
  return fig;
}

/// Ground-model force vs the contact-constraint force, per foot and axis, with
/// rank-deficient samples shaded.
inline Figure grf_figure(const CsvTable& log) {
  std::vector<std::string> need{"t[s]", "rank_deficient"};
  for (const char* side : {"L", "R"})
    for (const char* a : {"x", "y", "z"}) {
      need.push_back(std::string("u_g_") + side + "_" + a + "[N]");
      need.push_back(std::string("lambda_c_") + side + "_" + a + "[N]");
    }
  log.require(need);
  Figure fig;
  fig.title = "Ground reaction force: ground model vs constraint model";
  fig.columns = 3;
  const auto t = log.numeric("t[s]");
  const auto bands = detail::flagged_windows(t, log.numeric("rank_deficient"));
  for (const char* side : {"L", "R"})
    for (const char* a : {"x", "y", "z"}) {
      Panel p;
      const std::string suffix = std::string(side) + "_" + a + "[N]";
      p.title = std::string(side[0] == 'L' ? "left" : "right") + " foot, " + a;
      p.y_label = std::string("GRF ") + a + " [N]";
      p.t = t;
      p.traces.push_back({"ground model", "#1f77b4", log.numeric("u_g_" + suffix), false});
      p.traces.push_back({"constraint model", "#d62728", log.numeric("lambda_c_" + suffix), true});
      p.bands = bands;
      p.band_label = "DS, rank deficient";
      fig.panels.push_back(std::move(p));
    }
  return fig;
}

inline Figure states_figure(const CsvTable& log) {
  log.require({"t[s]", "p_B_x[m]", "p_B_y[m]", "p_B_z[m]", "pdot_B_x[m/s]", "pdot_B_y[m/s]", "pdot_B_z[m/s]",
               "roll[rad]", "pitch[rad]", "yaw[rad]"});
  Figure fig;
  fig.title = "Robot states";
  fig.columns = 1;
  const auto t = log.numeric("t[s]");
  auto panel = [&](const char* title, const char* unit, const char* stem, const char* suffix,
                   std::array<const char*, 3> axes) {
    Panel p;
    p.title = title;
    p.y_label = std::string(title) + " [" + unit + "]";
    p.t = t;
    static const char* colors[3] = {"#1f77b4", "#2ca02c", "#d62728"};
    for (int i = 0; i < 3; ++i) {
      const std::string col = std::string(stem) + axes[i] + suffix;
      p.traces.push_back({axes[i], colors[i], log.numeric(col), false});
    }
    fig.panels.push_back(std::move(p));
  };
  panel("body position", "m", "p_B_", "[m]", {"x", "y", "z"});
  panel("body velocity", "m/s", "pdot_B_", "[m/s]", {"x", "y", "z"});
  panel("attitude", "rad", "", "[rad]", {"roll", "pitch", "yaw"});
  return fig;
}

/// Writes one SVG per selected family into `out_dir`; returns the paths.
/// An empty selection writes nothing.
inline std::vector<std::string> plot(const CsvTable& log, const std::set<std::string>& selection,
                                     const std::string& out_dir, const std::string& stem = "harpy") {
  for (const auto& s : selection) {
    if (std::find(plot_families().begin(), plot_families().end(), s) == plot_families().end()) {
      throw EvalError("unknown plot '" + s + "' (expected estimate, grf or states)");
    }
  }
  std::vector<std::pair<std::string, Figure>> figs;
  for (const auto& name : plot_families()) {
    if (!selection.count(name)) continue;
    if (name == "estimate") figs.emplace_back(name, estimate_figure(log));
    if (name == "grf") figs.emplace_back(name, grf_figure(log));
    if (name == "states") figs.emplace_back(name, states_figure(log));
  }
  std::vector<std::string> written;
  if (figs.empty()) return written;
  std::filesystem::create_directories(out_dir);
  for (const auto& [name, fig] : figs) {
    const std::string path = (std::filesystem::path(out_dir) / (stem + "_" + name + ".svg")).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw EvalError("cannot open " + path + " for writing");
    f << render_svg(fig);
    written.push_back(path);
  }
  return written;
}

}  // namespace harpy
