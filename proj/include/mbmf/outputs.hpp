#pragma once

// Batch artifacts: per-run and aggregate CSV files, SVG line charts for the
// reward, cost and selection curves, and a plain-text phase report.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mbmf/errors.hpp"
#include "mbmf/harness.hpp"

namespace mbmf {

inline constexpr const char* kRunCsvHeader =
    "step,state,winner,action,next_state,reward,cost_units,cost_seconds,h_mb,h_mf,kappa,p_select_mb,p_select_mf,"
    "episode";

inline constexpr const char* kAggregateCsvHeader =
    "step,mean_cum_reward,std_cum_reward,mean_cum_cost,std_cum_cost,mean_p_select_mb,std_p_select_mb,"
    "mean_p_select_mf,std_p_select_mf";

// Shortest text that round-trips; "nan" for NaN.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline void write_run_csv(const RunLog& log, std::ostream& out) {
  out << kRunCsvHeader << '\n';
  for (const auto& r : log.rows) {
    out << r.step << ',' << r.state << ',' << r.winner << ',' << r.action << ',' << r.next_state << ','
        << format_double(r.reward) << ',' << r.cost_units << ',' << format_double(r.cost_seconds) << ','
        << format_double(r.h_mb) << ',' << format_double(r.h_mf) << ',' << format_double(r.kappa) << ','
        << format_double(r.p_select_mb) << ',' << format_double(r.p_select_mf) << ',' << r.episode << '\n';
  }
}

inline void write_aggregate_csv(const AggregateSummary& s, std::ostream& out) {
  out << kAggregateCsvHeader << '\n';
  for (std::size_t t = 0; t < s.steps(); ++t) {
    out << t << ',' << format_double(s.mean_reward[t]) << ',' << format_double(s.std_reward[t]) << ','
        << format_double(s.mean_cost[t]) << ',' << format_double(s.std_cost[t]) << ',' << format_double(s.mean_p_mb[t])
        << ',' << format_double(s.std_p_mb[t]) << ',' << format_double(s.mean_p_mf[t]) << ','
        << format_double(s.std_p_mf[t]) << '\n';
  }
}

struct ChartSeries {
  std::string label;
  std::vector<double> values;
};

namespace detail {

inline const char* series_color(std::size_t i) {
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return kColors[i % (sizeof kColors / sizeof *kColors)];
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fixed(double x, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << x;
  return os.str();
}

}  // namespace detail

// Static line chart; x is the step index. At most max_points vertices are
// drawn per series.
inline std::string render_svg_chart(const std::string& title, const std::string& y_label,
                                    const std::vector<ChartSeries>& series, std::size_t max_points = 800) {
  constexpr double W = 720, H = 420, L = 70, R = 150, T = 40, B = 50;
  std::size_t n = 0;
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
  }
  lo = std::min(lo, 0.0);
  if (!(hi > lo)) hi = lo + 1.0;
  const double xmax = n > 1 ? static_cast<double>(n - 1) : 1.0;
  auto px = [&](double x) { return L + (W - L - R) * x / xmax; };
  auto py = [&](double y) { return H - B - (H - T - B) * (y - lo) / (hi - lo); };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n"
      << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << detail::xml_escape(title) << "</text>\n"
      << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = lo + (hi - lo) * k / 4.0, xv = xmax * k / 4.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << detail::fixed(py(yv) + 4, 1)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fixed(yv, 3) << "</text>\n"
        << "<text x=\"" << detail::fixed(px(xv), 1) << "\" y=\"" << H - B + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fixed(xv, 0)
        << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">step</text>\n"
      << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << detail::xml_escape(y_label)
      << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& v = series[k].values;
    const std::size_t stride = std::max<std::size_t>(1, (v.size() + max_points - 1) / max_points);
    out << "<polyline fill=\"none\" stroke=\"" << detail::series_color(k) << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < v.size(); i += stride) {
      if (!std::isfinite(v[i])) continue;
      out << (first ? "" : " ") << detail::fixed(px(static_cast<double>(i)), 2) << ',' << detail::fixed(py(v[i]), 2);
      first = false;
    }
    out << "\"/>\n";
    const double ly = T + 18.0 * static_cast<double>(k) + 10;
    out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << detail::series_color(k) << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << detail::xml_escape(series[k].label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

inline std::string format_phase_report(const std::string& agent, const PhaseReport& report) {
  std::ostringstream out;
  out << agent << " (smoothing window " << report.window << ")\n";
  for (std::size_t k = 0; k < report.periods.size(); ++k) {
    const auto& p = report.periods[k];
    out << "  period " << k << " [" << p.begin << ", " << p.end << "): ";
    out << "MF->MB " << (p.mf_to_mb ? std::to_string(*p.mf_to_mb) : std::string("absent")) << ", ";
    out << "MB->MF " << (p.mb_to_mf ? std::to_string(*p.mb_to_mf) : std::string("absent")) << '\n';
  }
  return out.str();
}

inline std::string format_three_phase_report(const ThreePhaseReport& r) {
  auto yn = [](bool b) { return b ? "yes" : "no"; };
  std::ostringstream out;
  const auto& m = r.mean_curve;
  out << "  mean curve: first reward " << (m.first_reward ? std::to_string(*m.first_reward) : std::string("absent"))
      << "; MF before discovery " << yn(m.mf_before_discovery) << "; MB takes lead " << yn(m.mb_takes_lead)
      << "; MF retakes lead " << yn(m.mf_retakes_lead) << "; MB leads after change " << yn(m.mb_after_change) << '\n';
  const auto rates = r.detection_rates();
  out << "  per-run detection rates: MF before discovery " << format_double(rates[0]) << ", MB takes lead "
      << format_double(rates[1]) << ", MF retakes lead " << format_double(rates[2]) << ", MB leads after change "
      << format_double(rates[3]) << ", full pattern " << format_double(rates[4]) << '\n';
  return out.str();
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace detail

// Writes, for each batch, run_<AGENT>_seed<k>.csv and aggregate_<AGENT>.csv,
// then reward.svg, cost.svg, selection.svg and phases.txt covering all
// batches.
inline void emit_outputs(const std::vector<BatchResult>& batches, const std::string& dir, std::size_t phase_window,
                         const std::vector<std::size_t>& changes, std::size_t lead_window = 300) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);

  std::vector<ChartSeries> reward, cost, selection;
  std::string phases;
  for (const auto& b : batches) {
    const std::string agent = to_string(b.summary.agent);
    for (const auto& log : b.logs) {
      std::ostringstream csv;
      write_run_csv(log, csv);
      detail::write_text(fs::path(dir) / ("run_" + agent + "_seed" + std::to_string(log.seed) + ".csv"), csv.str());
    }
    std::ostringstream agg;
    write_aggregate_csv(b.summary, agg);
    detail::write_text(fs::path(dir) / ("aggregate_" + agent + ".csv"), agg.str());

    reward.push_back({agent, b.summary.mean_reward});
    cost.push_back({agent, b.summary.mean_cost});
    if (b.summary.agent == AgentKind::MC_EC || b.summary.agent == AgentKind::MC_RND) {
      selection.push_back({agent + " MB", moving_average(b.summary.mean_p_mb, phase_window)});
      selection.push_back({agent + " MF", moving_average(b.summary.mean_p_mf, phase_window)});
      phases += format_phase_report(agent, detect_phases(b.summary.mean_p_mf, phase_window, changes));
      if (!changes.empty()) phases += format_three_phase_report(evaluate_three_phases(b, phase_window, changes.front(), lead_window));
    }
  }
  if (phases.empty()) phases = "no arbitrated agent in this batch\n";

  detail::write_text(fs::path(dir) / "reward.svg", render_svg_chart("Mean cumulative reward", "reward", reward));
  detail::write_text(fs::path(dir) / "cost.svg",
                     render_svg_chart("Mean cumulative inference cost", "seconds-equivalent", cost));
  detail::write_text(fs::path(dir) / "selection.svg",
                     render_svg_chart("Smoothed expert selection probability", "probability", selection));
  detail::write_text(fs::path(dir) / "phases.txt", phases);
}

}  // namespace mbmf
