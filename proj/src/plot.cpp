#include "gridmfg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "gridmfg/metrics.hpp"
#include "gridmfg/text_io.hpp"

namespace gridmfg {

namespace {

constexpr double kWidth = 860, kPanel = 300, kLeft = 70, kRight = 170, kTop = 40, kBottom = 40;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string esc(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

struct Range {
  double lo = 0, hi = 1;
  void pad() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

class Svg {
 public:
  explicit Svg(int panels) : height_(kTop + panels * (kPanel + kBottom) + 10) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
         << height_ << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  double top(int panel) const { return kTop + panel * (kPanel + kBottom); }

  void frame(int panel, const std::string& title, const std::string& ylabel, Range x, Range y) {
    const double t = top(panel), w = kWidth - kLeft - kRight;
    out_ << "<text x=\"" << kLeft << "\" y=\"" << t - 10 << "\" font-weight=\"bold\">" << esc(title)
         << "</text>\n"
         << "<rect x=\"" << kLeft << "\" y=\"" << t << "\" width=\"" << w << "\" height=\"" << kPanel
         << "\" fill=\"none\" stroke=\"black\"/>\n"
         << "<text x=\"" << kLeft - 6 << "\" y=\"" << t + 10 << "\" text-anchor=\"end\">" << num(y.hi)
         << "</text>\n"
         << "<text x=\"" << kLeft - 6 << "\" y=\"" << t + kPanel << "\" text-anchor=\"end\">"
         << num(y.lo) << "</text>\n"
         << "<text x=\"" << kLeft + 4 << "\" y=\"" << t + kPanel + 16 << "\">" << num(x.lo) << "</text>\n"
         << "<text x=\"" << kLeft + w << "\" y=\"" << t + kPanel + 16 << "\" text-anchor=\"end\">"
         << num(x.hi) << "</text>\n"
         << "<text transform=\"translate(16," << t + kPanel / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
         << esc(ylabel) << "</text>\n";
  }

  void polyline(int panel, const std::vector<double>& xs, const std::vector<double>& ys, Range x,
                Range y, const char* color, const std::string& label) {
    out_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out_ << (i ? " " : "") << num(px(xs[i], x)) << ',' << num(py(panel, ys[i], y));
    }
    out_ << "\"><title>" << esc(label) << "</title></polyline>\n";
  }

  void bar(int panel, double x0, double x1, double value, Range y, const char* color,
           const std::string& label) {
    const double base = py(panel, std::clamp(0.0, y.lo, y.hi), y), tip = py(panel, value, y);
    out_ << "<rect x=\"" << num(x0) << "\" y=\"" << num(std::min(base, tip)) << "\" width=\""
         << num(x1 - x0) << "\" height=\"" << num(std::abs(base - tip)) << "\" fill=\"" << color
         << "\"><title>" << esc(label) << "</title></rect>\n";
  }

  void text(double x, double y, const std::string& s, const char* anchor = "start") {
    out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor << "\">"
         << esc(s) << "</text>\n";
  }

  void legend(const std::vector<std::string>& labels) {
    const double x = kWidth - kRight + 12;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double y = kTop + 14 + 18 * i;
      out_ << "<rect x=\"" << x << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
           << kColors[i % 8] << "\"/>\n";
      text(x + 16, y, labels[i]);
    }
  }

  double px(double v, Range x) const {
    return kLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kLeft - kRight);
  }
  double py(int panel, double v, Range y) const {
    return top(panel) + kPanel - (v - y.lo) / (y.hi - y.lo) * kPanel;
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  double height_;
  std::ostringstream out_;
};

std::string label_of(const PlotSeries& s) {
  return s.scenario.empty() ? "seed " + s.seed : s.scenario + " seed " + s.seed;
}

std::vector<std::string> labels_of(const std::vector<PlotSeries>& series) {
  std::vector<std::string> out;
  for (const auto& s : series) out.push_back(label_of(s));
  return out;
}

std::string line_plots(PlotKind kind, const std::vector<PlotSeries>& series) {
  Svg svg(2);
  for (int panel = 0; panel < 2; ++panel) {
    std::vector<std::vector<double>> xs(series.size()), ys(series.size());
    Range x{1e300, -1e300}, y{1e300, -1e300};
    for (std::size_t i = 0; i < series.size(); ++i) {
      const RunLog& log = series[i].log;
      long t0 = 0, t1 = log.steps();
      if (kind == PlotKind::hub) {
        const long span = std::min<long>(5, log.days()) * log.steps_per_day;
        t0 = panel == 0 ? 0 : log.steps() - span;
        t1 = panel == 0 ? span : log.steps();
      }
      for (long t = t0; t < t1; ++t) {
        double v = 0.0;
        if (kind == PlotKind::hub) {
          v = log.at(t, 0).hub_price;
        } else {
          for (int m = 0; m < log.bus_count; ++m) {
            v += panel == 0 ? log.at(t, m).storage_after : log.at(t, m).action_mean;
          }
          v /= log.bus_count;
        }
        const double tx = kind == PlotKind::hub ? static_cast<double>(t - t0) / log.steps_per_day
                                                : static_cast<double>(t) / log.steps_per_day;
        xs[i].push_back(tx);
        ys[i].push_back(v);
        x.lo = std::min(x.lo, tx);
        x.hi = std::max(x.hi, tx);
        y.lo = std::min(y.lo, v);
        y.hi = std::max(y.hi, v);
      }
    }
    x.pad();
    y.pad();
    const std::string title =
        kind == PlotKind::hub ? (panel == 0 ? "Hub price, first 5 days" : "Hub price, last 5 days")
                              : (panel == 0 ? "Average storage level" : "Average action");
    svg.frame(panel, title, kind == PlotKind::hub ? "$/MWh" : "fraction of capacity", x, y);
    svg.text(kLeft + (kWidth - kLeft - kRight) / 2, svg.top(panel) + kPanel + 16, "day", "middle");
    for (std::size_t i = 0; i < series.size(); ++i) {
      svg.polyline(panel, xs[i], ys[i], x, y, kColors[i % 8], label_of(series[i]));
    }
  }
  svg.legend(labels_of(series));
  return svg.finish();
}

std::string bar_plot(PlotKind kind, const std::vector<PlotSeries>& series, int window_days) {
  std::vector<std::string> scenarios, seeds;
  std::map<std::pair<std::string, std::string>, double> value;
  for (const auto& s : series) {
    if (std::find(scenarios.begin(), scenarios.end(), s.scenario) == scenarios.end()) {
      scenarios.push_back(s.scenario);
    }
    if (std::find(seeds.begin(), seeds.end(), s.seed) == seeds.end()) seeds.push_back(s.seed);
    const long first = window_start(s.log, window_days);
    value[{s.scenario, s.seed}] = kind == PlotKind::imv
                                      ? imv(hub_series(s.log, first))
                                      : ex_post_cost(s.log, first, s.log.days()).average;
  }
  Range y{0.0, 0.0};
  for (const auto& [key, v] : value) {
    y.lo = std::min(y.lo, v);
    y.hi = std::max(y.hi, v);
  }
  y.hi += 0.05 * (y.hi - y.lo);
  y.pad();
  Svg svg(1);
  svg.frame(0,
            kind == PlotKind::imv ? "Hub price IMV, last " + std::to_string(window_days) + " days"
                                  : "Ex-post cost per bus, last " + std::to_string(window_days) + " days",
            kind == PlotKind::imv ? "$/MWh" : "$", Range{0, static_cast<double>(seeds.size())}, y);
  const double w = kWidth - kLeft - kRight, group = w / seeds.size();
  const double bar_w = 0.8 * group / scenarios.size();
  for (std::size_t g = 0; g < seeds.size(); ++g) {
    const double x0 = kLeft + g * group + 0.1 * group;
    svg.text(kLeft + (g + 0.5) * group, kTop + kPanel + 30, "seed " + seeds[g], "middle");
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      const auto it = value.find({scenarios[s], seeds[g]});
      if (it == value.end()) continue;
      svg.bar(0, x0 + s * bar_w, x0 + (s + 1) * bar_w, it->second, y, kColors[s % 8],
              scenarios[s] + " seed " + seeds[g] + ": " + num(it->second));
    }
  }
  std::vector<std::string> names;
  for (const auto& s : scenarios) names.push_back(s.empty() ? "run" : s);
  svg.legend(names);
  return svg.finish();
}

}  // namespace

PlotKind parse_plot_kind(std::string_view text) {
  if (text == "hub") return PlotKind::hub;
  if (text == "storage") return PlotKind::storage;
  if (text == "imv") return PlotKind::imv;
  if (text == "cost") return PlotKind::cost;
  throw ModelError("unknown plot kind '" + std::string(text) + "' (hub, storage, imv, cost)");
}

PlotSeries load_plot_series(const std::filesystem::path& runlog) {
  PlotSeries s;
  s.log = read_runlog_csv(runlog);
  const auto dir = std::filesystem::absolute(runlog).parent_path();
  const std::string name = dir.filename().string();
  if (name.rfind("seed_", 0) == 0) {
    s.seed = name.substr(5);
    s.scenario = dir.parent_path().filename().string();
  } else {
    s.seed = std::to_string(s.log.seed);
    s.scenario = name;
  }
  return s;
}

std::string render_svg(PlotKind kind, const std::vector<PlotSeries>& series, int window_days) {
  if (series.empty()) throw ModelError("nothing to plot");
  for (const auto& s : series) {
    if (s.log.records.empty()) throw ModelError("run log for " + label_of(s) + " is empty");
  }
  if (kind == PlotKind::hub || kind == PlotKind::storage) return line_plots(kind, series);
  return bar_plot(kind, series, window_days);
}

}  // namespace gridmfg
