#pragma once

// Serialisation of evaluation results (JSON, CSV) and small dependency-free
// SVG charts: per-step curves and a predicted-vs-reference scatter.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashsurr/error.hpp"
#include "crashsurr/eval/metrics.hpp"

namespace crashsurr::eval {

inline nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

inline nlohmann::json to_json(const EvalReport& rep) {
  nlohmann::json j;
  j["sample_count"] = rep.samples.size();
  j["rmse_mu_mm"] = rep.rmse_mu;
  j["rmse_final_mm"] = to_json(rep.rmse_final);
  j["relative_rmse"] = rep.relative_rmse;
  j["survival_final_error_mm"] = to_json(rep.survival_final);
  j["rmse_per_step_mm"] = rep.rmse_per_step;
  j["survival_error_per_step_mm"] = rep.survival_per_step;
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : rep.samples)
    samples.push_back({{"id", s.id},
                       {"rmse_mu_mm", s.rmse.mean},
                       {"rmse_final_mm", s.rmse.final},
                       {"relative_rmse", s.rmse.relative},
                       {"rmse_per_step_mm", s.rmse.per_step},
                       {"survival_pred_mm", s.survival.predicted},
                       {"survival_ref_mm", s.survival.reference},
                       {"survival_error_mm", s.survival.error}});
  j["samples"] = samples;
  return j;
}

// One row per sample and frame t = 0..T. RMSE at t = 0 is zero because both
// displacement fields vanish there.
inline std::string per_step_csv(const EvalReport& rep) {
  std::ostringstream os;
  os.precision(17);
  os << "sample_id,t,rmse_mm,survival_pred_mm,survival_ref_mm,survival_error_mm\n";
  for (const auto& s : rep.samples) {
    for (std::size_t t = 0; t < s.survival.error.size(); ++t) {
      const double r = t == 0 ? 0.0 : s.rmse.per_step[t - 1];
      os << s.id << ',' << t << ',' << r << ',' << s.survival.predicted[t] << ',' << s.survival.reference[t]
         << ',' << s.survival.error[t] << '\n';
    }
  }
  return os.str();
}

inline std::string summary_csv(const EvalReport& rep) {
  std::ostringstream os;
  os.precision(17);
  os << "sample_id,rmse_mu_mm,rmse_final_mm,relative_rmse,survival_final_error_mm\n";
  for (const auto& s : rep.samples)
    os << s.id << ',' << s.rmse.mean << ',' << s.rmse.final << ',' << s.rmse.relative << ','
       << s.survival.final_error << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 160, kTop = 40, kBottom = 55;
inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                           "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

inline std::string escape(const std::string& s) {
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

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline Frame frame_of(const std::vector<Series>& series, bool square) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), ErrorKind::kShapeMismatch, "chart series " + s.name + ": x/y lengths differ");
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      require(std::isfinite(s.x[k]) && std::isfinite(s.y[k]), ErrorKind::kNonFinite,
              "chart series " + s.name + " holds a non-finite value");
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.y[k]);
      y1 = std::max(y1, s.y[k]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (square) {
    x0 = y0 = std::min(x0, y0);
    x1 = y1 = std::max(x1, y1);
  }
  auto widen = [](double& lo, double& hi) {
    const double pad = hi > lo ? 0.05 * (hi - lo) : std::max(1.0, std::abs(lo) * 0.05);
    lo -= pad;
    hi += pad;
  };
  widen(x0, x1);
  widen(y0, y1);
  return {x0, x1, y0, y1};
}

inline void axes(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xlabel,
                 const std::string& ylabel) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
  const double l = kLeft, r = kWidth - kRight, t = kTop, b = kHeight - kBottom;
  os << "<rect x=\"" << l << "\" y=\"" << t << "\" width=\"" << r - l << "\" height=\"" << b - t
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0, yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    os << "<text x=\"" << f.px(xv) << "\" y=\"" << b + 16 << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    os << "<text x=\"" << l - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
    os << "<line x1=\"" << l << "\" x2=\"" << r << "\" y1=\"" << f.py(yv) << "\" y2=\"" << f.py(yv)
       << "\" stroke=\"#ddd\"/>\n";
  }
  os << "<text x=\"" << (l + r) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(xlabel)
     << "</text>\n";
  os << "<text transform=\"translate(16," << (t + b) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(ylabel) << "</text>\n";
}

inline void legend(std::ostringstream& os, const std::vector<Series>& series) {
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = kTop + 14 + 18.0 * static_cast<double>(k);
    const char* colour = kPalette[k % std::size(kPalette)];
    os << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\""
       << colour << "\"/>\n";
    os << "<text x=\"" << kWidth - kRight + 30 << "\" y=\"" << y + 1 << "\">" << escape(series[k].name)
       << "</text>\n";
  }
}

}  // namespace detail

inline std::string line_chart_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                  const std::vector<Series>& series) {
  const auto f = detail::frame_of(series, false);
  std::ostringstream os;
  detail::axes(os, f, title, xlabel, ylabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << detail::kPalette[k % std::size(detail::kPalette)]
       << "\" points=\"";
    for (std::size_t p = 0; p < s.x.size(); ++p) os << f.px(s.x[p]) << ',' << f.py(s.y[p]) << ' ';
    os << "\"/>\n";
  }
  detail::legend(os, series);
  os << "</svg>\n";
  return os.str();
}

// Scatter with a y = x reference line; points above it are predictions
// larger than the reference.
inline std::string scatter_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                               const std::vector<Series>& series) {
  const auto f = detail::frame_of(series, true);
  std::ostringstream os;
  detail::axes(os, f, title, xlabel, ylabel);
  os << "<line x1=\"" << f.px(f.x0) << "\" y1=\"" << f.py(f.x0) << "\" x2=\"" << f.px(f.x1) << "\" y2=\""
     << f.py(f.x1) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* colour = detail::kPalette[k % std::size(detail::kPalette)];
    for (std::size_t p = 0; p < series[k].x.size(); ++p)
      os << "<circle r=\"4\" fill=\"" << colour << "\" fill-opacity=\"0.8\" cx=\"" << f.px(series[k].x[p])
         << "\" cy=\"" << f.py(series[k].y[p]) << "\"/>\n";
  }
  detail::legend(os, series);
  os << "</svg>\n";
  return os.str();
}

}  // namespace crashsurr::eval
