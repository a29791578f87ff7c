#include "fm/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Core>

#include "fm/error.hpp"
#include "fm/manifold.hpp"
#include "fm/npy.hpp"

namespace fm {

namespace {

constexpr double kPanelW = 420, kPanelH = 300, kMargin = 50, kTitleH = 36;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

void text(std::string& out, double x, double y, const std::string& s, const char* anchor,
          int size = 11) {
  out += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
         "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
}

void render_panel(std::string& out, const Panel& p, double ox, double oy) {
  const double x0 = ox + kMargin, y0 = oy + 24, w = kPanelW - kMargin - 16,
               h = kPanelH - 24 - 40;
  text(out, ox + kPanelW / 2, oy + 16, p.title, "middle", 13);
  out += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(w) +
         "\" height=\"" + num(h) + "\" fill=\"none\" stroke=\"#444\"/>\n";

  Range xr, yr;
  if (p.kind == Panel::Kind::bars) {
    xr.lo = 0;
    xr.hi = static_cast<double>(p.bar_labels.size());
    yr.add(0);
  }
  for (const auto& s : p.series) {
    for (double v : s.y) yr.add(v);
    if (p.kind == Panel::Kind::lines)
      for (double v : s.x) xr.add(v);
  }
  xr.finish();
  yr.finish();
  auto sx = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * w; };
  auto sy = [&](double v) { return y0 + h - (v - yr.lo) / (yr.hi - yr.lo) * h; };

  for (int i = 0; i <= 4; ++i) {
    const double v = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    text(out, x0 - 4, sy(v) + 4, tick(v), "end", 9);
  }
  if (p.kind == Panel::Kind::lines) {
    for (int i = 0; i <= 4; ++i) {
      const double v = xr.lo + (xr.hi - xr.lo) * i / 4.0;
      text(out, sx(v), y0 + h + 13, tick(v), "middle", 9);
    }
  }
  text(out, x0 + w / 2, y0 + h + 30, p.x_label, "middle");
  out += "<text x=\"" + num(ox + 12) + "\" y=\"" + num(y0 + h / 2) +
         "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 " + num(ox + 12) +
         " " + num(y0 + h / 2) + ")\">" + escape(p.y_label) + "</text>\n";

  if (p.kind == Panel::Kind::bars) {
    const auto& y = p.series.front().y;
    const double bw = w / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double top = sy(std::max(y[i], 0.0)), base = sy(std::min(y[i], 0.0));
      out += "<rect x=\"" + num(x0 + bw * i + bw * 0.1) + "\" y=\"" + num(top) +
             "\" width=\"" + num(bw * 0.8) + "\" height=\"" + num(base - top) + "\" fill=\"" +
             kPalette[0] + "\"/>\n";
      if (y.size() <= 24)
        out += "<text x=\"" + num(x0 + bw * (i + 0.5)) + "\" y=\"" + num(y0 + h + 12) +
               "\" font-size=\"7\" text-anchor=\"middle\">" + escape(p.bar_labels[i]) +
               "</text>\n";
    }
    return;
  }
  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const auto& s = p.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      pts += num(sx(s.x[i])) + "," + num(sy(s.y[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    if (!s.label.empty()) {
      const double ly = y0 + 12 + 12.0 * static_cast<double>(k);
      out += "<line x1=\"" + num(x0 + w - 90) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
             num(x0 + w - 76) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\"/>\n";
      text(out, x0 + w - 72, ly, s.label, "start", 9);
    }
  }
}

void write_text(const std::filesystem::path& path, const std::string& s) {
  write_file_bytes(path, {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

std::vector<double> iota_x(std::size_t n, double start = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = start + static_cast<double>(i);
  return x;
}

Panel line_panel(std::string title, std::string x_label, std::string y_label) {
  Panel p;
  p.title = std::move(title);
  p.x_label = std::move(x_label);
  p.y_label = std::move(y_label);
  return p;
}

Panel histogram_panel(const std::string& title, const std::string& x_label,
                      const std::vector<double>& values, int bins) {
  if (values.empty()) throw PlotError("no data");
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
  const auto counts = histogram(v, bins, lo, hi);
  Panel p;
  p.title = title;
  p.x_label = x_label;
  p.y_label = "count";
  p.kind = Panel::Kind::bars;
  Series s;
  for (int b = 0; b < bins; ++b) {
    s.y.push_back(counts[b]);
    p.bar_labels.push_back(tick(lo + (hi - lo) * (b + 0.5) / bins));
  }
  p.series.push_back(std::move(s));
  return p;
}

}  // namespace

std::string render_svg(const std::string& title, const std::vector<Panel>& panels, int columns) {
  if (panels.empty()) throw PlotError("no data");
  for (const auto& p : panels) {
    bool any = false;
    for (const auto& s : p.series) any = any || !s.y.empty();
    if (!any) throw PlotError("no data");
    if (p.kind == Panel::Kind::bars && p.series.front().y.size() != p.bar_labels.size())
      throw PlotError("bar labels do not match values");
    for (const auto& s : p.series)
      if (p.kind == Panel::Kind::lines && s.x.size() != s.y.size())
        throw PlotError("series x and y lengths differ");
  }
  columns = std::max(1, std::min<int>(columns, static_cast<int>(panels.size())));
  const int rows = (static_cast<int>(panels.size()) + columns - 1) / columns;
  const double width = kPanelW * columns, height = kTitleH + kPanelH * rows;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
                    "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) + " " +
                    num(height) + "\" font-family=\"sans-serif\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  text(out, width / 2, 24, title, "middle", 16);
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const double ox = kPanelW * static_cast<double>(i % columns);
    const double oy = kTitleH + kPanelH * static_cast<double>(i / columns);
    render_panel(out, panels[i], ox, oy);
  }
  out += "</svg>\n";
  return out;
}

Panel selectivity_histogram_panel(const std::vector<double>& rho, int bins) {
  return histogram_panel("Latent selectivity distribution", "rho", rho, bins);
}

Panel selectivity_cdf_panel(const std::vector<double>& rho) {
  if (rho.empty()) throw PlotError("no data");
  Eigen::VectorXd a(static_cast<Eigen::Index>(rho.size()));
  for (std::size_t i = 0; i < rho.size(); ++i) a[static_cast<Eigen::Index>(i)] = std::abs(rho[i]);
  Series s;
  for (const auto& [v, f] : empirical_cdf(a)) {
    s.x.push_back(v);
    s.y.push_back(f);
  }
  Panel p;
  p.title = "CDF of |rho|";
  p.x_label = "|rho|";
  p.y_label = "fraction of latents";
  p.series.push_back(std::move(s));
  return p;
}

PlotOutput emit_plots(const RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  PlotOutput out;
  auto emit = [&](const std::string& name, const std::string& title,
                  const std::vector<Panel>& panels, int columns) {
    const auto path = dir / name;
    write_text(path, render_svg(title, panels, columns));
    out.files.push_back(path);
  };

  if (report.stage1) {
    Panel p;
    p.title = "Forensic importance";
    p.x_label = "block.submodule";
    p.y_label = "mean |delta logit|";
    p.kind = Panel::Kind::bars;
    Series s;
    for (const auto& r : report.stage1->scores) {
      s.y.push_back(r.score);
      p.bar_labels.push_back(std::to_string(r.block) + "." + std::string(to_string(r.submodule)));
    }
    p.series.push_back(std::move(s));
    emit("importance.svg", "Stage 1: layerwise forensic importance", {p}, 1);
  } else {
    out.warnings.push_back("stage1 missing: importance plot skipped");
  }

  if (report.stage2) {
    Panel total = line_panel("Total loss", "epoch", "loss"),
          recon = line_panel("Reconstruction loss", "epoch", "loss"),
          penalty = line_panel("Sparsity penalty", "epoch", "penalty"),
          activity = line_panel("Mean activity ratio", "epoch", "active fraction");
    for (const auto& l : report.stage2->layers) {
      const auto& e = l.trace.epochs;
      Series st{l.layer_id, iota_x(e.size()), {}}, sr = st, sp = st, sa = st;
      for (const auto& ep : e) {
        st.y.push_back(ep.total_loss);
        sr.y.push_back(ep.recon_loss);
        sp.y.push_back(ep.sparsity_penalty);
        sa.y.push_back(ep.mean_activity_ratio);
      }
      total.series.push_back(st);
      recon.series.push_back(sr);
      penalty.series.push_back(sp);
      activity.series.push_back(sa);
    }
    emit("sae_training.svg", "Stage 2: SAE training diagnostics",
         {total, recon, penalty, activity}, 2);

    std::vector<double> rho;
    for (const auto& l : report.stage2->layers)
      rho.insert(rho.end(), l.latent_rho.begin(), l.latent_rho.end());
    if (rho.empty()) throw PlotError("no data");
    std::vector<double> sorted_abs(rho.size());
    std::transform(rho.begin(), rho.end(), sorted_abs.begin(), [](double v) { return std::abs(v); });
    std::sort(sorted_abs.begin(), sorted_abs.end(), std::greater<>());
    Panel ranked = line_panel("Latents ranked by |rho|", "rank", "|rho|");
    ranked.series.push_back({"", iota_x(sorted_abs.size()), sorted_abs});
    emit("selectivity.svg", "Stage 2: selectivity of SAE latents",
         {selectivity_histogram_panel(rho), ranked, selectivity_cdf_panel(rho)}, 2);
  } else {
    out.warnings.push_back("stage2 missing: training and selectivity plots skipped");
  }

  if (report.stage3 && !report.stage3->empty()) {
    Panel p = line_panel("Accuracy under latent steering", "alpha", "accuracy");
    for (const auto& c : *report.stage3) p.series.push_back({c.vector_id, c.alphas, c.accuracy});
    emit("steering.svg", "Stage 3: steering curves", {p}, 1);
  } else {
    out.warnings.push_back("stage3 missing: steering plot skipped");
  }

  if (report.stage2b && !report.stage2b->empty()) {
    std::vector<double> dims, curv, sel;
    Panel by_layer = line_panel("Selectivity by layer", "layer", "selectivity");
    for (const auto& m : *report.stage2b) {
      Series s{std::string(to_string(m.artifact_kind)), {}, {}};
      for (std::size_t i = 0; i < m.layers.size(); ++i) {
        dims.push_back(m.layers[i].intrinsic_dim);
        curv.push_back(m.layers[i].curvature);
        sel.push_back(m.layers[i].selectivity);
        s.x.push_back(static_cast<double>(i + 1));
        s.y.push_back(m.layers[i].selectivity);
      }
      by_layer.series.push_back(std::move(s));
    }
    emit("manifold.svg", "Stage 2b: forensic manifold metrics",
         {histogram_panel("Intrinsic dimension", "d_int", dims, 8),
          histogram_panel("Curvature", "C", curv, 10),
          histogram_panel("Selectivity", "S", sel, 10), by_layer},
         2);
  } else {
    out.warnings.push_back("stage2b missing: manifold plot skipped");
  }
  return out;
}

}  // namespace fm
