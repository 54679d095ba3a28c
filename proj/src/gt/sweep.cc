#include "rqi/gt/sweep.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "rqi/error.h"
#include "rqi/util/csv.h"
#include "rqi/util/file.h"
#include "rqi/util/parallel.h"
#include "rqi/util/rng.h"

namespace rqi {
namespace {

struct Grids {
  std::vector<std::string> metrics;
  std::vector<std::string> contents;
  std::vector<std::string> models;
  std::vector<ScoreGrid> grids;  // per metric
};

Grids load_grids(const MetricScoreTable& table) {
  Grids g;
  g.metrics = table.metrics();
  if (g.metrics.empty()) throw SchemaError("metric table is empty");
  g.contents = table.contents();
  g.models = table.models();
  for (const auto& m : g.metrics) g.grids.push_back(table.grid(m));
  return g;
}

void check_fractions(const std::vector<double>& fractions) {
  if (fractions.empty()) throw ValidationError("no discard fractions given");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double f = fractions[i];
    if (!(f >= 0.0 && f < 1.0)) throw ValidationError(fmt::format("discard fraction {} outside [0, 1)", f));
    if (i > 0 && !(f > fractions[i - 1])) throw ValidationError("discard fractions must increase strictly");
  }
}

// keep[c] marks retained contents (indices into the sorted content list).
double retained_mean(const ScoreGrid& grid, std::size_t model, const std::vector<char>& keep) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < grid.contents.size(); ++c) {
    if (!keep[c]) continue;
    sum += grid.values[c][model];
    ++n;
  }
  return sum / static_cast<double>(n);
}

// mean[metric][model][fraction] for a removal order over content indices.
std::vector<std::vector<std::vector<double>>> sweep_means(const Grids& g, const std::vector<std::size_t>& order,
                                                          const std::vector<double>& fractions) {
  const std::size_t n = g.contents.size();
  std::vector<std::vector<std::vector<double>>> mean(
      g.metrics.size(), std::vector<std::vector<double>>(g.models.size(), std::vector<double>(fractions.size())));
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    std::vector<char> keep(n, 1);
    const std::size_t k = discard_count(fractions[f], n);
    for (std::size_t i = 0; i < k; ++i) keep[order[i]] = 0;
    for (std::size_t k2 = 0; k2 < g.metrics.size(); ++k2) {
      for (std::size_t m = 0; m < g.models.size(); ++m) mean[k2][m][f] = retained_mean(g.grids[k2], m, keep);
    }
  }
  return mean;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::vector<double> default_fractions() {
  std::vector<double> f;
  for (int i = 0; i <= 8; ++i) f.push_back(i / 10.0);
  return f;
}

std::size_t discard_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

std::vector<std::string> quality_order(const MetricScoreTable& table) {
  std::vector<std::pair<double, std::string>> keyed;
  for (const auto& c : table.contents()) {
    auto it = table.gt_quality.find(c);
    if (it == table.gt_quality.end()) throw SchemaError("no gt_quality for content '" + c + "'");
    if (!std::isfinite(it->second)) throw SchemaError("non-finite gt_quality for content '" + c + "'");
    keyed.emplace_back(it->second, c);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  for (auto& [q, c] : keyed) out.push_back(c);
  return out;
}

SweepResult discard_sweep(const MetricScoreTable& table, const std::vector<double>& fractions,
                          const MetricDirections& directions) {
  check_fractions(fractions);
  const Grids g = load_grids(table);
  const auto ordered = quality_order(table);
  std::vector<std::size_t> order;
  for (const auto& c : ordered) {
    order.push_back(std::lower_bound(g.contents.begin(), g.contents.end(), c) - g.contents.begin());
  }

  SweepResult r;
  r.fractions = fractions;
  r.metrics = g.metrics;
  r.models = g.models;
  r.n_contents = g.contents.size();
  for (double f : fractions) r.retained.push_back(g.contents.size() - discard_count(f, g.contents.size()));
  for (const auto& m : g.metrics) r.higher_is_better.push_back(directions.higher_is_better(m));
  r.mean = sweep_means(g, order, fractions);

  r.ranking.resize(g.metrics.size());
  for (std::size_t k = 0; k < g.metrics.size(); ++k) {
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      std::vector<std::size_t> idx(g.models.size());
      std::iota(idx.begin(), idx.end(), 0);
      const bool hib = r.higher_is_better[k];
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double va = r.mean[k][a][f], vb = r.mean[k][b][f];
        return hib ? va > vb : va < vb;
      });
      r.ranking[k].push_back(std::move(idx));
    }
  }
  return r;
}

ControlResult random_discard_control(const MetricScoreTable& table, const std::vector<double>& fractions,
                                     int trials, std::uint64_t seed, int jobs) {
  if (trials < 2) throw ValidationError("the random control needs at least 2 trials");
  check_fractions(fractions);
  const Grids g = load_grids(table);
  const std::size_t n = g.contents.size();

  ControlResult r;
  r.fractions = fractions;
  r.metrics = g.metrics;
  r.models = g.models;
  r.trials = trials;
  r.seed = seed;
  r.trial_means = parallel_map(static_cast<std::size_t>(trials), jobs, [&](std::size_t t) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(derive_seed(seed, t));
    rng.shuffle(std::span<std::size_t>(order));
    return sweep_means(g, order, fractions);
  });

  const auto shape = std::vector<std::vector<std::vector<double>>>(
      g.metrics.size(), std::vector<std::vector<double>>(g.models.size(), std::vector<double>(fractions.size())));
  r.mean = shape;
  r.stddev = shape;
  for (std::size_t k = 0; k < g.metrics.size(); ++k) {
    for (std::size_t m = 0; m < g.models.size(); ++m) {
      for (std::size_t f = 0; f < fractions.size(); ++f) {
        // Shifted by the first trial so that identical trials give an exact
        // mean and a zero std.
        const double v0 = r.trial_means.front()[k][m][f];
        double sum = 0.0;
        for (const auto& tm : r.trial_means) sum += tm[k][m][f] - v0;
        const double mu = v0 + sum / trials;
        double ss = 0.0;
        for (const auto& tm : r.trial_means) ss += (tm[k][m][f] - mu) * (tm[k][m][f] - mu);
        r.mean[k][m][f] = mu;
        r.stddev[k][m][f] = std::sqrt(ss / (trials - 1));
      }
    }
  }
  return r;
}

std::vector<RankChange> rank_change_report(const SweepResult& sweep) {
  if (sweep.fractions.size() < 2 || sweep.fractions.front() != 0.0) {
    throw ValidationError("rank changes need a sweep starting at fraction 0 with at least two fractions");
  }
  std::vector<RankChange> out;
  for (std::size_t k = 0; k < sweep.metrics.size(); ++k) {
    const auto& first = sweep.ranking[k].front();
    const auto& last = sweep.ranking[k].back();
    std::vector<int> r0(sweep.models.size()), r1(sweep.models.size());
    for (std::size_t i = 0; i < first.size(); ++i) r0[first[i]] = static_cast<int>(i) + 1;
    for (std::size_t i = 0; i < last.size(); ++i) r1[last[i]] = static_cast<int>(i) + 1;
    for (std::size_t m = 0; m < sweep.models.size(); ++m) {
      out.push_back(RankChange{sweep.metrics[k], sweep.models[m], r0[m], r1[m], r1[m] - r0[m]});
    }
  }
  return out;
}

std::string render_sweep_svg(const SweepResult& sweep, const ControlResult& control, std::size_t metric) {
  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
  const auto& fr = sweep.fractions;
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t m = 0; m < sweep.models.size(); ++m) {
    for (std::size_t f = 0; f < fr.size(); ++f) {
      const double c = control.mean[metric][m][f], s = control.stddev[metric][m][f];
      lo = std::min({lo, sweep.mean[metric][m][f], c - s});
      hi = std::max({hi, sweep.mean[metric][m][f], c + s});
    }
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double x_max = fr.back() > 0 ? fr.back() : 1.0;
  auto px = [&](double f) { return kLeft + (kW - kLeft - kRight) * f / x_max; };
  auto py = [&](double v) { return kTop + (kH - kTop - kBottom) * (hi - v) / (hi - lo); };

  std::string s;
  s += fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
      kW, kH);
  s += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kW, kH);
  s += fmt::format("<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">",
                   (kLeft + kW - kRight) / 2);
  s += xml_escape(sweep.metrics[metric]) + " vs. discarded GT fraction</text>\n";
  // Axes.
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kLeft, kH - kBottom,
                   kW - kRight);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft, kTop,
                   kH - kBottom);
  for (double f : fr) {
    s += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"middle\">{:.0f}%</text>\n",
        px(f), kH - kBottom + 16, f * 100);
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4;
    s += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"end\">{:.4g}</text>\n",
        kLeft - 6, py(v) + 4, v);
  }
  for (std::size_t m = 0; m < sweep.models.size(); ++m) {
    const char* colour = kPalette[m % std::size(kPalette)];
    // Random-control band: mean +- one std, upper edge left to right then back.
    std::string band;
    for (std::size_t f = 0; f < fr.size(); ++f) {
      band += fmt::format("{:.2f},{:.2f} ", px(fr[f]), py(control.mean[metric][m][f] + control.stddev[metric][m][f]));
    }
    for (std::size_t f = fr.size(); f-- > 0;) {
      band += fmt::format("{:.2f},{:.2f} ", px(fr[f]), py(control.mean[metric][m][f] - control.stddev[metric][m][f]));
    }
    band.pop_back();
    s += fmt::format("<polygon class=\"control\" points=\"{}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
                     band, colour);
    std::string line;
    for (std::size_t f = 0; f < fr.size(); ++f) {
      line += fmt::format("{:.2f},{:.2f} ", px(fr[f]), py(sweep.mean[metric][m][f]));
    }
    line.pop_back();
    s += fmt::format("<polyline class=\"sweep\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                     line, colour);
    const double ly = kTop + 18.0 * static_cast<double>(m);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                     kW - kRight + 10, ly, kW - kRight + 30, colour);
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">", kW - kRight + 36,
                     ly + 4);
    s += xml_escape(sweep.models[m]) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void emit_sweep_artifacts(const SweepResult& sweep, const ControlResult& control,
                          const std::filesystem::path& out_dir) {
  if (sweep.fractions != control.fractions || sweep.metrics != control.metrics || sweep.models != control.models) {
    throw ValidationError("sweep and control disagree on fractions, metrics or models");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  CsvTable sw{{"metric", "model", "fraction", "mean"}, {}};
  CsvTable ct{{"metric", "model", "fraction", "mean", "std"}, {}};
  for (std::size_t k = 0; k < sweep.metrics.size(); ++k) {
    for (std::size_t m = 0; m < sweep.models.size(); ++m) {
      for (std::size_t f = 0; f < sweep.fractions.size(); ++f) {
        const std::string frac = format_number(sweep.fractions[f]);
        sw.rows.push_back({sweep.metrics[k], sweep.models[m], frac, format_number(sweep.mean[k][m][f])});
        ct.rows.push_back({sweep.metrics[k], sweep.models[m], frac, format_number(control.mean[k][m][f]),
                           format_number(control.stddev[k][m][f])});
      }
    }
  }
  write_csv(sw, out_dir / "sweep.csv");
  write_csv(ct, out_dir / "control.csv");

  if (sweep.fractions.size() >= 2 && sweep.fractions.front() == 0.0) {
    CsvTable rc{{"metric", "model", "rank_start", "rank_end", "delta"}, {}};
    for (const auto& r : rank_change_report(sweep)) {
      rc.rows.push_back({r.metric, r.model, std::to_string(r.rank_start), std::to_string(r.rank_end),
                         std::to_string(r.delta)});
    }
    write_csv(rc, out_dir / "rank_changes.csv");
  }

  CsvTable meta{{"key", "value"}, {}};
  meta.rows.push_back({"gt_source", sweep.gt_source});
  meta.rows.push_back({"n_contents", std::to_string(sweep.n_contents)});
  meta.rows.push_back({"control_trials", std::to_string(control.trials)});
  meta.rows.push_back({"control_seed", std::to_string(control.seed)});
  write_csv(meta, out_dir / "sweep_meta.csv");

  for (std::size_t k = 0; k < sweep.metrics.size(); ++k) {
    write_text_file(out_dir / ("sweep_" + sweep.metrics[k] + ".svg"), render_sweep_svg(sweep, control, k));
  }
}

}  // namespace rqi
