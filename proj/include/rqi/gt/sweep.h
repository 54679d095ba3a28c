#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rqi/tables.h"

namespace rqi {

// 0, 0.1, ..., 0.8.
std::vector<double> default_fractions();

// Contents removed at fraction f out of n: floor(f * n), with a 1e-9 guard so
// that 0.3 * 10 removes 3 despite binary rounding.
std::size_t discard_count(double fraction, std::size_t n);

// Content ids sorted by ascending gt_quality, ties by content id. Throws
// SchemaError if any content of the table lacks a gt_quality.
std::vector<std::string> quality_order(const MetricScoreTable& table);

struct SweepResult {
  std::vector<double> fractions;
  std::vector<std::string> metrics;  // lexicographic
  std::vector<std::string> models;   // lexicographic
  std::size_t n_contents = 0;
  std::vector<std::size_t> retained;  // per fraction
  // mean[metric][model][fraction]
  std::vector<std::vector<std::vector<double>>> mean;
  // ranking[metric][fraction]: model indices, best first.
  std::vector<std::vector<std::vector<std::size_t>>> ranking;
  std::vector<bool> higher_is_better;  // per metric
  std::string gt_source = "csv";
};

// Quality-ordered discard sweep. At every fraction the lowest floor(f * n)
// contents in quality_order are dropped and each (metric, model) mean is
// taken over the rest, summed in content id order.
SweepResult discard_sweep(const MetricScoreTable& table, const std::vector<double>& fractions,
                          const MetricDirections& directions);

struct ControlResult {
  std::vector<double> fractions;
  std::vector<std::string> metrics;
  std::vector<std::string> models;
  int trials = 0;
  std::uint64_t seed = 0;
  // [metric][model][fraction] over trials; std uses the n-1 denominator.
  std::vector<std::vector<std::vector<double>>> mean;
  std::vector<std::vector<std::vector<double>>> stddev;
  // trial_means[trial][metric][model][fraction], kept for diagnostics.
  std::vector<std::vector<std::vector<std::vector<double>>>> trial_means;
};

// Random-discard control. Trial t shuffles the contents with
// derive_seed(seed, t) and drops the first floor(f * n) of that permutation
// at each fraction, so subsets are nested like the quality-ordered sweep.
ControlResult random_discard_control(const MetricScoreTable& table, const std::vector<double>& fractions,
                                     int trials, std::uint64_t seed, int jobs = 1);

struct RankChange {
  std::string metric;
  std::string model;
  int rank_start = 0;  // at the first fraction (0 %)
  int rank_end = 0;    // at the last fraction
  int delta = 0;       // rank_end - rank_start; negative means the model climbed
};

// One row per metric x model. Requires a sweep whose first fraction is 0 and
// which has at least two fractions (ValidationError otherwise).
std::vector<RankChange> rank_change_report(const SweepResult& sweep);

// Writes sweep.csv, control.csv, rank_changes.csv, sweep_meta.csv and one
// sweep_<metric>.svg per metric. Throws ValidationError when the two results
// disagree on fractions, metrics or models and IoError on write failure.
void emit_sweep_artifacts(const SweepResult& sweep, const ControlResult& control,
                          const std::filesystem::path& out_dir);

std::string render_sweep_svg(const SweepResult& sweep, const ControlResult& control, std::size_t metric);

}  // namespace rqi
