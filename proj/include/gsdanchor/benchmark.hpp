// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include <gsdanchor/estimator.hpp>
#include <gsdanchor/ingest.hpp>

namespace gsdanchor {

/// |pred - gt| / gt.
double relative_error(double pred, double gt);

struct EvalRecord
{
    std::string image_id;
    std::optional<double> gsd_pred;
    double gsd_gt = 0.0;
    /// Present iff gsd_pred is.
    std::optional<double> rel_error;
    double confidence = 0.0;
    EstimatorPath path = EstimatorPath::no_detections;
    std::size_t n_filtered = 0;
    bool guard_triggered = false;
};

EvalRecord make_record(std::string image_id, const GsdEstimate& estimate, double gsd_gt);

nlohmann::json to_json(const EvalRecord& record);

/// Accepts a per-image prediction line. gsd_gt and rel_error may be absent;
/// gsd_gt is then filled in by the caller.
EvalRecord eval_record_from_json(const nlohmann::json& doc);

struct BucketStats
{
    std::string name;
    std::size_t n = 0;
    std::optional<double> median_err;
    std::optional<double> mean_err;
};

struct EvalReport
{
    std::size_t n_evaluated = 0;
    std::size_t n_no_estimate = 0;
    double median_err = 0.0;
    double mean_err = 0.0;
    /// Strict thresholds: rel_error < 0.10 and < 0.20.
    double frac_lt_10 = 0.0;
    double frac_lt_20 = 0.0;
    /// Pearson r between c_final and rel_error; needs three records and spread.
    std::optional<double> confidence_error_correlation;
    /// n_filtered >= 20, n_filtered < 5, gsd_gt < 0.3, gsd_gt > 0.7.
    std::vector<BucketStats> per_bucket;
};

/// Aggregates records with an estimate; the rest only count in n_no_estimate.
/// Throws when no record carries an estimate.
EvalReport evaluate(const std::vector<EvalRecord>& records);

nlohmann::json to_json(const EvalReport& report);

std::string format_report(const EvalReport& report);

/// Deterministic synthetic image: vehicles of known physical length seen at a
/// known GSD, with Gaussian jitter on the pixel length and verbatim false positives.
struct SyntheticScene
{
    double true_gsd = 0.1;
    std::vector<double> vehicle_lengths_m;
    std::vector<double> false_positive_lengths_px;
    double detector_noise_sigma = 0.0;
    std::uint64_t seed = 0;
    std::string image_id = "synthetic";
};

struct EvalImage
{
    DetectionSet detections;
    ImageMeta meta;
};

/// Vehicle widths are 0.36 l_ref_truth in metres (capped below the length).
EvalImage generate_scene(const SyntheticScene& scene, double l_ref_truth);

struct FleetComponent
{
    double weight = 1.0;
    double mean_m = 5.0;
    double sd_m = 0.3;
};

/// Physical vehicle-length distribution as a Gaussian mixture.
struct FleetMixture
{
    std::vector<FleetComponent> components{{0.8, 5.0, 0.3}, {0.2, 8.0, 0.5}};

    double pdf(double length_m) const;
    /// Arg-max of the mixture density (dense search plus refinement).
    double mode() const;
};

std::vector<double> sample_fleet(const FleetMixture& fleet, std::size_t n, std::mt19937_64& rng);

struct TrialPlan
{
    std::size_t n_trials = 200;
    std::size_t min_vehicles = 20;
    std::size_t max_vehicles = 60;
    double gsd_lo = 0.05;
    double gsd_hi = 0.25;
    double noise_px = 1.0;
    /// False positives per vehicle, rounded.
    double fp_fraction = 0.1;
    /// False-positive pixel lengths are drawn uniformly in this multiple of the
    /// modal vehicle's pixel length.
    double fp_scale_lo = 0.5;
    double fp_scale_hi = 4.0;
    std::uint64_t seed = 1;
};

/// Seeded trial set; trial i uses a seed derived from (plan.seed, i) only.
std::vector<EvalImage> generate_trials(const TrialPlan& plan, const FleetMixture& fleet, double l_ref_truth);

/// Runs the estimator on every image with known GSD.
std::vector<EvalRecord> run_estimates(const std::vector<EvalImage>& dataset, const EstimatorConfig& config);

struct SweepCell
{
    std::string name;
    EstimatorConfig config;
};

/// Cartesian product over aggregation x l_ref x alpha (unset alpha = no filter).
std::vector<SweepCell> make_grid(const EstimatorConfig& base,
                                 const std::vector<Aggregation>& aggregations,
                                 const std::vector<double>& l_refs,
                                 const std::vector<std::optional<double>>& alphas);

struct SweepRow
{
    SweepCell cell;
    /// Unset when the cell had no evaluable image.
    std::optional<EvalReport> report;
};

std::vector<SweepRow> ablation_sweep(const std::vector<EvalImage>& dataset, const std::vector<SweepCell>& grid);

std::string sweep_csv(const std::vector<SweepRow>& rows);

std::string sweep_table(const std::vector<SweepRow>& rows);

} // namespace gsdanchor
