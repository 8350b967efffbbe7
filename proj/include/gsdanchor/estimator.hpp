// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <gsdanchor/confidence.hpp>
#include <gsdanchor/ingest.hpp>
#include <gsdanchor/robust_stats.hpp>

namespace gsdanchor {

/// Modal small-vehicle length (m) calibrated on the DOTA v1.5 training split.
inline constexpr double kDotaReferenceLength = 5.045;

/// How the filtered pixel lengths are reduced to one modal length once enough
/// detections survive. Anything other than kde exists for ablations.
enum class Aggregation
{
    kde,
    median,
    mean
};

enum class EstimatorPath
{
    kde,
    median_fallback,
    no_detections
};

const char* to_string(Aggregation aggregation);
const char* to_string(EstimatorPath path);
std::optional<Aggregation> parse_aggregation(std::string_view name);

struct EstimatorConfig
{
    double l_ref = kDotaReferenceLength;
    double min_conf = 0.1;
    /// Median outlier factor; unset disables the filter.
    std::optional<double> alpha = 1.5;
    /// Fewer surviving detections than this use the median instead of the KDE.
    std::size_t fallback_n = 5;
    bool weighted_kde = false;
    Aggregation aggregation = Aggregation::kde;
    KdeOptions kde;
    ConfidenceConfig confidence;

    /// Throws Error(invalid_argument) on out-of-range values.
    void validate() const;
};

struct GsdEstimate
{
    std::optional<double> gsd_pred;
    std::optional<double> p_mode;
    std::size_t n_raw = 0;
    std::size_t n_confident = 0;
    std::size_t n_filtered = 0;
    EstimatorPath path = EstimatorPath::no_detections;
    ConfidenceReport confidence;
    /// Present on the kde path with kde aggregation.
    std::optional<KdeResult<double>> kde;
};

/// Threshold, longer sides, outlier filter, modal length, GSD, confidence.
/// Never fails on data: an image without usable detections is a value.
GsdEstimate estimate_gsd(const DetectionSet& detections, const EstimatorConfig& config);

struct AnnotatedImage
{
    DetectionSet annotations;
    ImageMeta meta;
};

struct CalibrationOptions
{
    /// Apply the inference-time median filter per image before pooling.
    bool apply_outlier_filter = false;
    double alpha = 1.5;
    KdeOptions kde;
};

struct CalibrationResult
{
    double l_ref = 0.0;
    std::size_t n_instances = 0;
    /// Density over physical lengths in metres.
    KdeResult<double> kde;
};

/// Pools physical lengths (longer side x ground-truth GSD) over all annotated
/// images with known GSD and returns their unweighted KDE mode.
CalibrationResult calibrate_lref(const std::vector<AnnotatedImage>& images, const CalibrationOptions& options = {});

/// Same computation over already-known physical lengths in metres.
CalibrationResult calibrate_from_lengths(const ArrayX<double>& lengths_m, const KdeOptions& kde = {});

nlohmann::json to_json(const CalibrationResult& calibration);
CalibrationResult calibration_from_json(const nlohmann::json& doc);
CalibrationResult load_calibration(const std::filesystem::path& path);

} // namespace gsdanchor
