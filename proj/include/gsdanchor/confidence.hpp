// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include <gsdanchor/robust_stats.hpp>

namespace gsdanchor {

/// Weights and shape parameters of the composite confidence score.
struct ConfidenceConfig
{
    double w_sufficiency = 0.35;
    double w_concentration = 0.35;
    double w_quality = 0.20;
    double w_anomaly = 0.10;

    /// Detection count at which sample sufficiency saturates.
    double sufficiency_saturation = 20.0;
    /// Coefficient of variation at which concentration reaches zero.
    double cv_scale = 0.5;
    /// Plausible GSD window (m/px) for the anomaly sub-score.
    double plausible_gsd_min = 0.01;
    double plausible_gsd_max = 1.0;

    /// Coarsest trusted resolution; sets the pixel threshold of the guard.
    double gsd_max = 0.3;
    /// Ceiling applied to the score when the guard fires.
    double guard_ceiling = 0.3;
};

struct ConfidenceReport
{
    double s_sufficiency = 0.0;
    double s_concentration = 0.0;
    double s_quality = 0.0;
    double s_anomaly = 0.0;
    double c_raw = 0.0;
    double c_final = 0.0;
    bool guard_triggered = false;
    double p_thresh = 0.0;

    friend bool operator==(const ConfidenceReport&, const ConfidenceReport&) = default;
};

double sufficiency_score(std::size_t n_filtered, const ConfidenceConfig& config = {});

double coefficient_of_variation(const ArrayX<double>& lengths);

double concentration_score(double cv, const ConfidenceConfig& config = {});

/// Median detection confidence; 0 when there are none.
double quality_score(const ArrayX<double>& detection_confs);

double anomaly_score(double p_mode, double l_ref, const ConfidenceConfig& config = {});

/// Pixel length below which the resolution guard fires: l_ref / gsd_max.
double guard_threshold(double l_ref, double gsd_max);

bool resolution_guard(double p_mode, double l_ref, double gsd_max);

/// Weighted sum of the sub-scores followed by the resolution guard.
ConfidenceReport compose_confidence(double s_sufficiency, double s_concentration, double s_quality,
                                    double s_anomaly, double p_mode, double l_ref,
                                    const ConfidenceConfig& config = {});

ConfidenceReport score_confidence(const ArrayX<double>& filtered_lengths,
                                  const ArrayX<double>& detection_confs,
                                  double p_mode, double l_ref,
                                  const ConfidenceConfig& config = {});

/// Report for an image with no usable detections: every score is zero.
ConfidenceReport zero_confidence(double l_ref, const ConfidenceConfig& config = {});

} // namespace gsdanchor
