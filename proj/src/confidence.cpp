// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#include <gsdanchor/confidence.hpp>

#include <algorithm>

namespace gsdanchor {

double sufficiency_score(std::size_t n_filtered, const ConfidenceConfig& config)
{
    return std::min(1.0, static_cast<double>(n_filtered) / config.sufficiency_saturation);
}

double coefficient_of_variation(const ArrayX<double>& lengths)
{
    if (lengths.size() < 2) return 0.0;
    return sample_stddev(lengths) / mean(lengths);
}

double concentration_score(double cv, const ConfidenceConfig& config)
{
    return std::clamp(1.0 - cv / config.cv_scale, 0.0, 1.0);
}

double quality_score(const ArrayX<double>& detection_confs)
{
    if (detection_confs.size() == 0) return 0.0;
    return std::clamp(median(detection_confs), 0.0, 1.0);
}

double anomaly_score(double p_mode, double l_ref, const ConfidenceConfig& config)
{
    if (!(p_mode > 0.0)) return 0.0;
    const double gsd = l_ref / p_mode;
    return (gsd >= config.plausible_gsd_min && gsd <= config.plausible_gsd_max) ? 1.0 : 0.0;
}

double guard_threshold(double l_ref, double gsd_max)
{
    return l_ref / gsd_max;
}

bool resolution_guard(double p_mode, double l_ref, double gsd_max)
{
    return p_mode < guard_threshold(l_ref, gsd_max);
}

ConfidenceReport compose_confidence(double s_sufficiency, double s_concentration, double s_quality,
                                    double s_anomaly, double p_mode, double l_ref,
                                    const ConfidenceConfig& config)
{
    ConfidenceReport r;
    r.s_sufficiency = s_sufficiency;
    r.s_concentration = s_concentration;
    r.s_quality = s_quality;
    r.s_anomaly = s_anomaly;
    r.c_raw = config.w_sufficiency * s_sufficiency + config.w_concentration * s_concentration +
              config.w_quality * s_quality + config.w_anomaly * s_anomaly;
    r.p_thresh = guard_threshold(l_ref, config.gsd_max);
    r.guard_triggered = p_mode < r.p_thresh;
    r.c_final = r.guard_triggered ? std::min(r.c_raw, config.guard_ceiling) : r.c_raw;
    return r;
}

ConfidenceReport score_confidence(const ArrayX<double>& filtered_lengths,
                                  const ArrayX<double>& detection_confs,
                                  double p_mode, double l_ref,
                                  const ConfidenceConfig& config)
{
    return compose_confidence(sufficiency_score(static_cast<std::size_t>(filtered_lengths.size()), config),
                              concentration_score(coefficient_of_variation(filtered_lengths), config),
                              quality_score(detection_confs),
                              anomaly_score(p_mode, l_ref, config),
                              p_mode, l_ref, config);
}

ConfidenceReport zero_confidence(double l_ref, const ConfidenceConfig& config)
{
    ConfidenceReport r;
    r.p_thresh = guard_threshold(l_ref, config.gsd_max);
    return r;
}

} // namespace gsdanchor
