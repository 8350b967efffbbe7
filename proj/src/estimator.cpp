// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#include <gsdanchor/estimator.hpp>

#include <cmath>

#include <gsdanchor/error.hpp>

namespace gsdanchor {

using nlohmann::json;

const char* to_string(Aggregation aggregation)
{
    switch (aggregation) {
        case Aggregation::kde: return "kde";
        case Aggregation::median: return "median";
        case Aggregation::mean: return "mean";
    }
    return "kde";
}

const char* to_string(EstimatorPath path)
{
    switch (path) {
        case EstimatorPath::kde: return "kde";
        case EstimatorPath::median_fallback: return "median_fallback";
        case EstimatorPath::no_detections: return "no_detections";
    }
    return "no_detections";
}

std::optional<Aggregation> parse_aggregation(std::string_view name)
{
    if (name == "kde") return Aggregation::kde;
    if (name == "median") return Aggregation::median;
    if (name == "mean") return Aggregation::mean;
    return std::nullopt;
}

void EstimatorConfig::validate() const
{
    auto fail = [](const char* what) { throw Error(ErrorCode::invalid_argument, what); };
    if (!(l_ref > 0.0) || !std::isfinite(l_ref)) fail("l_ref must be positive");
    if (!(min_conf >= 0.0 && min_conf <= 1.0)) fail("min_conf must lie in [0, 1]");
    if (alpha && !(*alpha > 0.0)) fail("alpha must be positive");
    if (fallback_n < 1) fail("fallback_n must be at least 1");
    if (!(confidence.gsd_max > 0.0)) fail("gsd_max must be positive");
    if (kde.bandwidth && !(*kde.bandwidth > 0.0)) fail("bandwidth override must be positive");
}

GsdEstimate estimate_gsd(const DetectionSet& detections, const EstimatorConfig& config)
{
    config.validate();

    GsdEstimate est;
    est.n_raw = detections.detections.size();

    const auto confident = threshold_confidence(detections.detections, config.min_conf);
    est.n_confident = confident.size();

    ArrayX<double> lengths(static_cast<Eigen::Index>(confident.size()));
    ArrayX<double> confs(lengths.size());
    for (Eigen::Index i = 0; i < lengths.size(); ++i) {
        lengths(i) = longer_side(confident[i].polygon);
        confs(i) = confident[i].confidence;
    }

    const Mask keep = config.alpha ? inlier_mask(lengths, *config.alpha) : Mask::Constant(lengths.size(), true);
    const ArrayX<double> filtered = select(lengths, keep);
    const ArrayX<double> filtered_confs = select(confs, keep);
    est.n_filtered = static_cast<std::size_t>(filtered.size());

    if (est.n_filtered == 0) {
        est.path = EstimatorPath::no_detections;
        est.confidence = zero_confidence(config.l_ref, config.confidence);
        return est;
    }

    double p_mode = 0.0;
    if (est.n_filtered < config.fallback_n) {
        est.path = EstimatorPath::median_fallback;
        p_mode = median(filtered);
    } else {
        est.path = EstimatorPath::kde;
        switch (config.aggregation) {
            case Aggregation::kde: {
                std::optional<ArrayX<double>> weights;
                if (config.weighted_kde && (filtered_confs > 0.0).any()) weights = filtered_confs;
                est.kde = kde_mode(LengthSample<double>(filtered, weights), config.kde);
                p_mode = est.kde->mode;
                break;
            }
            case Aggregation::median: p_mode = median(filtered); break;
            case Aggregation::mean: p_mode = mean(filtered); break;
        }
    }

    est.p_mode = p_mode;
    est.gsd_pred = config.l_ref / p_mode;
    est.confidence = score_confidence(filtered, filtered_confs, p_mode, config.l_ref, config.confidence);
    return est;
}

CalibrationResult calibrate_from_lengths(const ArrayX<double>& lengths_m, const KdeOptions& kde)
{
    if (lengths_m.size() == 0) {
        throw Error(ErrorCode::invalid_argument, "no usable annotations for calibration");
    }
    CalibrationResult result;
    result.n_instances = static_cast<std::size_t>(lengths_m.size());
    result.kde = kde_mode(LengthSample<double>(lengths_m), kde);
    result.l_ref = result.kde.mode;
    return result;
}

CalibrationResult calibrate_lref(const std::vector<AnnotatedImage>& images, const CalibrationOptions& options)
{
    std::vector<double> pooled;
    for (const auto& image : images) {
        if (image.annotations.source != DetectionSource::ground_truth) {
            throw Error(ErrorCode::invalid_argument,
                        "calibration requires ground-truth annotations (image " + image.annotations.image_id + ")");
        }
        if (!image.meta.gsd_gt) continue;
        const double gsd = *image.meta.gsd_gt;

        ArrayX<double> px(static_cast<Eigen::Index>(image.annotations.detections.size()));
        for (Eigen::Index i = 0; i < px.size(); ++i) {
            px(i) = longer_side(image.annotations.detections[static_cast<std::size_t>(i)].polygon);
        }
        if (options.apply_outlier_filter) px = filter_outliers(px, options.alpha);
        for (Eigen::Index i = 0; i < px.size(); ++i) pooled.push_back(px(i) * gsd);
    }
    return calibrate_from_lengths(Eigen::Map<const ArrayX<double>>(pooled.data(), Eigen::Index(pooled.size())),
                                  options.kde);
}

json to_json(const CalibrationResult& calibration)
{
    return {{"l_ref", calibration.l_ref},
            {"n_instances", calibration.n_instances},
            {"bandwidth", calibration.kde.bandwidth}};
}

CalibrationResult calibration_from_json(const json& doc)
{
    auto fail = [](const std::string& field, const std::string& what) {
        throw Error(ErrorCode::schema, "calibration: \"" + field + "\" " + what, field);
    };
    if (!doc.is_object()) fail("$", "must be an object");
    CalibrationResult result;

    const auto l_ref = doc.find("l_ref");
    if (l_ref == doc.end() || !l_ref->is_number()) fail("l_ref", "must be a number");
    result.l_ref = l_ref->get<double>();
    if (!(result.l_ref > 0.0) || !std::isfinite(result.l_ref)) fail("l_ref", "must be positive");

    if (const auto n = doc.find("n_instances"); n != doc.end()) {
        if (!n->is_number_unsigned() && !(n->is_number_integer() && n->get<long long>() >= 0)) {
            fail("n_instances", "must be a non-negative integer");
        }
        result.n_instances = n->get<std::size_t>();
    }
    if (const auto h = doc.find("bandwidth"); h != doc.end()) {
        if (!h->is_number() || h->get<double>() < 0.0) fail("bandwidth", "must be a non-negative number");
        result.kde.bandwidth = h->get<double>();
    }
    result.kde.mode = result.l_ref;
    return result;
}

CalibrationResult load_calibration(const std::filesystem::path& path)
{
    json doc = json::parse(read_text_file(path), nullptr, false);
    if (doc.is_discarded()) {
        throw Error(ErrorCode::schema, "calibration file " + path.string() + " is not valid JSON", "$");
    }
    return calibration_from_json(doc);
}

} // namespace gsdanchor
