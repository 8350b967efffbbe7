// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include <gsdanchor/estimator.hpp>
#include <gsdanchor/measurement.hpp>

namespace gsdanchor {

inline constexpr const char* kVersion = "1.0.0";

/// Confidence below which a caller should not trust the estimate.
inline constexpr double kTrustThreshold = 0.5;

enum class RecommendedAction
{
    trust,
    fallback
};

const char* to_string(RecommendedAction action);

/// fallback iff confidence < 0.5.
RecommendedAction recommend(double confidence);

/// Immutable state loaded once at startup.
struct ServiceContext
{
    CalibrationResult calibration;
    /// l_ref is always taken from the calibration.
    EstimatorConfig base_config;
};

ServiceContext make_context(const CalibrationResult& calibration, EstimatorConfig base = {});

struct ToolRequest
{
    DetectionSet detections;
    std::optional<std::int64_t> pixel_count;
    EstimatorConfig config;
};

/// Request body:
///   {"detections": <detection document>} or {"detections_path": "<file>"},
///   optional "pixel_count": int, optional "config": {min_conf, alpha, fallback_n,
///   weighted_kde, gsd_max, aggregation}.
ToolRequest parse_tool_request(const nlohmann::json& body, const ServiceContext& context);

struct ToolResponse
{
    std::optional<double> gsd_pred;
    std::optional<double> p_mode;
    double confidence = 0.0;
    bool guard_triggered = false;
    EstimatorPath path = EstimatorPath::no_detections;
    RecommendedAction recommended_action = RecommendedAction::fallback;
    ConfidenceReport diagnostics;
    std::size_t n_raw = 0;
    std::size_t n_confident = 0;
    std::size_t n_filtered = 0;
    std::optional<AreaMeasurement> area;
};

ToolResponse make_response(const GsdEstimate& estimate, std::optional<std::int64_t> pixel_count = std::nullopt);

nlohmann::json to_json(const ToolResponse& response);

/// HTTP-style status plus JSON body. Errors carry {"error": {"code", "message", "field"}}.
struct ToolResult
{
    int status = 200;
    nlohmann::json body;
};

/// Pure function of (request, context); never throws.
ToolResult handle_estimate(const nlohmann::json& request, const ServiceContext& context);
ToolResult handle_estimate(std::string_view request_body, const ServiceContext& context);

/// {"pixel_count": n, "gsd": g} or {"pixel_count": n, "detections": ...}.
ToolResult handle_area(const nlohmann::json& request, const ServiceContext& context);
ToolResult handle_area(std::string_view request_body, const ServiceContext& context);

nlohmann::json health(const ServiceContext& context);

/// HTTP front end: POST /v1/estimate, POST /v1/area, GET /v1/health.
class ToolServer
{
public:
    explicit ToolServer(ServiceContext context);
    ~ToolServer();
    ToolServer(const ToolServer&) = delete;
    ToolServer& operator=(const ToolServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port or -1.
    int bind(const std::string& host, int port);
    /// Blocks serving requests until stop().
    bool listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace gsdanchor
