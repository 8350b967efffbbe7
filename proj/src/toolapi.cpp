// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#include <gsdanchor/toolapi.hpp>

#include <atomic>
#include <cstdio>
#include <iostream>

#include <gsdanchor/error.hpp>

namespace gsdanchor {

using nlohmann::json;

const char* to_string(RecommendedAction action)
{
    return action == RecommendedAction::trust ? "trust" : "fallback";
}

RecommendedAction recommend(double confidence)
{
    return confidence < kTrustThreshold ? RecommendedAction::fallback : RecommendedAction::trust;
}

ServiceContext make_context(const CalibrationResult& calibration, EstimatorConfig base)
{
    base.l_ref = calibration.l_ref;
    base.validate();
    return {calibration, base};
}

namespace {

[[noreturn]] void schema_error(const std::string& field, const std::string& what)
{
    throw Error(ErrorCode::schema, "schema violation at \"" + field + "\": " + what, field);
}

double number_in(const json& v, const std::string& field, double lo, double hi)
{
    if (!v.is_number()) schema_error(field, "expected a number");
    const double x = v.get<double>();
    if (!(x >= lo && x <= hi)) schema_error(field, "value out of range");
    return x;
}

void apply_overrides(const json& overrides, EstimatorConfig& config)
{
    if (!overrides.is_object()) schema_error("config", "expected an object");
    for (const auto& [key, value] : overrides.items()) {
        const std::string field = "config." + key;
        if (key == "min_conf") {
            config.min_conf = number_in(value, field, 0.0, 1.0);
        } else if (key == "alpha") {
            if (value.is_null()) {
                config.alpha.reset();
            } else {
                config.alpha = number_in(value, field, 1e-9, 1e9);
            }
        } else if (key == "fallback_n") {
            if (!value.is_number_integer() || value.get<long long>() < 1) schema_error(field, "expected an integer >= 1");
            config.fallback_n = value.get<std::size_t>();
        } else if (key == "weighted_kde") {
            if (!value.is_boolean()) schema_error(field, "expected a boolean");
            config.weighted_kde = value.get<bool>();
        } else if (key == "gsd_max") {
            config.confidence.gsd_max = number_in(value, field, 1e-9, 1e9);
        } else if (key == "aggregation") {
            const auto agg = value.is_string() ? parse_aggregation(value.get<std::string>()) : std::nullopt;
            if (!agg) schema_error(field, "expected \"kde\", \"median\" or \"mean\"");
            config.aggregation = *agg;
        } else {
            schema_error(field, "unknown configuration key");
        }
    }
}

std::optional<std::int64_t> read_pixel_count(const json& body)
{
    const auto it = body.find("pixel_count");
    if (it == body.end() || it->is_null()) return std::nullopt;
    if (!it->is_number_integer() || it->get<long long>() < 0) {
        schema_error("pixel_count", "expected a non-negative integer");
    }
    return it->get<std::int64_t>();
}

DetectionSet read_detections(const json& body)
{
    const bool inline_given = body.contains("detections");
    const bool path_given = body.contains("detections_path");
    if (inline_given == path_given) {
        schema_error("detections", "exactly one of \"detections\" or \"detections_path\" is required");
    }
    if (inline_given) {
        try {
            return detection_set_from_json(body["detections"]);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::schema) throw;
            const std::string field = e.field() == "$" ? "detections" : "detections." + e.field();
            throw Error(ErrorCode::schema, e.what(), field);
        }
    }
    const json& path = body["detections_path"];
    if (!path.is_string()) schema_error("detections_path", "expected a string");
    return read_detection_json(read_text_file(path.get<std::string>()));
}

int status_for(ErrorCode code)
{
    switch (code) {
        case ErrorCode::schema:
        case ErrorCode::invalid_argument:
        case ErrorCode::degenerate_input: return 400;
        case ErrorCode::io: return 404;
        case ErrorCode::internal: return 500;
    }
    return 500;
}

ToolResult error_result(const Error& e)
{
    json err = {{"code", to_string(e.code())}, {"message", e.what()}};
    if (!e.field().empty()) err["field"] = e.field();
    return {status_for(e.code()), {{"error", std::move(err)}}};
}

ToolResult internal_result(const char* what)
{
    static std::atomic<unsigned long long> counter{0};
    char id[32];
    std::snprintf(id, sizeof id, "err-%08llx", ++counter);
    std::cerr << "[gsdanchor] internal error " << id << ": " << what << "\n";
    return {500, {{"error", {{"code", "internal_error"}, {"id", id}}}}};
}

template <class Fn>
ToolResult guarded(Fn&& fn)
{
    try {
        return fn();
    } catch (const Error& e) {
        return e.code() == ErrorCode::internal ? internal_result(e.what()) : error_result(e);
    } catch (const std::exception& e) {
        return internal_result(e.what());
    } catch (...) {
        return internal_result("unknown exception");
    }
}

ToolResult parse_then(std::string_view body, const ServiceContext& context,
                      ToolResult (*handler)(const json&, const ServiceContext&))
{
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) {
        return error_result(Error(ErrorCode::schema, "request body is not valid JSON", "$"));
    }
    return handler(doc, context);
}

} // namespace

ToolRequest parse_tool_request(const json& body, const ServiceContext& context)
{
    if (!body.is_object()) schema_error("$", "expected an object");
    for (const auto& [key, value] : body.items()) {
        if (key != "detections" && key != "detections_path" && key != "pixel_count" && key != "config") {
            schema_error(key, "unknown request field");
        }
    }
    ToolRequest req;
    req.config = context.base_config;
    if (const auto it = body.find("config"); it != body.end()) apply_overrides(*it, req.config);
    req.pixel_count = read_pixel_count(body);
    req.detections = read_detections(body);
    return req;
}

ToolResponse make_response(const GsdEstimate& estimate, std::optional<std::int64_t> pixel_count)
{
    ToolResponse r;
    r.gsd_pred = estimate.gsd_pred;
    r.p_mode = estimate.p_mode;
    r.confidence = estimate.confidence.c_final;
    r.guard_triggered = estimate.confidence.guard_triggered;
    r.path = estimate.path;
    r.recommended_action = recommend(r.confidence);
    r.diagnostics = estimate.confidence;
    r.n_raw = estimate.n_raw;
    r.n_confident = estimate.n_confident;
    r.n_filtered = estimate.n_filtered;
    if (pixel_count && estimate.gsd_pred) {
        r.area = measure_area(*pixel_count, *estimate.gsd_pred, r.confidence);
    }
    return r;
}

json to_json(const ToolResponse& r)
{
    const auto& d = r.diagnostics;
    json doc = {{"gsd_pred", r.gsd_pred ? json(*r.gsd_pred) : json(nullptr)},
                {"confidence", r.confidence},
                {"guard_triggered", r.guard_triggered},
                {"path", to_string(r.path)},
                {"recommended_action", to_string(r.recommended_action)},
                {"diagnostics",
                 {{"s_sufficiency", d.s_sufficiency},
                  {"s_concentration", d.s_concentration},
                  {"s_quality", d.s_quality},
                  {"s_anomaly", d.s_anomaly},
                  {"c_raw", d.c_raw},
                  {"c_final", d.c_final},
                  {"p_thresh", d.p_thresh},
                  {"p_mode", r.p_mode ? json(*r.p_mode) : json(nullptr)},
                  {"n_raw", r.n_raw},
                  {"n_confident", r.n_confident},
                  {"n_filtered", r.n_filtered}}}};
    if (r.area) {
        doc["area"] = {{"pixel_count", r.area->pixel_count}, {"gsd", r.area->gsd}, {"area_m2", r.area->area}};
    }
    canonicalize(doc);
    return doc;
}

ToolResult handle_estimate(const json& request, const ServiceContext& context)
{
    return guarded([&] {
        const ToolRequest req = parse_tool_request(request, context);
        const GsdEstimate est = estimate_gsd(req.detections, req.config);
        return ToolResult{200, to_json(make_response(est, req.pixel_count))};
    });
}

ToolResult handle_estimate(std::string_view request_body, const ServiceContext& context)
{
    return parse_then(request_body, context, static_cast<ToolResult (*)(const json&, const ServiceContext&)>(handle_estimate));
}

ToolResult handle_area(const json& request, const ServiceContext& context)
{
    return guarded([&] {
        if (!request.is_object()) schema_error("$", "expected an object");
        const auto count = read_pixel_count(request);
        if (!count) schema_error("pixel_count", "missing field");

        if (const auto g = request.find("gsd"); g != request.end()) {
            if (request.contains("detections") || request.contains("detections_path")) {
                schema_error("gsd", "give either \"gsd\" or detections, not both");
            }
            const double gsd = number_in(*g, "gsd", 1e-12, 1e12);
            const AreaMeasurement m = measure_area(*count, gsd, 1.0);
            json body = {{"pixel_count", m.pixel_count}, {"gsd", m.gsd}, {"area_m2", m.area}};
            canonicalize(body);
            return ToolResult{200, body};
        }

        const ToolRequest req = parse_tool_request(request, context);
        const GsdEstimate est = estimate_gsd(req.detections, req.config);
        json body = to_json(make_response(est, count));
        if (!est.gsd_pred) body["area"] = nullptr;
        return ToolResult{200, body};
    });
}

ToolResult handle_area(std::string_view request_body, const ServiceContext& context)
{
    return parse_then(request_body, context, static_cast<ToolResult (*)(const json&, const ServiceContext&)>(handle_area));
}

json health(const ServiceContext& context)
{
    json doc = {{"status", "ok"},
                {"version", kVersion},
                {"l_ref", context.calibration.l_ref},
                {"n_instances", context.calibration.n_instances}};
    canonicalize(doc);
    return doc;
}

} // namespace gsdanchor
