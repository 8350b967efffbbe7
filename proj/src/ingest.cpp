// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#include <gsdanchor/ingest.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gsdanchor/error.hpp>

namespace gsdanchor {

using nlohmann::json;

const char* to_string(DetectionSource source)
{
    return source == DetectionSource::ground_truth ? "ground_truth" : "detector";
}

bool within_bounds(const ObbPolygond& poly, int width, int height, double margin_fraction)
{
    const double margin = margin_fraction * std::max(width, height);
    for (const auto& p : poly.corners) {
        if (p.x() < -margin || p.x() > width + margin) return false;
        if (p.y() < -margin || p.y() > height + margin) return false;
    }
    return true;
}

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

std::vector<std::string_view> tokens(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <class T>
std::optional<T> parse_number(std::string_view token)
{
    T value{};
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    if (!token.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) return std::nullopt;
    }
    return value;
}

bool starts_with_ci(std::string_view s, std::string_view prefix)
{
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
    }
    return true;
}

struct DotaObject
{
    ObbPolygond polygon;
    std::string_view category;
    int difficulty = 0;
};

std::optional<DotaObject> parse_dota_line(std::string_view line)
{
    const auto tok = tokens(line);
    if (tok.size() != 9 && tok.size() != 10) return std::nullopt;
    DotaObject obj;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto x = parse_number<double>(tok[2 * i]);
        const auto y = parse_number<double>(tok[2 * i + 1]);
        if (!x || !y) return std::nullopt;
        obj.polygon[i] = Point2<double>(*x, *y);
    }
    obj.category = tok[8];
    if (tok.size() == 10) {
        const auto d = parse_number<int>(tok[9]);
        if (!d) return std::nullopt;
        obj.difficulty = *d;
    }
    return obj;
}

} // namespace

DetectionSet parse_dota_annotation(std::string_view text,
                                   std::string_view category_filter,
                                   const DotaParseOptions& options)
{
    if (text.find('\0') != std::string_view::npos) {
        throw Error(ErrorCode::io, "annotation document is not text");
    }
    if (options.width < 0 || options.height < 0) {
        throw Error(ErrorCode::invalid_argument, "image dimensions must be non-negative");
    }

    DetectionSet set;
    set.image_id = options.image_id;
    set.source = DetectionSource::ground_truth;

    std::vector<DotaObject> matching;
    double max_x = 0.0, max_y = 0.0;
    for (std::string_view raw : split_lines(text)) {
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (starts_with_ci(line, "imagesource:") || starts_with_ci(line, "gsd:")) continue;
        auto obj = parse_dota_line(line);
        if (!obj) {
            ++set.n_skipped;
            continue;
        }
        for (const auto& p : obj->polygon.corners) {
            max_x = std::max(max_x, p.x());
            max_y = std::max(max_y, p.y());
        }
        if (obj->category != category_filter) continue;
        if (options.max_difficulty && obj->difficulty > *options.max_difficulty) continue;
        if (!is_convex(obj->polygon)) {
            ++set.n_skipped;
            continue;
        }
        matching.push_back(*obj);
    }

    set.width = options.width > 0 ? options.width : std::max(1, static_cast<int>(std::ceil(max_x)));
    set.height = options.height > 0 ? options.height : std::max(1, static_cast<int>(std::ceil(max_y)));

    for (const auto& obj : matching) {
        if (!within_bounds(obj.polygon, set.width, set.height, options.bounds_margin)) {
            ++set.n_skipped;
            continue;
        }
        set.detections.push_back({obj.polygon, 1.0, std::string(obj.category)});
    }
    return set;
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::io, "cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        throw Error(ErrorCode::io, "error while reading " + path.string());
    }
    return buf.str();
}

DetectionSet load_dota_annotation(const std::filesystem::path& path,
                                  std::string_view category_filter,
                                  DotaParseOptions options)
{
    if (options.image_id.empty()) options.image_id = path.stem().string();
    return parse_dota_annotation(read_text_file(path), category_filter, options);
}

ImageMeta parse_gsd_meta(std::string_view text, std::string image_id)
{
    ImageMeta meta{std::move(image_id), std::nullopt};
    for (std::string_view raw : split_lines(text)) {
        const std::string_view line = trim(raw);
        if (!starts_with_ci(line, "gsd:")) continue;
        const std::string_view value = trim(line.substr(4));
        if (const auto gsd = parse_number<double>(value); gsd && *gsd > 0.0) {
            meta.gsd_gt = *gsd;
        }
        break;
    }
    return meta;
}

ImageMeta load_gsd_meta(const std::filesystem::path& path)
{
    return parse_gsd_meta(read_text_file(path), path.stem().string());
}

double round_sig9(double value)
{
    if (!std::isfinite(value) || value == 0.0) return value;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return std::strtod(buf, nullptr);
}

void canonicalize(json& doc)
{
    if (doc.is_number_float()) {
        doc = round_sig9(doc.get<double>());
    } else if (doc.is_structured()) {
        for (auto& child : doc) canonicalize(child);
    }
}

std::string canonical_dump(json doc)
{
    canonicalize(doc);
    return doc.dump() + "\n";
}

json to_json(const DetectionSet& set)
{
    json dets = json::array();
    for (const auto& d : set.detections) {
        json poly = json::array();
        for (const auto& p : d.polygon.corners) poly.push_back({p.x(), p.y()});
        dets.push_back({{"poly", std::move(poly)}, {"conf", d.confidence}, {"label", d.label}});
    }
    return {{"image_id", set.image_id},
            {"width", set.width},
            {"height", set.height},
            {"source", to_string(set.source)},
            {"detections", std::move(dets)}};
}

namespace {

[[noreturn]] void schema_error(const std::string& field, const std::string& what)
{
    throw Error(ErrorCode::schema, "schema violation at \"" + field + "\": " + what, field);
}

const json& require(const json& obj, const char* key, const std::string& path)
{
    const auto it = obj.find(key);
    const std::string field = path.empty() ? key : path + "." + key;
    if (it == obj.end()) schema_error(field, "missing field");
    return *it;
}

double require_number(const json& value, const std::string& field)
{
    if (!value.is_number()) schema_error(field, "expected a number");
    const double v = value.get<double>();
    if (!std::isfinite(v)) schema_error(field, "expected a finite number");
    return v;
}

int require_positive_int(const json& value, const std::string& field)
{
    if (!value.is_number_integer()) schema_error(field, "expected an integer");
    const auto v = value.get<long long>();
    if (v <= 0 || v > std::numeric_limits<int>::max()) schema_error(field, "expected a positive integer");
    return static_cast<int>(v);
}

} // namespace

DetectionSet detection_set_from_json(const json& doc, double bounds_margin)
{
    if (!doc.is_object()) schema_error("$", "expected an object");
    DetectionSet set;

    const json& id = require(doc, "image_id", "");
    if (!id.is_string()) schema_error("image_id", "expected a string");
    set.image_id = id.get<std::string>();
    set.width = require_positive_int(require(doc, "width", ""), "width");
    set.height = require_positive_int(require(doc, "height", ""), "height");

    const json& source = require(doc, "source", "");
    if (source == "ground_truth") {
        set.source = DetectionSource::ground_truth;
    } else if (source == "detector") {
        set.source = DetectionSource::detector;
    } else {
        schema_error("source", "expected \"ground_truth\" or \"detector\"");
    }

    const json& dets = require(doc, "detections", "");
    if (!dets.is_array()) schema_error("detections", "expected an array");
    set.detections.reserve(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const std::string path = "detections[" + std::to_string(i) + "]";
        const json& d = dets[i];
        if (!d.is_object()) schema_error(path, "expected an object");

        ObbDetectiond det;
        const json& poly = require(d, "poly", path);
        if (!poly.is_array() || poly.size() != 4) schema_error(path + ".poly", "expected 4 points");
        for (std::size_t k = 0; k < 4; ++k) {
            const std::string pf = path + ".poly[" + std::to_string(k) + "]";
            if (!poly[k].is_array() || poly[k].size() != 2) schema_error(pf, "expected [x, y]");
            det.polygon[k] = Point2<double>(require_number(poly[k][0], pf), require_number(poly[k][1], pf));
        }
        if (!is_convex(det.polygon)) schema_error(path + ".poly", "degenerate or non-convex polygon");
        if (!within_bounds(det.polygon, set.width, set.height, bounds_margin)) {
            schema_error(path + ".poly", "polygon outside image bounds");
        }

        det.confidence = require_number(require(d, "conf", path), path + ".conf");
        if (det.confidence < 0.0 || det.confidence > 1.0) schema_error(path + ".conf", "confidence outside [0, 1]");

        const json& label = require(d, "label", path);
        if (!label.is_string()) schema_error(path + ".label", "expected a string");
        det.label = label.get<std::string>();
        set.detections.push_back(std::move(det));
    }
    return set;
}

DetectionSet read_detection_json(std::string_view document, double bounds_margin)
{
    json doc = json::parse(document, nullptr, false);
    if (doc.is_discarded()) {
        throw Error(ErrorCode::schema, "document is not valid JSON", "$");
    }
    return detection_set_from_json(doc, bounds_margin);
}

std::string write_detection_json(const DetectionSet& set)
{
    return canonical_dump(to_json(set));
}

std::vector<int> tile_origins(int extent, int tile_size, int overlap)
{
    if (extent <= 0) throw Error(ErrorCode::invalid_argument, "image dimensions must be positive");
    if (overlap < 0 || tile_size <= overlap) {
        throw Error(ErrorCode::invalid_argument, "tile_size must exceed overlap >= 0");
    }
    if (extent <= tile_size) return {0};
    const int stride = tile_size - overlap;
    const int count = (extent - tile_size + stride - 1) / stride + 1;
    std::vector<int> origins;
    origins.reserve(count);
    for (int i = 0; i + 1 < count; ++i) origins.push_back(i * stride);
    origins.push_back(extent - tile_size);
    return origins;
}

std::vector<TileRect> tile_plan(int image_width, int image_height, int tile_size, int overlap)
{
    const auto xs = tile_origins(image_width, tile_size, overlap);
    const auto ys = tile_origins(image_height, tile_size, overlap);
    std::vector<TileRect> tiles;
    tiles.reserve(xs.size() * ys.size());
    for (int y : ys) {
        for (int x : xs) {
            tiles.push_back({x, y, std::min(tile_size, image_width), std::min(tile_size, image_height)});
        }
    }
    return tiles;
}

std::vector<ObbDetectiond> to_global(const std::vector<ObbDetectiond>& local, const TileRect& tile)
{
    const Point2<double> offset(tile.x, tile.y);
    std::vector<ObbDetectiond> out = local;
    for (auto& d : out) {
        d.polygon = transform(d.polygon, Linear2<double>::Identity(), offset);
    }
    return out;
}

std::vector<ObbDetectiond> merge_tiles(const std::vector<std::vector<ObbDetectiond>>& per_tile,
                                       const std::vector<TileRect>& tiles,
                                       double iou_threshold)
{
    if (per_tile.size() != tiles.size()) {
        throw Error(ErrorCode::invalid_argument, "one detection list per tile expected");
    }
    std::vector<ObbDetectiond> all;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        auto global = to_global(per_tile[i], tiles[i]);
        all.insert(all.end(), global.begin(), global.end());
    }
    return nms_merge(all, iou_threshold);
}

} // namespace gsdanchor
