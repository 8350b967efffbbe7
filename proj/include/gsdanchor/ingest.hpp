// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include <gsdanchor/geometry.hpp>

namespace gsdanchor {

enum class DetectionSource
{
    ground_truth,
    detector
};

const char* to_string(DetectionSource source);

/// All detections for one image.
struct DetectionSet
{
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<ObbDetectiond> detections;
    DetectionSource source = DetectionSource::detector;
    /// Malformed input lines dropped while parsing (not serialised).
    int n_skipped = 0;
};

struct ImageMeta
{
    std::string image_id;
    std::optional<double> gsd_gt;
};

/// Default slack around the image for polygons that overshoot the border,
/// as a fraction of the larger image dimension.
inline constexpr double kDefaultBoundsMargin = 0.05;

bool within_bounds(const ObbPolygond& poly, int width, int height, double margin_fraction = kDefaultBoundsMargin);

struct DotaParseOptions
{
    std::string image_id;
    /// 0 means infer from the largest coordinate in the document.
    int width = 0;
    int height = 0;
    /// Objects with a larger difficulty flag are dropped; unset keeps all.
    std::optional<int> max_difficulty;
    double bounds_margin = kDefaultBoundsMargin;
};

/// Parses DOTA label text ("x1 y1 ... x4 y4 category difficulty" per object).
/// Header lines ("imagesource:", "gsd:") and blank lines are ignored;
/// malformed, degenerate, non-convex or out-of-bounds objects are counted in
/// n_skipped. Every returned detection has confidence 1.
DetectionSet parse_dota_annotation(std::string_view text,
                                   std::string_view category_filter,
                                   const DotaParseOptions& options = {});

DetectionSet load_dota_annotation(const std::filesystem::path& path,
                                  std::string_view category_filter,
                                  DotaParseOptions options = {});

/// First "gsd:<value>" line; "null", unparsable or non-positive values mean absent.
ImageMeta parse_gsd_meta(std::string_view text, std::string image_id = {});

ImageMeta load_gsd_meta(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

/// Rounds to 9 significant decimal digits.
double round_sig9(double value);

/// Rounds every float in the tree to 9 significant digits; object keys are
/// already kept sorted by nlohmann::json.
void canonicalize(nlohmann::json& doc);

/// Canonical compact serialisation, newline terminated.
std::string canonical_dump(nlohmann::json doc);

nlohmann::json to_json(const DetectionSet& set);

/// Validates a detection document; schema errors name the offending field.
DetectionSet detection_set_from_json(const nlohmann::json& doc,
                                     double bounds_margin = kDefaultBoundsMargin);

DetectionSet read_detection_json(std::string_view document, double bounds_margin = kDefaultBoundsMargin);

std::string write_detection_json(const DetectionSet& set);

struct TileRect
{
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    friend bool operator==(const TileRect&, const TileRect&) = default;
};

inline constexpr int kDefaultTileSize = 1024;
inline constexpr int kDefaultTileOverlap = 200;

/// Tile origins along one axis: stride tile - overlap, last tile shifted
/// inward to end at the border.
std::vector<int> tile_origins(int extent, int tile_size, int overlap);

/// Row-major list of tiles covering the image.
std::vector<TileRect> tile_plan(int image_width, int image_height,
                                int tile_size = kDefaultTileSize, int overlap = kDefaultTileOverlap);

/// Translates tile-local detections into image coordinates.
std::vector<ObbDetectiond> to_global(const std::vector<ObbDetectiond>& local, const TileRect& tile);

/// Translates per-tile detections and removes tile-boundary duplicates with NMS.
std::vector<ObbDetectiond> merge_tiles(const std::vector<std::vector<ObbDetectiond>>& per_tile,
                                       const std::vector<TileRect>& tiles,
                                       double iou_threshold = 0.5);

} // namespace gsdanchor
