// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gsdanchor {

struct AreaMeasurement
{
    std::int64_t pixel_count = 0;
    double gsd = 0.0;
    double area = 0.0;
    double confidence_passthrough = 0.0;
};

/// A = N_px * GSD^2.
double area_from_pixels(std::int64_t pixel_count, double gsd);

double length_from_pixels(double pixel_length, double gsd);

AreaMeasurement measure_area(std::int64_t pixel_count, double gsd, double confidence = 0.0);

/// One "image_id object_id pixel_count" record.
struct PixelCountRecord
{
    std::string image_id;
    std::string object_id;
    std::int64_t pixel_count = 0;
};

/// Parses one record per line; blank lines and '#' comments are skipped.
/// A malformed line is a schema error naming its line number.
std::vector<PixelCountRecord> parse_pixel_counts(std::string_view text);

} // namespace gsdanchor
