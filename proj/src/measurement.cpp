// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#include <gsdanchor/measurement.hpp>

#include <cmath>
#include <sstream>

#include <gsdanchor/error.hpp>

namespace gsdanchor {

namespace {

void check_gsd(double gsd)
{
    if (!(gsd > 0.0) || !std::isfinite(gsd)) {
        throw Error(ErrorCode::invalid_argument, "gsd must be positive");
    }
}

} // namespace

double area_from_pixels(std::int64_t pixel_count, double gsd)
{
    check_gsd(gsd);
    if (pixel_count < 0) throw Error(ErrorCode::invalid_argument, "pixel_count must be non-negative");
    return static_cast<double>(pixel_count) * (gsd * gsd);
}

double length_from_pixels(double pixel_length, double gsd)
{
    check_gsd(gsd);
    if (!(pixel_length >= 0.0)) throw Error(ErrorCode::invalid_argument, "pixel_length must be non-negative");
    return pixel_length * gsd;
}

AreaMeasurement measure_area(std::int64_t pixel_count, double gsd, double confidence)
{
    return {pixel_count, gsd, area_from_pixels(pixel_count, gsd), confidence};
}

std::vector<PixelCountRecord> parse_pixel_counts(std::string_view text)
{
    std::vector<PixelCountRecord> records;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;

        std::istringstream fields(line);
        PixelCountRecord rec;
        std::string extra;
        if (!(fields >> rec.image_id >> rec.object_id >> rec.pixel_count) || (fields >> extra) ||
            rec.pixel_count < 0) {
            const std::string field = "line " + std::to_string(line_no);
            throw Error(ErrorCode::schema, "malformed pixel-count record at " + field, field);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace gsdanchor
