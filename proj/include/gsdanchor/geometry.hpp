// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include <gsdanchor/error.hpp>

namespace gsdanchor {

template <class Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

template <class Scalar>
using Linear2 = Eigen::Matrix<Scalar, 2, 2>;

/// Oriented box as four corners in pixel units, listed in either winding.
template <class Scalar>
struct ObbPolygon
{
    std::array<Point2<Scalar>, 4> corners;

    const Point2<Scalar>& operator[](std::size_t i) const { return corners[i]; }
    Point2<Scalar>& operator[](std::size_t i) { return corners[i]; }

    friend bool operator==(const ObbPolygon& a, const ObbPolygon& b)
    {
        for (std::size_t i = 0; i < 4; ++i) {
            if (a.corners[i] != b.corners[i]) return false;
        }
        return true;
    }
};

template <class Scalar>
struct ObbDetection
{
    ObbPolygon<Scalar> polygon;
    Scalar confidence = Scalar(1);
    std::string label;

    friend bool operator==(const ObbDetection& a, const ObbDetection& b)
    {
        return a.polygon == b.polygon && a.confidence == b.confidence && a.label == b.label;
    }
};

using ObbPolygond = ObbPolygon<double>;
using ObbDetectiond = ObbDetection<double>;

namespace detail {

template <class Scalar>
Scalar cross(const Point2<Scalar>& a, const Point2<Scalar>& b)
{
    return a.x() * b.y() - a.y() * b.x();
}

template <class Scalar>
Scalar shoelace(const std::vector<Point2<Scalar>>& pts)
{
    Scalar twice = Scalar(0);
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        twice += cross<Scalar>(pts[i], pts[(i + 1) % n]);
    }
    return twice / Scalar(2);
}

template <class Scalar>
std::vector<Point2<Scalar>> ccw_vertices(const ObbPolygon<Scalar>& poly)
{
    std::vector<Point2<Scalar>> pts(poly.corners.begin(), poly.corners.end());
    if (shoelace(pts) < Scalar(0)) std::reverse(pts.begin(), pts.end());
    return pts;
}

// Clips a polygon against the left half-plane of the directed edge p->q.
template <class Scalar>
std::vector<Point2<Scalar>> clip_half_plane(
    const std::vector<Point2<Scalar>>& subject,
    const Point2<Scalar>& p,
    const Point2<Scalar>& q)
{
    std::vector<Point2<Scalar>> out;
    if (subject.empty()) return out;
    out.reserve(subject.size() + 2);

    const Point2<Scalar> dir = q - p;
    auto side = [&](const Point2<Scalar>& x) { return cross<Scalar>(dir, x - p); };

    const std::size_t n = subject.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2<Scalar>& cur = subject[i];
        const Point2<Scalar>& nxt = subject[(i + 1) % n];
        const Scalar sc = side(cur);
        const Scalar sn = side(nxt);
        if (sc >= Scalar(0)) out.push_back(cur);
        if ((sc >= Scalar(0)) != (sn >= Scalar(0))) {
            const Scalar t = sc / (sc - sn);
            out.push_back(cur + t * (nxt - cur));
        }
    }
    return out;
}

template <class Scalar>
bool lexicographically_less(const ObbPolygon<Scalar>& a, const ObbPolygon<Scalar>& b)
{
    for (std::size_t i = 0; i < 4; ++i) {
        for (int k = 0; k < 2; ++k) {
            if (a[i](k) < b[i](k)) return true;
            if (b[i](k) < a[i](k)) return false;
        }
    }
    return false;
}

} // namespace detail

template <class Scalar>
Scalar signed_area(const ObbPolygon<Scalar>& poly)
{
    return detail::shoelace(std::vector<Point2<Scalar>>(poly.corners.begin(), poly.corners.end()));
}

template <class Scalar>
Scalar area(const ObbPolygon<Scalar>& poly)
{
    return std::abs(signed_area(poly));
}

template <class Scalar>
bool all_finite(const ObbPolygon<Scalar>& poly)
{
    return std::all_of(poly.corners.begin(), poly.corners.end(),
                       [](const Point2<Scalar>& p) { return p.allFinite(); });
}

/// Zero area relative to the squared extent of the quadrilateral, or non-finite corners.
template <class Scalar>
bool is_degenerate(const ObbPolygon<Scalar>& poly)
{
    if (!all_finite(poly)) return true;
    Scalar extent = Scalar(0);
    for (std::size_t i = 0; i < 4; ++i) {
        extent = std::max(extent, (poly[i] - poly[(i + 1) % 4]).norm());
    }
    return !(area(poly) > Scalar(1e-12) * extent * extent);
}

/// True when every turn has the same orientation (collinear corners allowed).
template <class Scalar>
bool is_convex(const ObbPolygon<Scalar>& poly)
{
    if (is_degenerate(poly)) return false;
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const Point2<Scalar> e0 = poly[(i + 1) % 4] - poly[i];
        const Point2<Scalar> e1 = poly[(i + 2) % 4] - poly[(i + 1) % 4];
        const Scalar c = detail::cross<Scalar>(e0, e1);
        if (c > Scalar(0)) ++pos;
        if (c < Scalar(0)) ++neg;
    }
    return pos == 0 || neg == 0;
}

/// Longer of the two averaged opposite-side pairs. Averaging absorbs annotation
/// jitter on boxes that are only approximately parallelograms.
template <class Scalar>
Scalar longer_side(const ObbPolygon<Scalar>& poly)
{
    if (is_degenerate(poly)) {
        throw Error(ErrorCode::degenerate_input, "degenerate polygon");
    }
    const Scalar a = ((poly[0] - poly[1]).norm() + (poly[2] - poly[3]).norm()) / Scalar(2);
    const Scalar b = ((poly[1] - poly[2]).norm() + (poly[3] - poly[0]).norm()) / Scalar(2);
    return std::max(a, b);
}

/// Applies x -> linear * x + offset to every corner.
template <class Scalar, class LinearDerived, class OffsetDerived>
ObbPolygon<Scalar> transform(const ObbPolygon<Scalar>& poly,
                             const Eigen::MatrixBase<LinearDerived>& linear,
                             const Eigen::MatrixBase<OffsetDerived>& offset)
{
    ObbPolygon<Scalar> out;
    for (std::size_t i = 0; i < 4; ++i) {
        out[i] = linear * poly[i] + offset;
    }
    return out;
}

template <class Scalar>
Linear2<Scalar> rotation(Scalar angle)
{
    Linear2<Scalar> r;
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return r;
}

template <class Scalar>
Point2<Scalar> centroid(const ObbPolygon<Scalar>& poly)
{
    return (poly[0] + poly[1] + poly[2] + poly[3]) / Scalar(4);
}

/// Rectangle of the given length (along the heading) and width, centred at `centre`.
template <class Scalar>
ObbPolygon<Scalar> make_obb(const Point2<Scalar>& centre, Scalar length, Scalar width, Scalar angle)
{
    const Scalar hl = length / Scalar(2);
    const Scalar hw = width / Scalar(2);
    ObbPolygon<Scalar> local{{Point2<Scalar>(-hl, -hw), Point2<Scalar>(hl, -hw),
                              Point2<Scalar>(hl, hw), Point2<Scalar>(-hl, hw)}};
    return transform(local, rotation(angle), centre);
}

/// Area of the intersection of two convex quadrilaterals (exact convex clipping).
template <class Scalar>
Scalar intersection_area(const ObbPolygon<Scalar>& a, const ObbPolygon<Scalar>& b)
{
    // Fixed operand order makes the result bitwise symmetric.
    const bool swap = detail::lexicographically_less(b, a);
    const ObbPolygon<Scalar>& subject_poly = swap ? b : a;
    const ObbPolygon<Scalar>& clip_poly = swap ? a : b;

    std::vector<Point2<Scalar>> subject = detail::ccw_vertices(subject_poly);
    const std::vector<Point2<Scalar>> clip = detail::ccw_vertices(clip_poly);
    for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
        subject = detail::clip_half_plane(subject, clip[i], clip[(i + 1) % clip.size()]);
    }
    if (subject.size() < 3) return Scalar(0);
    return std::abs(detail::shoelace(subject));
}

/// Intersection over union of two convex quadrilaterals, in [0, 1].
template <class Scalar>
Scalar rotated_iou(const ObbPolygon<Scalar>& a, const ObbPolygon<Scalar>& b)
{
    const Scalar inter = intersection_area(a, b);
    const Scalar uni = area(a) + area(b) - inter;
    if (!(uni > Scalar(0))) return Scalar(0);
    return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

/// Greedy rotated NMS. Keeps a detection iff its IoU with every already-kept
/// detection is <= iou_threshold. Output is in descending confidence order,
/// ties resolved by input order.
template <class Scalar>
std::vector<ObbDetection<Scalar>> nms_merge(const std::vector<ObbDetection<Scalar>>& detections,
                                            Scalar iou_threshold)
{
    if (!(iou_threshold > Scalar(0) && iou_threshold < Scalar(1))) {
        throw Error(ErrorCode::invalid_argument, "iou_threshold must lie in (0, 1)");
    }
    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return detections[i].confidence > detections[j].confidence;
    });

    std::vector<ObbDetection<Scalar>> kept;
    for (std::size_t idx : order) {
        const auto& cand = detections[idx];
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const ObbDetection<Scalar>& k) {
            return rotated_iou(k.polygon, cand.polygon) > iou_threshold;
        });
        if (!suppressed) kept.push_back(cand);
    }
    return kept;
}

} // namespace gsdanchor
