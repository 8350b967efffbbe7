// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

// Reference computations written with plain loops and no library code, used
// to check the library's answers.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace oracle {

inline double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double stddev(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double scott(const std::vector<double>& v)
{
    return stddev(v) * std::pow(static_cast<double>(v.size()), -0.2);
}

inline double density(const std::vector<double>& v, const std::vector<double>& w, double h, double x)
{
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double z = (x - v[i]) / h;
        num += w[i] * std::exp(-0.5 * z * z);
        den += w[i];
    }
    return num / (den * h * std::sqrt(2.0 * std::numbers::pi));
}

/// Arg-max of the density on `points` evenly spaced nodes of [lo, hi]; first
/// maximum wins.
inline double dense_argmax(const std::vector<double>& v, const std::vector<double>& w, double h,
                           double lo, double hi, int points)
{
    double best_x = lo, best_f = -1.0;
    for (int k = 0; k < points; ++k) {
        const double x = lo + (hi - lo) * k / (points - 1);
        const double f = density(v, w, h, x);
        if (f > best_f) {
            best_f = f;
            best_x = x;
        }
    }
    return best_x;
}

/// Unweighted brute-force mode using Scott's rule and the +-3h span.
inline double dense_mode(const std::vector<double>& v, int points)
{
    const double h = scott(v);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return dense_argmax(v, std::vector<double>(v.size(), 1.0), h, *lo - 3 * h, *hi + 3 * h, points);
}

/// Area of the intersection of two axis-aligned rectangles.
inline double box_overlap(double ax0, double ay0, double ax1, double ay1,
                          double bx0, double by0, double bx1, double by1)
{
    const double w = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
    const double h = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
    return w * h;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace oracle
