// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include <gsdanchor/error.hpp>
#include <gsdanchor/geometry.hpp>

namespace gsdanchor {

template <class Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Median; even-sized inputs take the mean of the two central order statistics.
template <class Derived>
typename Derived::Scalar median(const Eigen::DenseBase<Derived>& values)
{
    using Scalar = typename Derived::Scalar;
    if (values.size() == 0) {
        throw Error(ErrorCode::invalid_argument, "median of empty sample");
    }
    const ArrayX<Scalar> dense = values.derived().array();
    std::vector<Scalar> sorted(dense.data(), dense.data() + dense.size());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    if (sorted.size() % 2 == 0) return (sorted[mid - 1] + sorted[mid]) / Scalar(2);
    return sorted[mid];
}

template <class Scalar>
Scalar median(const std::vector<Scalar>& values)
{
    return median(Eigen::Map<const ArrayX<Scalar>>(values.data(), Eigen::Index(values.size())));
}

template <class Derived>
typename Derived::Scalar mean(const Eigen::DenseBase<Derived>& values)
{
    if (values.size() == 0) {
        throw Error(ErrorCode::invalid_argument, "mean of empty sample");
    }
    return values.derived().sum() / typename Derived::Scalar(values.size());
}

/// Sample standard deviation with the n - 1 denominator (0 for fewer than two values).
template <class Derived>
typename Derived::Scalar sample_stddev(const Eigen::DenseBase<Derived>& values)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = values.size();
    if (n < 2) return Scalar(0);
    const Scalar m = mean(values);
    return std::sqrt((values.derived().array() - m).square().sum() / Scalar(n - 1));
}

/// Keeps detections with confidence >= min_conf, preserving order.
template <class Scalar>
std::vector<ObbDetection<Scalar>> threshold_confidence(const std::vector<ObbDetection<Scalar>>& detections,
                                                       Scalar min_conf = Scalar(0.1))
{
    std::vector<ObbDetection<Scalar>> kept;
    kept.reserve(detections.size());
    std::copy_if(detections.begin(), detections.end(), std::back_inserter(kept),
                 [&](const ObbDetection<Scalar>& d) { return d.confidence >= min_conf; });
    return kept;
}

/// One-pass median cut: entry i survives iff lengths[i] <= alpha * median(lengths).
template <class Derived>
Mask inlier_mask(const Eigen::DenseBase<Derived>& lengths, typename Derived::Scalar alpha)
{
    if (!(alpha > 0)) {
        throw Error(ErrorCode::invalid_argument, "outlier factor must be positive");
    }
    if (lengths.size() == 0) return Mask(0);
    const auto cutoff = alpha * median(lengths);
    return lengths.derived().array() <= cutoff;
}

template <class Derived>
ArrayX<typename Derived::Scalar> select(const Eigen::DenseBase<Derived>& values, const Mask& keep)
{
    ArrayX<typename Derived::Scalar> out(keep.count());
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (keep(i)) out(j++) = values.derived()(i);
    }
    return out;
}

template <class Derived>
ArrayX<typename Derived::Scalar> filter_outliers(const Eigen::DenseBase<Derived>& lengths,
                                                 typename Derived::Scalar alpha = 1.5)
{
    return select(lengths, inlier_mask(lengths, alpha));
}

/// Strictly positive finite lengths with optional weights in [0, 1].
template <class Scalar>
class LengthSample
{
public:
    explicit LengthSample(ArrayX<Scalar> values, std::optional<ArrayX<Scalar>> weights = std::nullopt)
        : values_(std::move(values)), weights_(std::move(weights))
    {
        if (!(values_ > Scalar(0)).all() || !values_.allFinite()) {
            throw Error(ErrorCode::invalid_argument, "lengths must be positive and finite");
        }
        if (weights_) {
            const auto& w = *weights_;
            if (w.size() != values_.size()) {
                throw Error(ErrorCode::invalid_argument, "weights and values differ in size");
            }
            if (!(w >= Scalar(0)).all() || !(w <= Scalar(1)).all()) {
                throw Error(ErrorCode::invalid_argument, "weights must lie in [0, 1]");
            }
            if (w.size() > 0 && !(w > Scalar(0)).any()) {
                throw Error(ErrorCode::invalid_argument, "at least one weight must be positive");
            }
        }
    }

    const ArrayX<Scalar>& values() const { return values_; }
    const std::optional<ArrayX<Scalar>>& weights() const { return weights_; }
    Eigen::Index size() const { return values_.size(); }
    bool empty() const { return values_.size() == 0; }

    /// Weights rescaled so the largest is exactly 1; all ones when unweighted.
    /// Uniform weights therefore reduce bitwise to the unweighted case.
    ArrayX<Scalar> normalized_weights() const
    {
        if (!weights_) return ArrayX<Scalar>::Ones(values_.size());
        return *weights_ / weights_->maxCoeff();
    }

private:
    ArrayX<Scalar> values_;
    std::optional<ArrayX<Scalar>> weights_;
};

template <class Scalar>
struct KdeResult
{
    Scalar mode = Scalar(0);
    Scalar bandwidth = Scalar(0);
    Scalar grid_lo = Scalar(0);
    Scalar grid_hi = Scalar(0);
    int n_evaluations = 0;
};

struct KdeOptions
{
    int grid_size = 512;
    int refine_iterations = 60;
    double span_bandwidths = 3.0;
    /// Replaces Scott's rule when set.
    std::optional<double> bandwidth;
};

/// Scott's rule h = sigma * n^(-1/5). Weighted samples use the weighted
/// variance with the reliability-weight correction and the effective sample
/// size (sum w)^2 / sum w^2, both of which reduce to the unweighted forms.
template <class Scalar>
Scalar scott_bandwidth(const LengthSample<Scalar>& sample)
{
    if (sample.size() < 2) {
        throw Error(ErrorCode::invalid_argument, "bandwidth needs at least two values");
    }
    const ArrayX<Scalar> w = sample.normalized_weights();
    const ArrayX<Scalar>& x = sample.values();
    const Scalar sw = w.sum();
    const Scalar sw2 = w.square().sum();
    const Scalar m = (w * x).sum() / sw;
    const Scalar denom = sw - sw2 / sw;
    const Scalar ss = (w * (x - m).square()).sum();
    if (!(denom > Scalar(0)) || !(ss > Scalar(0))) {
        throw Error(ErrorCode::degenerate_input, "zero-variance sample");
    }
    const Scalar sigma = std::sqrt(ss / denom);
    const Scalar n_eff = sw * sw / sw2;
    return sigma * std::pow(n_eff, Scalar(-0.2));
}

/// Weight-normalised Gaussian KDE evaluated at x.
template <class Scalar>
Scalar kde_density(const ArrayX<Scalar>& values, const ArrayX<Scalar>& weights, Scalar bandwidth, Scalar x)
{
    const Scalar norm = weights.sum() * bandwidth * std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
    return (weights * (Scalar(-0.5) * ((values - x) / bandwidth).square()).exp()).sum() / norm;
}

/// Arg-max of the Gaussian KDE: uniform grid over [min - 3h, max + 3h], then a
/// golden-section pass inside the winning cell's neighbours. Grid ties go to
/// the smaller x. A sample whose weighted values are all equal returns that
/// value with bandwidth 0.
template <class Scalar>
KdeResult<Scalar> kde_mode(const LengthSample<Scalar>& sample, const KdeOptions& options = {})
{
    if (sample.empty()) {
        throw Error(ErrorCode::invalid_argument, "empty sample");
    }
    if (options.grid_size < 3) {
        throw Error(ErrorCode::invalid_argument, "grid_size must be at least 3");
    }
    const ArrayX<Scalar> w = sample.normalized_weights();
    const ArrayX<Scalar>& x = sample.values();

    Scalar lo_val = std::numeric_limits<Scalar>::infinity();
    Scalar hi_val = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (w(i) > Scalar(0)) {
            lo_val = std::min(lo_val, x(i));
            hi_val = std::max(hi_val, x(i));
        }
    }

    KdeResult<Scalar> result;
    if (lo_val == hi_val) {
        result.mode = lo_val;
        result.grid_lo = lo_val;
        result.grid_hi = lo_val;
        return result;
    }

    const Scalar h = options.bandwidth ? Scalar(*options.bandwidth) : scott_bandwidth(sample);
    if (!(h > Scalar(0))) {
        throw Error(ErrorCode::invalid_argument, "bandwidth must be positive");
    }
    const Scalar span = Scalar(options.span_bandwidths) * h;
    const Scalar lo = lo_val - span;
    const Scalar hi = hi_val + span;
    const int g = options.grid_size;
    const Scalar step = (hi - lo) / Scalar(g - 1);

    auto density = [&](Scalar at) {
        ++result.n_evaluations;
        return kde_density(x, w, h, at);
    };

    int best_k = 0;
    Scalar best_f = density(lo);
    for (int k = 1; k < g; ++k) {
        const Scalar f = density(lo + Scalar(k) * step);
        // Relative slack keeps mirror-symmetric peaks tied despite rounding.
        if (f > best_f * (Scalar(1) + Scalar(1e-12))) {
            best_f = f;
            best_k = k;
        }
    }

    Scalar a = lo + Scalar(std::max(best_k - 1, 0)) * step;
    Scalar b = lo + Scalar(std::min(best_k + 1, g - 1)) * step;
    const Scalar inv_phi = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
    Scalar c = b - inv_phi * (b - a);
    Scalar d = a + inv_phi * (b - a);
    Scalar fc = density(c);
    Scalar fd = density(d);
    for (int it = 0; it < options.refine_iterations; ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = density(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = density(d);
        }
    }
    const Scalar refined = (a + b) / Scalar(2);
    const Scalar grid_x = lo + Scalar(best_k) * step;

    result.mode = density(refined) >= best_f ? refined : grid_x;
    result.bandwidth = h;
    result.grid_lo = lo;
    result.grid_hi = hi;
    return result;
}

} // namespace gsdanchor
