// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#include <gsdanchor/benchmark.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <gsdanchor/error.hpp>

namespace gsdanchor {

using nlohmann::json;

double relative_error(double pred, double gt)
{
    if (!(gt > 0.0)) throw Error(ErrorCode::invalid_argument, "ground-truth GSD must be positive");
    return std::abs(pred - gt) / gt;
}

EvalRecord make_record(std::string image_id, const GsdEstimate& estimate, double gsd_gt)
{
    EvalRecord r;
    r.image_id = std::move(image_id);
    r.gsd_pred = estimate.gsd_pred;
    r.gsd_gt = gsd_gt;
    if (r.gsd_pred) r.rel_error = relative_error(*r.gsd_pred, gsd_gt);
    r.confidence = estimate.confidence.c_final;
    r.path = estimate.path;
    r.n_filtered = estimate.n_filtered;
    r.guard_triggered = estimate.confidence.guard_triggered;
    return r;
}

json to_json(const EvalRecord& r)
{
    json doc = {{"image_id", r.image_id},
                {"gsd_pred", r.gsd_pred ? json(*r.gsd_pred) : json(nullptr)},
                {"gsd_gt", r.gsd_gt},
                {"rel_error", r.rel_error ? json(*r.rel_error) : json(nullptr)},
                {"confidence", r.confidence},
                {"path", to_string(r.path)},
                {"n_filtered", r.n_filtered},
                {"guard_triggered", r.guard_triggered}};
    return doc;
}

EvalRecord eval_record_from_json(const json& doc)
{
    auto fail = [](const std::string& field, const std::string& what) -> void {
        throw Error(ErrorCode::schema, "record field \"" + field + "\" " + what, field);
    };
    if (!doc.is_object()) fail("$", "must be an object");
    EvalRecord r;

    const auto id = doc.find("image_id");
    if (id == doc.end() || !id->is_string()) fail("image_id", "must be a string");
    r.image_id = id->get<std::string>();

    const auto pred = doc.find("gsd_pred");
    if (pred == doc.end()) fail("gsd_pred", "is missing");
    if (!pred->is_null()) {
        if (!pred->is_number() || !(pred->get<double>() > 0.0)) fail("gsd_pred", "must be a positive number or null");
        r.gsd_pred = pred->get<double>();
    }
    if (const auto gt = doc.find("gsd_gt"); gt != doc.end() && !gt->is_null()) {
        if (!gt->is_number() || !(gt->get<double>() > 0.0)) fail("gsd_gt", "must be a positive number");
        r.gsd_gt = gt->get<double>();
    }
    if (const auto c = doc.find("confidence"); c != doc.end()) {
        if (!c->is_number()) fail("confidence", "must be a number");
        r.confidence = c->get<double>();
    }
    if (const auto p = doc.find("path"); p != doc.end()) {
        if (*p == "kde") r.path = EstimatorPath::kde;
        else if (*p == "median_fallback") r.path = EstimatorPath::median_fallback;
        else if (*p == "no_detections") r.path = EstimatorPath::no_detections;
        else fail("path", "is not a known estimator path");
    } else {
        r.path = r.gsd_pred ? EstimatorPath::kde : EstimatorPath::no_detections;
    }
    if (const auto n = doc.find("n_filtered"); n != doc.end()) {
        if (!n->is_number_integer() || n->get<long long>() < 0) fail("n_filtered", "must be a non-negative integer");
        r.n_filtered = n->get<std::size_t>();
    }
    if (const auto g = doc.find("guard_triggered"); g != doc.end() && g->is_boolean()) {
        r.guard_triggered = g->get<bool>();
    }
    if (r.gsd_pred && r.gsd_gt > 0.0) r.rel_error = relative_error(*r.gsd_pred, r.gsd_gt);
    return r;
}

namespace {

double median_of(std::vector<double> v)
{
    return median(v);
}

double mean_of(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() < 3) return std::nullopt;
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

BucketStats bucket(std::string name, const std::vector<double>& errors)
{
    BucketStats b{std::move(name), errors.size(), std::nullopt, std::nullopt};
    if (!errors.empty()) {
        b.median_err = median_of(errors);
        b.mean_err = mean_of(errors);
    }
    return b;
}

} // namespace

EvalReport evaluate(const std::vector<EvalRecord>& records)
{
    EvalReport report;
    std::vector<double> errors, confs;
    std::vector<double> many, few, fine, coarse;
    for (const auto& r : records) {
        if (!r.rel_error) {
            ++report.n_no_estimate;
            continue;
        }
        const double e = *r.rel_error;
        errors.push_back(e);
        confs.push_back(r.confidence);
        if (r.n_filtered >= 20) many.push_back(e);
        if (r.n_filtered < 5) few.push_back(e);
        if (r.gsd_gt < 0.3) fine.push_back(e);
        if (r.gsd_gt > 0.7) coarse.push_back(e);
    }
    if (errors.empty()) {
        throw Error(ErrorCode::invalid_argument, "no evaluable records");
    }
    report.n_evaluated = errors.size();
    report.median_err = median_of(errors);
    report.mean_err = mean_of(errors);
    const auto n = static_cast<double>(errors.size());
    report.frac_lt_10 = static_cast<double>(std::count_if(errors.begin(), errors.end(), [](double e) { return e < 0.10; })) / n;
    report.frac_lt_20 = static_cast<double>(std::count_if(errors.begin(), errors.end(), [](double e) { return e < 0.20; })) / n;
    report.confidence_error_correlation = pearson(confs, errors);
    report.per_bucket = {bucket("n_filtered>=20", many), bucket("n_filtered<5", few),
                         bucket("gsd_gt<0.3", fine), bucket("gsd_gt>0.7", coarse)};
    return report;
}

json to_json(const EvalReport& r)
{
    json buckets = json::array();
    for (const auto& b : r.per_bucket) {
        buckets.push_back({{"name", b.name},
                           {"n", b.n},
                           {"median_err", b.median_err ? json(*b.median_err) : json(nullptr)},
                           {"mean_err", b.mean_err ? json(*b.mean_err) : json(nullptr)}});
    }
    return {{"n_evaluated", r.n_evaluated},
            {"n_no_estimate", r.n_no_estimate},
            {"median_err", r.median_err},
            {"mean_err", r.mean_err},
            {"frac_lt_10", r.frac_lt_10},
            {"frac_lt_20", r.frac_lt_20},
            {"confidence_error_correlation",
             r.confidence_error_correlation ? json(*r.confidence_error_correlation) : json(nullptr)},
            {"per_bucket", std::move(buckets)}};
}

namespace {

std::string pct(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
    return buf;
}

std::string pct(const std::optional<double>& v)
{
    return v ? pct(*v) : std::string("-");
}

} // namespace

std::string format_report(const EvalReport& r)
{
    std::ostringstream out;
    char corr[32] = "-";
    if (r.confidence_error_correlation) std::snprintf(corr, sizeof corr, "%.3f", *r.confidence_error_correlation);
    out << "evaluated      " << r.n_evaluated << "\n"
        << "no estimate    " << r.n_no_estimate << "\n"
        << "median error   " << pct(r.median_err) << "\n"
        << "mean error     " << pct(r.mean_err) << "\n"
        << "< 10%          " << pct(r.frac_lt_10) << "\n"
        << "< 20%          " << pct(r.frac_lt_20) << "\n"
        << "corr(C, err)   " << corr << "\n";
    for (const auto& b : r.per_bucket) {
        out << "  " << b.name;
        for (std::size_t pad = b.name.size(); pad < 16; ++pad) out << ' ';
        out << "n=" << b.n << "  median " << pct(b.median_err) << "\n";
    }
    return out.str();
}

EvalImage generate_scene(const SyntheticScene& scene, double l_ref_truth)
{
    if (!(scene.true_gsd > 0.0)) throw Error(ErrorCode::invalid_argument, "true_gsd must be positive");
    if (!(scene.detector_noise_sigma >= 0.0)) throw Error(ErrorCode::invalid_argument, "noise sigma must be non-negative");
    if (!(l_ref_truth > 0.0)) throw Error(ErrorCode::invalid_argument, "l_ref_truth must be positive");

    std::mt19937_64 rng(scene.seed);
    std::uniform_real_distribution<double> conf_dist(0.3, 0.99);
    std::uniform_real_distribution<double> angle_dist(0.0, std::numbers::pi);

    std::vector<double> vehicle_px;
    vehicle_px.reserve(scene.vehicle_lengths_m.size());
    for (double len_m : scene.vehicle_lengths_m) {
        double px = len_m / scene.true_gsd;
        if (scene.detector_noise_sigma > 0.0) {
            px += std::normal_distribution<double>(0.0, scene.detector_noise_sigma)(rng);
        }
        vehicle_px.push_back(std::max(px, 1.0));
    }

    double longest = 1.0;
    for (double px : vehicle_px) longest = std::max(longest, px);
    for (double px : scene.false_positive_lengths_px) longest = std::max(longest, px);
    const int size = std::max(2048, static_cast<int>(std::ceil(8.0 * longest)));
    std::uniform_real_distribution<double> pos_dist(longest, size - longest);

    const double width_px = 0.36 * l_ref_truth / scene.true_gsd;

    EvalImage out;
    out.detections.image_id = scene.image_id;
    out.detections.width = size;
    out.detections.height = size;
    out.detections.source = DetectionSource::detector;
    out.meta = {scene.image_id, scene.true_gsd};

    auto place = [&](double length_px, double width, const char* label) {
        const Point2<double> centre(pos_dist(rng), pos_dist(rng));
        const double angle = angle_dist(rng);
        const double conf = conf_dist(rng);
        out.detections.detections.push_back(
            {make_obb(centre, length_px, std::min(width, 0.9 * length_px), angle), conf, label});
    };
    for (double px : vehicle_px) place(px, width_px, "small-vehicle");
    for (double px : scene.false_positive_lengths_px) place(px, 0.4 * px, "small-vehicle");
    return out;
}

double FleetMixture::pdf(double length_m) const
{
    double total = 0.0, wsum = 0.0;
    for (const auto& c : components) {
        const double z = (length_m - c.mean_m) / c.sd_m;
        total += c.weight * std::exp(-0.5 * z * z) / (c.sd_m * std::sqrt(2.0 * std::numbers::pi));
        wsum += c.weight;
    }
    return total / wsum;
}

double FleetMixture::mode() const
{
    if (components.empty()) throw Error(ErrorCode::invalid_argument, "empty fleet mixture");
    double lo = components.front().mean_m, hi = lo;
    for (const auto& c : components) {
        lo = std::min(lo, c.mean_m - 5.0 * c.sd_m);
        hi = std::max(hi, c.mean_m + 5.0 * c.sd_m);
    }
    const int n = 20001;
    const double step = (hi - lo) / (n - 1);
    double best_x = lo, best_f = pdf(lo);
    for (int i = 1; i < n; ++i) {
        const double x = lo + i * step;
        const double f = pdf(x);
        if (f > best_f) {
            best_f = f;
            best_x = x;
        }
    }
    double a = best_x - step, b = best_x + step;
    for (int it = 0; it < 100; ++it) {
        const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
        if (pdf(m1) < pdf(m2)) a = m1; else b = m2;
    }
    return (a + b) / 2.0;
}

std::vector<double> sample_fleet(const FleetMixture& fleet, std::size_t n, std::mt19937_64& rng)
{
    std::vector<double> weights;
    for (const auto& c : fleet.components) weights.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::vector<double> out;
    out.reserve(n);
    while (out.size() < n) {
        const auto& c = fleet.components[pick(rng)];
        const double len = std::normal_distribution<double>(c.mean_m, c.sd_m)(rng);
        if (len > 0.0) out.push_back(len);
    }
    return out;
}

std::vector<EvalImage> generate_trials(const TrialPlan& plan, const FleetMixture& fleet, double l_ref_truth)
{
    if (plan.min_vehicles > plan.max_vehicles) throw Error(ErrorCode::invalid_argument, "min_vehicles > max_vehicles");
    const double modal_m = fleet.mode();
    std::vector<EvalImage> trials;
    trials.reserve(plan.n_trials);
    for (std::size_t i = 0; i < plan.n_trials; ++i) {
        std::seed_seq seq{static_cast<std::uint32_t>(plan.seed), static_cast<std::uint32_t>(plan.seed >> 32),
                          static_cast<std::uint32_t>(i)};
        std::mt19937_64 rng(seq);
        SyntheticScene scene;
        scene.true_gsd = std::uniform_real_distribution<double>(plan.gsd_lo, plan.gsd_hi)(rng);
        const auto n = std::uniform_int_distribution<std::size_t>(plan.min_vehicles, plan.max_vehicles)(rng);
        scene.vehicle_lengths_m = sample_fleet(fleet, n, rng);
        const auto n_fp = static_cast<std::size_t>(std::lround(plan.fp_fraction * static_cast<double>(n)));
        std::uniform_real_distribution<double> fp_scale(plan.fp_scale_lo, plan.fp_scale_hi);
        for (std::size_t k = 0; k < n_fp; ++k) {
            scene.false_positive_lengths_px.push_back(fp_scale(rng) * modal_m / scene.true_gsd);
        }
        scene.detector_noise_sigma = plan.noise_px;
        scene.seed = rng();
        scene.image_id = "trial_" + std::to_string(i);
        trials.push_back(generate_scene(scene, l_ref_truth));
    }
    return trials;
}

std::vector<EvalRecord> run_estimates(const std::vector<EvalImage>& dataset, const EstimatorConfig& config)
{
    std::vector<EvalRecord> records;
    records.reserve(dataset.size());
    for (const auto& image : dataset) {
        if (!image.meta.gsd_gt) continue;
        records.push_back(make_record(image.detections.image_id, estimate_gsd(image.detections, config),
                                      *image.meta.gsd_gt));
    }
    return records;
}

std::vector<SweepCell> make_grid(const EstimatorConfig& base,
                                 const std::vector<Aggregation>& aggregations,
                                 const std::vector<double>& l_refs,
                                 const std::vector<std::optional<double>>& alphas)
{
    std::vector<SweepCell> grid;
    for (Aggregation agg : aggregations) {
        for (double l_ref : l_refs) {
            for (const auto& alpha : alphas) {
                SweepCell cell{{}, base};
                cell.config.aggregation = agg;
                cell.config.l_ref = l_ref;
                cell.config.alpha = alpha;
                char name[96];
                if (alpha) {
                    std::snprintf(name, sizeof name, "agg=%s l_ref=%g alpha=%g", to_string(agg), l_ref, *alpha);
                } else {
                    std::snprintf(name, sizeof name, "agg=%s l_ref=%g alpha=none", to_string(agg), l_ref);
                }
                cell.name = name;
                grid.push_back(std::move(cell));
            }
        }
    }
    return grid;
}

std::vector<SweepRow> ablation_sweep(const std::vector<EvalImage>& dataset, const std::vector<SweepCell>& grid)
{
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (const auto& cell : grid) {
        const auto records = run_estimates(dataset, cell.config);
        SweepRow row{cell, std::nullopt};
        const bool any = std::any_of(records.begin(), records.end(), [](const EvalRecord& r) { return r.rel_error.has_value(); });
        if (any) row.report = evaluate(records);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string num(const std::optional<double>& v)
{
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", *v);
    return buf;
}

std::string alpha_str(const std::optional<double>& alpha)
{
    return alpha ? num(alpha) : std::string("none");
}

} // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::ostringstream out;
    out << "aggregation,l_ref,alpha,n_evaluated,n_no_estimate,median_err,mean_err,frac_lt_10,frac_lt_20,"
           "corr,median_err_n_ge_20,median_err_n_lt_5,median_err_gsd_lt_0.3,median_err_gsd_gt_0.7\n";
    for (const auto& row : rows) {
        const auto& c = row.cell.config;
        out << to_string(c.aggregation) << ',' << num(c.l_ref) << ',' << alpha_str(c.alpha);
        if (!row.report) {
            out << ",0,,,,,,,,,,\n";
            continue;
        }
        const auto& r = *row.report;
        out << ',' << r.n_evaluated << ',' << r.n_no_estimate << ',' << num(r.median_err) << ',' << num(r.mean_err)
            << ',' << num(r.frac_lt_10) << ',' << num(r.frac_lt_20) << ',' << num(r.confidence_error_correlation);
        for (const auto& b : r.per_bucket) out << ',' << num(b.median_err);
        out << '\n';
    }
    return out.str();
}

std::string sweep_table(const std::vector<SweepRow>& rows)
{
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-8s %8s %6s %6s %10s %10s %8s %8s\n", "agg", "l_ref", "alpha", "n", "median",
                  "mean", "<10%", "<20%");
    out << line;
    for (const auto& row : rows) {
        const auto& c = row.cell.config;
        const std::string a = alpha_str(c.alpha);
        if (!row.report) {
            std::snprintf(line, sizeof line, "%-8s %8.4g %6s %6s\n", to_string(c.aggregation), c.l_ref, a.c_str(), "empty");
        } else {
            const auto& r = *row.report;
            std::snprintf(line, sizeof line, "%-8s %8.4g %6s %6zu %10s %10s %8s %8s\n", to_string(c.aggregation),
                          c.l_ref, a.c_str(), r.n_evaluated, pct(r.median_err).c_str(), pct(r.mean_err).c_str(),
                          pct(r.frac_lt_10).c_str(), pct(r.frac_lt_20).c_str());
        }
        out << line;
    }
    return out.str();
}

} // namespace gsdanchor
