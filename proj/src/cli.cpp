// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#include <gsdanchor/cli.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include <gsdanchor/benchmark.hpp>
#include <gsdanchor/error.hpp>
#include <gsdanchor/estimator.hpp>
#include <gsdanchor/ingest.hpp>
#include <gsdanchor/measurement.hpp>
#include <gsdanchor/toolapi.hpp>

namespace gsdanchor {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PipelineFlags
{
    std::string calibration;
    std::optional<double> l_ref;
    double min_conf = 0.1;
    std::string alpha = "1.5";
    std::size_t fallback_n = 5;
    bool weighted = false;
    double gsd_max = 0.3;
    std::string aggregation = "kde";
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f)
{
    cmd->add_option("--calibration", f.calibration, "Calibration JSON (defaults to $VANGUARD_CALIBRATION)");
    cmd->add_option("--l-ref", f.l_ref, "Reference length in metres; overrides the calibration");
    cmd->add_option("--min-conf", f.min_conf, "Detection confidence threshold")->capture_default_str();
    cmd->add_option("--alpha", f.alpha, "Outlier factor, or 'none'")->capture_default_str();
    cmd->add_option("--fallback-n", f.fallback_n, "Median fallback below this many detections")->capture_default_str();
    cmd->add_flag("--weighted", f.weighted, "Weight the KDE by detection confidence");
    cmd->add_option("--gsd-max", f.gsd_max, "Coarsest trusted GSD for the resolution guard")->capture_default_str();
    cmd->add_option("--aggregation", f.aggregation, "kde, median or mean")->capture_default_str();
}

std::optional<double> parse_alpha(const std::string& text)
{
    if (text == "none") return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_argument, "alpha must be a number or 'none', got '" + text + "'");
    }
}

CalibrationResult resolve_calibration(const PipelineFlags& f, std::ostream& err)
{
    if (f.l_ref) {
        CalibrationResult c;
        c.l_ref = *f.l_ref;
        c.kde.mode = c.l_ref;
        return c;
    }
    std::string path = f.calibration;
    if (path.empty()) {
        if (const char* env = std::getenv(kCalibrationEnv); env && *env) path = env;
    }
    if (path.empty()) {
        err << "no calibration given; using the DOTA reference length " << kDotaReferenceLength << " m\n";
        CalibrationResult c;
        c.l_ref = kDotaReferenceLength;
        c.kde.mode = c.l_ref;
        return c;
    }
    return load_calibration(path);
}

EstimatorConfig make_config(const PipelineFlags& f, const CalibrationResult& calibration)
{
    EstimatorConfig c;
    c.l_ref = calibration.l_ref;
    c.min_conf = f.min_conf;
    c.alpha = parse_alpha(f.alpha);
    c.fallback_n = f.fallback_n;
    c.weighted_kde = f.weighted;
    c.confidence.gsd_max = f.gsd_max;
    const auto agg = parse_aggregation(f.aggregation);
    if (!agg) throw Error(ErrorCode::invalid_argument, "unknown aggregation '" + f.aggregation + "'");
    c.aggregation = *agg;
    c.validate();
    return c;
}

std::vector<fs::path> text_files(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw Error(ErrorCode::io, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

/// GSD for an image: meta directory first, then the annotation's own header.
ImageMeta meta_for(const fs::path& annotation, const std::string& annotation_text, const std::string& meta_dir)
{
    const std::string id = annotation.stem().string();
    if (!meta_dir.empty()) {
        const fs::path p = fs::path(meta_dir) / (id + ".txt");
        if (fs::exists(p)) return load_gsd_meta(p);
    }
    return parse_gsd_meta(annotation_text, id);
}

std::vector<EvalImage> load_dota_dataset(const std::string& annotations, const std::string& meta_dir,
                                         const std::string& category, std::ostream& err)
{
    std::vector<EvalImage> images;
    int skipped = 0;
    for (const auto& file : text_files(annotations)) {
        const std::string text = read_text_file(file);
        DotaParseOptions opts;
        opts.image_id = file.stem().string();
        EvalImage img{parse_dota_annotation(text, category, opts), meta_for(file, text, meta_dir)};
        skipped += img.detections.n_skipped;
        images.push_back(std::move(img));
    }
    if (skipped > 0) err << "skipped " << skipped << " malformed annotation lines\n";
    return images;
}

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path);
    out << content;
    if (!out) throw Error(ErrorCode::io, "error writing " + path);
}

std::vector<std::string> split_csv(const std::string& text)
{
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

int run_calibrate(const std::string& annotations, const std::string& meta_dir, const std::string& category,
                  bool filter, const std::string& out_path, std::ostream& out, std::ostream& err)
{
    std::vector<AnnotatedImage> images;
    for (auto& img : load_dota_dataset(annotations, meta_dir, category, err)) {
        images.push_back({std::move(img.detections), std::move(img.meta)});
    }
    CalibrationOptions opts;
    opts.apply_outlier_filter = filter;
    const CalibrationResult cal = calibrate_lref(images, opts);
    const std::string doc = canonical_dump(to_json(cal));
    if (!out_path.empty()) write_file(out_path, doc);
    out << doc;
    return kExitOk;
}

int run_estimate(const std::string& detections, const std::string& dota, const std::string& category,
                 const PipelineFlags& flags, std::optional<std::int64_t> pixel_count, std::ostream& out,
                 std::ostream& err)
{
    if (detections.empty() == dota.empty()) {
        throw CLI::ValidationError("exactly one of --detections or --dota is required");
    }
    const CalibrationResult cal = resolve_calibration(flags, err);
    const EstimatorConfig config = make_config(flags, cal);
    const DetectionSet set = detections.empty() ? load_dota_annotation(dota, category)
                                                : read_detection_json(read_text_file(detections));
    const GsdEstimate est = estimate_gsd(set, config);
    out << canonical_dump(to_json(make_response(est, pixel_count)));
    return kExitOk;
}

std::vector<EvalRecord> load_predictions(const std::string& path, const std::string& gt_dir)
{
    std::istringstream in(read_text_file(path));
    std::vector<EvalRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded()) {
            throw Error(ErrorCode::schema, path + ": line " + std::to_string(line_no) + " is not valid JSON");
        }
        EvalRecord r = eval_record_from_json(doc);
        if (!gt_dir.empty()) {
            const fs::path meta = fs::path(gt_dir) / (r.image_id + ".txt");
            if (!fs::exists(meta)) continue;
            const ImageMeta m = load_gsd_meta(meta);
            if (!m.gsd_gt) continue;
            r.gsd_gt = *m.gsd_gt;
            r.rel_error = r.gsd_pred ? std::optional<double>(relative_error(*r.gsd_pred, r.gsd_gt)) : std::nullopt;
        }
        if (!(r.gsd_gt > 0.0)) continue;
        records.push_back(std::move(r));
    }
    return records;
}

void print_report(const EvalReport& report, const std::string& format, std::ostream& out)
{
    if (format == "json") {
        out << canonical_dump(to_json(report));
    } else if (format == "csv") {
        SweepRow row{{"evaluate", {}}, report};
        out << sweep_csv({row});
    } else {
        out << format_report(report);
    }
}

int run_evaluate(const std::string& pred, const std::string& annotations, const std::string& gt_dir,
                 const std::string& category, const PipelineFlags& flags, const std::string& format,
                 const std::string& records_out, std::ostream& out, std::ostream& err)
{
    if (pred.empty() == annotations.empty()) {
        throw CLI::ValidationError("exactly one of --pred or --annotations is required");
    }
    std::vector<EvalRecord> records;
    if (!pred.empty()) {
        records = load_predictions(pred, gt_dir);
    } else {
        const CalibrationResult cal = resolve_calibration(flags, err);
        records = run_estimates(load_dota_dataset(annotations, gt_dir, category, err), make_config(flags, cal));
    }
    if (!records_out.empty()) {
        std::string lines;
        for (const auto& r : records) lines += canonical_dump(to_json(r));
        write_file(records_out, lines);
    }
    print_report(evaluate(records), format, out);
    return kExitOk;
}

int run_area(std::optional<std::int64_t> pixel_count, std::optional<double> gsd, const std::string& detections,
             const std::string& counts, const std::string& pred, const PipelineFlags& flags, std::ostream& out,
             std::ostream& err)
{
    if (!counts.empty()) {
        if (gsd.has_value() == !pred.empty()) throw CLI::ValidationError("--counts needs exactly one of --gsd or --pred");
        std::map<std::string, EvalRecord> by_image;
        if (!pred.empty()) {
            for (auto& r : load_predictions(pred, {})) by_image[r.image_id] = r;
        }
        for (const auto& rec : parse_pixel_counts(read_text_file(counts))) {
            json row = {{"image_id", rec.image_id}, {"object_id", rec.object_id}, {"pixel_count", rec.pixel_count}};
            std::optional<double> g = gsd;
            double conf = 1.0;
            if (!g) {
                const auto it = by_image.find(rec.image_id);
                if (it != by_image.end() && it->second.gsd_pred) {
                    g = it->second.gsd_pred;
                    conf = it->second.confidence;
                }
            }
            if (g) {
                const AreaMeasurement m = measure_area(rec.pixel_count, *g, conf);
                row["gsd"] = m.gsd;
                row["area_m2"] = m.area;
                row["confidence"] = m.confidence_passthrough;
            } else {
                row["gsd"] = nullptr;
                row["area_m2"] = nullptr;
            }
            out << canonical_dump(row);
        }
        return kExitOk;
    }

    if (!pixel_count) throw CLI::ValidationError("--pixel-count or --counts is required");
    if (gsd.has_value() == !detections.empty()) {
        throw CLI::ValidationError("exactly one of --gsd or --detections is required");
    }
    if (gsd) {
        const AreaMeasurement m = measure_area(*pixel_count, *gsd, 1.0);
        out << canonical_dump({{"pixel_count", m.pixel_count}, {"gsd", m.gsd}, {"area_m2", m.area}});
        return kExitOk;
    }
    const CalibrationResult cal = resolve_calibration(flags, err);
    const GsdEstimate est = estimate_gsd(read_detection_json(read_text_file(detections)), make_config(flags, cal));
    json body = to_json(make_response(est, pixel_count));
    if (!est.gsd_pred) body["area"] = nullptr;
    out << canonical_dump(body);
    return kExitOk;
}

struct SweepFlags
{
    std::string annotations;
    std::string gt_dir;
    std::string category = "small-vehicle";
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    std::size_t min_vehicles = 20;
    std::size_t max_vehicles = 60;
    double noise = 1.0;
    double fp_fraction = 0.1;
    double gsd_lo = 0.05;
    double gsd_hi = 0.25;
    std::string aggregations = "kde,median,mean";
    std::string l_refs;
    std::string alphas = "1.5";
    std::string format = "table";
};

int run_sweep(const SweepFlags& f, const PipelineFlags& flags, std::ostream& out, std::ostream& err)
{
    std::vector<EvalImage> dataset;
    double default_l_ref = kDotaReferenceLength;
    if (!f.annotations.empty()) {
        dataset = load_dota_dataset(f.annotations, f.gt_dir, f.category, err);
        default_l_ref = resolve_calibration(flags, err).l_ref;
    } else {
        const FleetMixture fleet;
        default_l_ref = fleet.mode();
        TrialPlan plan;
        plan.n_trials = f.trials;
        plan.seed = f.seed;
        plan.min_vehicles = f.min_vehicles;
        plan.max_vehicles = f.max_vehicles;
        plan.noise_px = f.noise;
        plan.fp_fraction = f.fp_fraction;
        plan.gsd_lo = f.gsd_lo;
        plan.gsd_hi = f.gsd_hi;
        dataset = generate_trials(plan, fleet, default_l_ref);
        err << "synthetic fleet modal length " << default_l_ref << " m\n";
    }

    std::vector<Aggregation> aggs;
    for (const auto& a : split_csv(f.aggregations)) {
        const auto agg = parse_aggregation(a);
        if (!agg) throw Error(ErrorCode::invalid_argument, "unknown aggregation '" + a + "'");
        aggs.push_back(*agg);
    }
    std::vector<double> l_refs;
    for (const auto& v : split_csv(f.l_refs)) l_refs.push_back(std::stod(v));
    if (l_refs.empty()) l_refs.push_back(default_l_ref);
    std::vector<std::optional<double>> alphas;
    for (const auto& v : split_csv(f.alphas)) alphas.push_back(parse_alpha(v));

    EstimatorConfig base;
    base.min_conf = flags.min_conf;
    base.fallback_n = flags.fallback_n;
    base.weighted_kde = flags.weighted;
    base.confidence.gsd_max = flags.gsd_max;
    const auto rows = ablation_sweep(dataset, make_grid(base, aggs, l_refs, alphas));
    out << (f.format == "csv" ? sweep_csv(rows) : sweep_table(rows));
    return kExitOk;
}

int run_serve(const std::string& bind, const PipelineFlags& flags, std::ostream& out, std::ostream& err)
{
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--bind expects host:port");
    const std::string host = bind.substr(0, colon);
    const int port = std::stoi(bind.substr(colon + 1));

    const CalibrationResult cal = resolve_calibration(flags, err);
    ToolServer server(make_context(cal, make_config(flags, cal)));
    const int bound = server.bind(host, port);
    if (bound < 0) throw Error(ErrorCode::io, "cannot bind " + bind);
    err << "serving on " << host << ":" << bound << " (l_ref " << cal.l_ref << " m)\n";
    out.flush();
    return server.listen() ? kExitOk : kExitFailure;
}

struct GenFlags
{
    double gsd = 0.1;
    std::size_t vehicles = 20;
    std::optional<double> length;
    double noise = 0.0;
    std::size_t n_fp = 0;
    double fp_length = 200.0;
    std::uint64_t seed = 0;
    std::string image_id = "synthetic";
    std::string out_path;
    std::string meta_out;
};

int run_gen(const GenFlags& f, std::ostream& out)
{
    const FleetMixture fleet;
    const double l_ref_truth = f.length ? *f.length : fleet.mode();
    SyntheticScene scene;
    scene.true_gsd = f.gsd;
    scene.seed = f.seed;
    scene.detector_noise_sigma = f.noise;
    scene.image_id = f.image_id;
    if (f.length) {
        scene.vehicle_lengths_m.assign(f.vehicles, *f.length);
    } else {
        std::mt19937_64 rng(f.seed ^ 0x9e3779b97f4a7c15ULL);
        scene.vehicle_lengths_m = sample_fleet(fleet, f.vehicles, rng);
    }
    scene.false_positive_lengths_px.assign(f.n_fp, f.fp_length);
    const EvalImage img = generate_scene(scene, l_ref_truth);
    const std::string doc = write_detection_json(img.detections);
    if (!f.meta_out.empty()) {
        char line[64];
        std::snprintf(line, sizeof line, "gsd:%.9g\n", f.gsd);
        write_file(f.meta_out, line);
    }
    if (!f.out_path.empty()) {
        write_file(f.out_path, doc);
    } else {
        out << doc;
    }
    return kExitOk;
}

} // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Ground sample distance from oriented vehicle detections", "gsdanchor"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // calibrate
    std::string annotations, meta_dir, category = "small-vehicle", cal_out;
    bool cal_filter = false;
    auto* calibrate = app.add_subcommand("calibrate", "Calibrate the reference length from ground-truth annotations");
    calibrate->add_option("--annotations", annotations, "Directory of DOTA label files")->required();
    calibrate->add_option("--meta", meta_dir, "Directory of per-image metadata files with gsd lines");
    calibrate->add_option("--category", category, "Vehicle category")->capture_default_str();
    calibrate->add_flag("--filter-outliers", cal_filter, "Apply the median outlier filter per image");
    calibrate->add_option("--out", cal_out, "Also write the calibration JSON here");

    // estimate
    PipelineFlags est_flags;
    std::string est_detections, est_dota;
    std::optional<std::int64_t> est_pixels;
    auto* estimate = app.add_subcommand("estimate", "Estimate GSD for one image");
    estimate->add_option("--detections", est_detections, "Detection JSON document");
    estimate->add_option("--dota", est_dota, "DOTA label file (ground-truth baseline)");
    estimate->add_option("--category", category, "Vehicle category for --dota")->capture_default_str();
    estimate->add_option("--pixel-count", est_pixels, "Also convert this mask pixel count to an area");
    add_pipeline_flags(estimate, est_flags);

    // evaluate
    PipelineFlags eval_flags;
    std::string pred, eval_annotations, gt_dir, eval_format = "table", records_out;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Relative-error report against ground-truth GSD");
    evaluate_cmd->add_option("--pred", pred, "Per-image predictions (NDJSON)");
    evaluate_cmd->add_option("--annotations", eval_annotations, "Run the estimator on DOTA label files instead");
    evaluate_cmd->add_option("--gt", gt_dir, "Directory of <image_id>.txt metadata files");
    evaluate_cmd->add_option("--category", category, "Vehicle category")->capture_default_str();
    evaluate_cmd->add_option("--format", eval_format, "table, json or csv")
        ->check(CLI::IsMember({"table", "json", "csv"}))
        ->capture_default_str();
    evaluate_cmd->add_option("--records", records_out, "Write per-image records (NDJSON)");
    add_pipeline_flags(evaluate_cmd, eval_flags);

    // area
    PipelineFlags area_flags;
    std::optional<std::int64_t> area_pixels;
    std::optional<double> area_gsd;
    std::string area_detections, counts, area_pred;
    auto* area = app.add_subcommand("area", "Convert pixel counts to square metres");
    area->add_option("--pixel-count", area_pixels, "Mask pixel count");
    area->add_option("--gsd", area_gsd, "GSD in m/px");
    area->add_option("--detections", area_detections, "Estimate the GSD from this detection JSON");
    area->add_option("--counts", counts, "File of 'image_id object_id pixel_count' records");
    area->add_option("--pred", area_pred, "Per-image predictions (NDJSON) supplying GSD for --counts");
    add_pipeline_flags(area, area_flags);

    // sweep
    PipelineFlags sweep_pipeline;
    SweepFlags sf;
    auto* sweep = app.add_subcommand("sweep", "Ablation grid over aggregation, l_ref and alpha");
    sweep->add_option("--annotations", sf.annotations, "DOTA label directory (default: synthetic trials)");
    sweep->add_option("--gt", sf.gt_dir, "Metadata directory for --annotations");
    sweep->add_option("--category", sf.category)->capture_default_str();
    sweep->add_option("--trials", sf.trials)->capture_default_str();
    sweep->add_option("--seed", sf.seed)->capture_default_str();
    sweep->add_option("--min-vehicles", sf.min_vehicles)->capture_default_str();
    sweep->add_option("--max-vehicles", sf.max_vehicles)->capture_default_str();
    sweep->add_option("--noise", sf.noise, "Detector noise sigma in pixels")->capture_default_str();
    sweep->add_option("--fp-fraction", sf.fp_fraction)->capture_default_str();
    sweep->add_option("--gsd-lo", sf.gsd_lo)->capture_default_str();
    sweep->add_option("--gsd-hi", sf.gsd_hi)->capture_default_str();
    sweep->add_option("--aggregations", sf.aggregations)->capture_default_str();
    sweep->add_option("--l-refs", sf.l_refs, "Comma-separated reference lengths");
    sweep->add_option("--alphas", sf.alphas, "Comma-separated outlier factors or 'none'")->capture_default_str();
    sweep->add_option("--format", sf.format)->check(CLI::IsMember({"table", "csv"}))->capture_default_str();
    add_pipeline_flags(sweep, sweep_pipeline);

    // serve
    PipelineFlags serve_flags;
    std::string bind = "127.0.0.1:8080";
    auto* serve = app.add_subcommand("serve", "Run the HTTP tool endpoint");
    serve->add_option("--bind", bind, "host:port")->capture_default_str();
    add_pipeline_flags(serve, serve_flags);

    // gen
    GenFlags gf;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic detection document");
    gen->add_option("--gsd", gf.gsd, "True GSD in m/px")->capture_default_str();
    gen->add_option("--vehicles", gf.vehicles, "Number of vehicles")->capture_default_str();
    gen->add_option("--length", gf.length, "Uniform vehicle length in metres (default: mixture fleet)");
    gen->add_option("--noise", gf.noise, "Detector noise sigma in pixels")->capture_default_str();
    gen->add_option("--fp", gf.n_fp, "Number of false positives")->capture_default_str();
    gen->add_option("--fp-length", gf.fp_length, "False-positive length in pixels")->capture_default_str();
    gen->add_option("--seed", gf.seed, "Random seed")->capture_default_str();
    gen->add_option("--image-id", gf.image_id, "Image identifier")->capture_default_str();
    gen->add_option("--out", gf.out_path, "Output path (default: stdout)");
    gen->add_option("--meta-out", gf.meta_out, "Write a gsd:<value> metadata file");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);

        if (calibrate->parsed()) return run_calibrate(annotations, meta_dir, category, cal_filter, cal_out, out, err);
        if (estimate->parsed()) return run_estimate(est_detections, est_dota, category, est_flags, est_pixels, out, err);
        if (evaluate_cmd->parsed()) {
            return run_evaluate(pred, eval_annotations, gt_dir, category, eval_flags, eval_format, records_out, out, err);
        }
        if (area->parsed()) return run_area(area_pixels, area_gsd, area_detections, counts, area_pred, area_flags, out, err);
        if (sweep->parsed()) return run_sweep(sf, sweep_pipeline, out, err);
        if (serve->parsed()) return run_serve(bind, serve_flags, out, err);
        if (gen->parsed()) return run_gen(gf, out);
        return kExitUsage;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return kExitOk;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

} // namespace gsdanchor
