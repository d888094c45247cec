#include "pm2lat/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>

#include "pm2lat/aggregate.hpp"
#include "pm2lat/curve_analysis.hpp"
#include "pm2lat/error.hpp"
#include "pm2lat/ingest.hpp"
#include "pm2lat/log.hpp"
#include "pm2lat/nas_cache.hpp"
#include "pm2lat/oracle.hpp"
#include "pm2lat/partition.hpp"
#include "pm2lat/report.hpp"

namespace pm2lat::cli {

using nlohmann::json;

namespace {

struct Globals {
    std::string dataset;
    std::string output;
    std::string format = "json";
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    bool quiet = false;
};

// Raised when a required input is absent; run() prints the subcommand help.
struct MissingInput : UsageError {
    const CLI::App* app;
    MissingInput(const std::string& what, const CLI::App* a) : UsageError(what), app(a) {}
};

class Context {
public:
    Context(Globals& g, std::ostream& out, std::ostream& err) : g_(g), out_(out), err_(err) {}

    const Globals& globals() const { return g_; }

    void emit(const std::string& text) const {
        if (g_.output.empty()) {
            out_ << text;
            out_.flush();
        } else {
            write_text_file(g_.output, text);
        }
    }
    void emit(const json& j) const { emit(j.dump(2) + "\n"); }

    void note(const std::string& message) const {
        if (!g_.quiet) err_ << message << '\n';
    }

    Dataset dataset(const CLI::App* app) const {
        if (g_.dataset.empty()) throw MissingInput("--dataset is required (or set PM2LAT_DATASET)", app);
        return load_dataset(g_.dataset);
    }

    void require_json(const std::string& subcommand) const {
        if (g_.format != "json") throw UsageError(subcommand + " only supports --format json");
    }

private:
    Globals& g_;
    std::ostream& out_;
    std::ostream& err_;
};

std::optional<WaveModel> wave_override(std::int64_t blocks_per_sm, const Dataset& ds) {
    if (blocks_per_sm <= 0) return std::nullopt;
    return WaveModel{ds.device.sm_count, blocks_per_sm};
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::vector<std::string> files;
};

void cmd_ingest(const Context& ctx, const IngestArgs& a) {
    ctx.require_json("ingest");
    Dataset merged = load_dataset(a.files.front());
    for (std::size_t i = 1; i < a.files.size(); ++i) merged = merge_datasets(merged, load_dataset(a.files[i]));
    canonicalize(merged);
    validate(merged, a.files.size() == 1 ? a.files.front() : "merged dataset");
    ctx.note("ok: " + merged.device.device_id + ", " + std::to_string(merged.curves.size()) + " curves, " +
             std::to_string(merged.config_map.size()) + " config records, " +
             std::to_string(merged.membound_records.size()) + " memory-bound records");
    ctx.emit(to_json(merged));
}

struct FitArgs {
    std::string kernel;
    std::string dtype;
    bool curves = false;
};

void cmd_fit(const Context& ctx, const FitArgs& a, const CLI::App* app) {
    ctx.require_json("fit");
    Dataset ds = ctx.dataset(app);
    if (a.curves) {
        json fits = json::array();
        for (const auto& [key, curve] : ds.curves) {
            std::vector<Point2> pts;
            for (const auto& s : curve.samples) {
                pts.push_back({static_cast<double>(s.dim_value), s.throughput_gflops});
            }
            json entry = {{"kernel", to_json(key)}};
            try {
                entry["fit"] = to_json(fit_rational(pts));
            } catch (const Error& e) {
                if (e.category() != ErrorCategory::Data) throw;
                entry["fit"] = nullptr;
                entry["error"] = e.what();
            }
            fits.push_back(std::move(entry));
        }
        ctx.emit(json{{"device_id", ds.device.device_id}, {"curve_fits", std::move(fits)}});
        return;
    }
    if (!a.kernel.empty()) {
        const DType dtype = a.dtype.empty() ? DType::FP32 : parse_dtype(a.dtype);
        auto model = fit(ds.membound_records, a.kernel, dtype, ds.device.device_id);
        std::erase_if(ds.membound_models,
                      [&](const MemBoundModel& m) { return m.kernel_name == a.kernel && m.dtype == dtype; });
        ds.membound_models.push_back(std::move(model));
    } else {
        ds.membound_models = fit_all(ds);
    }
    canonicalize(ds);
    validate(ds);
    for (const auto& m : ds.membound_models) {
        ctx.note(m.kernel_name + "/" + std::string(to_string(m.dtype)) +
                 ": mean rel err " + std::to_string(m.residual_stats.mean_rel_err) + ", max " +
                 std::to_string(m.residual_stats.max_rel_err));
    }
    ctx.emit(to_json(ds));
}

struct PredictArgs {
    std::string family;
    std::string dtype = "fp32";
    std::string transpose;
    std::int64_t batch = 1, m = 0, n = 0, k = 0;
    std::int64_t rows = 0, length = 0;
    std::int64_t heads = 1, q_len = 0, kv_len = 0;
    std::string features_file;
    double flops = 0, int_ops = 0, bytes_loaded = 0, bytes_stored = 0, total_bytes = -1;
    std::int64_t blocks_per_sm = 0;
};

std::int64_t positive(std::int64_t v, const char* flag) {
    if (v < 1) throw UsageError(std::string("--") + flag + " must be given and >= 1");
    return v;
}

void cmd_predict(const Context& ctx, const PredictArgs& a, const CLI::App* app) {
    ctx.require_json("predict");
    const Dataset ds = ctx.dataset(app);
    const Predictor predictor(ds, wave_override(a.blocks_per_sm, ds));
    const Family family = parse_family(a.family);
    const DType dtype = parse_dtype(a.dtype);
    Prediction p;
    if (family.is_utility()) {
        MemBoundFeatures f;
        if (!a.features_file.empty()) {
            f = features_from_json(read_json_file(a.features_file), a.features_file);
        } else {
            f = {a.flops, a.int_ops, a.bytes_loaded, a.bytes_stored,
                 a.total_bytes >= 0 ? a.total_bytes : a.bytes_loaded + a.bytes_stored};
        }
        validate(f);
        p = predictor.predict_utility(family.utility_name, dtype, f);
    } else {
        KernelInstance instance;
        switch (family.kind) {
            case FamilyKind::TritonVec:
                instance = VectorShape{positive(a.rows, "rows"), positive(a.length, "length")};
                break;
            case FamilyKind::FlashAttention:
            case FamilyKind::CutlassAttention:
                instance = AttentionShape{positive(a.batch, "batch"), positive(a.heads, "heads"),
                                          positive(a.q_len, "q-len"), positive(a.kv_len, "kv-len")};
                break;
            default:
                instance = MatMulShape{positive(a.batch, "batch"), positive(a.m, "m"), positive(a.n, "n"),
                                       positive(a.k, "k")};
        }
        const auto transpose = a.transpose.empty() ? default_transpose(family) : parse_transpose(a.transpose);
        p = predictor.predict_compute_instance(family, dtype, transpose, instance);
    }
    ctx.emit(to_json(p));
}

struct GraphArgs {
    std::string graph;
    std::int64_t blocks_per_sm = 0;
};

void cmd_predict_model(const Context& ctx, const GraphArgs& a, const CLI::App* app) {
    const Dataset ds = ctx.dataset(app);
    const auto graph = load_model_graph(a.graph);
    const auto mp = predict_model(graph, Predictor(ds, wave_override(a.blocks_per_sm, ds)));
    for (const auto& f : mp.flags) ctx.note("note: layer '" + f.layer_id + "' " + f.flag);
    if (ctx.globals().format == "csv") {
        std::ostringstream csv;
        csv << "layer_id,predictor_kind,latency_us\n";
        for (const auto& lp : mp.per_layer) {
            csv << lp.layer_id << ',' << to_string(lp.kind) << ',' << shortest(lp.prediction.latency_us) << '\n';
        }
        ctx.emit(csv.str());
    } else {
        ctx.emit(to_json(mp));
    }
}

struct PrecomputeArgs {
    std::string grid;
    std::string store;
    bool skip_unresolved = false;
};

void cmd_precompute(const Context& ctx, const PrecomputeArgs& a, const CLI::App* app) {
    ctx.require_json("precompute");
    const Dataset ds = ctx.dataset(app);
    const auto grid = load_grid(a.grid);
    const Predictor predictor(ds);
    const auto summary = precompute(grid, predictor, a.store, {ctx.globals().jobs, a.skip_unresolved});
    ctx.note("precomputed " + std::to_string(summary.count) + " points in " + std::to_string(summary.elapsed_s) +
             " s (" + std::to_string(summary.mean_us_per_prediction) + " us/point)");
    // Timing stays on the diagnostic stream so stdout is reproducible.
    ctx.emit(json{{"store", a.store},
                  {"entry_count", summary.count},
                  {"skipped", summary.skipped},
                  {"grid_fingerprint", fingerprint(grid)},
                  {"dataset_fingerprint", predictor.dataset_fingerprint()}});
}

struct LookupArgs {
    std::string store;
    std::vector<std::string> at;
};

void cmd_lookup(const Context& ctx, const LookupArgs& a) {
    ctx.require_json("lookup");
    std::optional<std::string> expected;
    if (!ctx.globals().dataset.empty()) expected = fingerprint(load_dataset(ctx.globals().dataset));
    const auto store = CacheStore::open(a.store, expected);
    std::map<std::string, std::int64_t> point;
    for (const auto& spec : a.at) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw UsageError("--at expects axis=value, got '" + spec + "'");
        std::int64_t v = 0;
        try {
            std::size_t used = 0;
            v = std::stoll(spec.substr(eq + 1), &used);
            if (used != spec.size() - eq - 1) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw UsageError("--at value is not an integer: '" + spec + "'");
        }
        point[spec.substr(0, eq)] = v;
    }
    const double latency = store.lookup(point);
    ctx.emit(json{{"point", point}, {"latency_us", latency}, {"device_id", store.header().value("device_id", "")}});
}

struct PartitionArgs {
    std::string graph;
    std::string dataset_b;
    std::int64_t requests = 1;
    double link_gbs = 0;
};

void cmd_partition(const Context& ctx, const PartitionArgs& a, const CLI::App* app) {
    ctx.require_json("partition");
    const Dataset ds_a = ctx.dataset(app);
    const Dataset ds_b = load_dataset(a.dataset_b);
    const auto graph = load_model_graph(a.graph);
    const auto plan = partition_two_device(graph, Predictor(ds_a), Predictor(ds_b), {a.link_gbs});
    auto j = to_json(plan);
    j["device_a"] = ds_a.device.device_id;
    j["device_b"] = ds_b.device.device_id;
    j["layer_count"] = graph.layers.size();
    j["requests"] = a.requests;
    j["estimated_total_us"] = throughput_estimate(plan, a.requests);
    ctx.emit(j);
}

struct ReportArgs {
    std::string cases;
    std::size_t bins = 100;
    bool grid_error = false;
    std::string preset;
    std::string oracle_config;
    std::int64_t stride = 1;
};

oracle::OracleConfig load_oracle(const std::string& preset_name, const std::string& config_path) {
    if (!preset_name.empty() && !config_path.empty()) throw UsageError("give either --preset or --config, not both");
    if (!config_path.empty()) return oracle::oracle_config_from_json(read_json_file(config_path), config_path);
    if (preset_name.empty()) throw UsageError("one of --preset or --config is required");
    return oracle::preset(preset_name);
}

void cmd_report_grid(const Context& ctx, const ReportArgs& a) {
    ctx.require_json("report --grid-error");
    auto cfg = load_oracle(a.preset, a.oracle_config);
    cfg.device.noise_rel_sigma = 0;
    const Dataset ds = oracle::emit_fixture(cfg.device, cfg.plan);
    json per_kernel = json::array();
    GridErrorReport worst;
    std::optional<KernelKey> worst_key;
    for (const auto& [key, curve] : ds.curves) {
        const auto planted = cfg.device.curves.at(key);
        const auto r = grid_error_report(
            curve, [&](std::int64_t x) { return planted(static_cast<double>(x)); }, a.stride);
        if (!worst_key || r.max_rel_err > worst.max_rel_err) {
            worst = r;
            worst_key = key;
        }
        per_kernel.push_back({{"kernel", to_json(key)}, {"report", to_json(r)}});
    }
    if (!worst_key) throw EmptyInput("oracle config plants no throughput curves");
    ctx.emit(json{{"max_rel_err", worst.max_rel_err},
                  {"argmax", worst.argmax_dim},
                  {"kernel", to_json(*worst_key)},
                  {"per_kernel", std::move(per_kernel)}});
}

void cmd_report(const Context& ctx, const ReportArgs& a, const CLI::App* app) {
    if (a.grid_error) {
        cmd_report_grid(ctx, a);
        return;
    }
    if (a.cases.empty()) throw MissingInput("--cases is required unless --grid-error is given", app);
    auto inputs = cases_from_json(read_json_file(a.cases), a.cases);
    std::optional<Predictor> predictor;
    std::vector<ErrorCase> cases;
    cases.reserve(inputs.size());
    for (auto& in : inputs) {
        if (in.layer) {
            if (!predictor) predictor.emplace(ctx.dataset(app));
            in.error_case.predicted_us = predictor->predict_layer(*in.layer).latency_us;
        }
        cases.push_back(std::move(in.error_case));
    }
    const auto report = build_error_report(cases, {}, a.bins);
    if (ctx.globals().format == "csv") ctx.emit(error_report_csv(report));
    else ctx.emit(to_json(report));
}

struct OracleArgs {
    std::string preset;
    std::string config;
    std::optional<double> noise;
    std::string name;
};

void cmd_oracle_emit(const Context& ctx, const OracleArgs& a) {
    ctx.require_json("oracle emit");
    auto cfg = load_oracle(a.preset, a.config);
    if (ctx.globals().seed) cfg.device.noise_seed = *ctx.globals().seed;
    if (a.noise) cfg.device.noise_rel_sigma = *a.noise;
    const auto ds = oracle::emit_fixture(cfg.device, cfg.plan);
    ctx.note("emitted " + ds.device.device_id + ": " + std::to_string(ds.curves.size()) + " curves, " +
             std::to_string(ds.config_map.size()) + " config records, " +
             std::to_string(ds.membound_records.size()) + " memory-bound records");
    ctx.emit(to_json(ds));
}

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Usage: return kExitUsage;
        case ErrorCategory::Data: return kExitData;
        case ErrorCategory::Prediction: return kExitPrediction;
        case ErrorCategory::Io: return kExitIo;
    }
    return kExitData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Globals g;
    Context ctx(g, out, err);

    CLI::App app{"Kernel-aware GPU latency predictor", "pm2lat"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--dataset", g.dataset, "Dataset JSON")->envname("PM2LAT_DATASET");
    app.add_option("--output", g.output, "Write machine output here instead of stdout");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--seed", g.seed, "Noise seed override for oracle emit");
    app.add_option("--jobs", g.jobs, "Worker threads for precompute")->check(CLI::Range(1U, 1024U));
    app.add_flag("--quiet", g.quiet, "Suppress diagnostics other than errors");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Validate and merge datasets; prints the canonical merged dataset");
    c_ingest->add_option("files", ingest.files, "Dataset files")->required()->check(CLI::ExistingFile);

    FitArgs fitargs;
    auto* c_fit = app.add_subcommand("fit", "Fit memory-bound models (or rational curve fits with --curves)");
    c_fit->add_option("--kernel", fitargs.kernel, "Fit only this utility kernel");
    c_fit->add_option("--dtype", fitargs.dtype, "dtype of --kernel (default fp32)");
    c_fit->add_flag("--curves", fitargs.curves, "Fit (a x + b) / (c x + d) to every throughput curve");

    PredictArgs pa;
    auto* c_predict = app.add_subcommand("predict", "Predict one kernel instance");
    c_predict->add_option("--family", pa.family, "matmul, linear, batched_matmul, triton_mm, triton_vec, "
                                                 "flash_attention, cutlass_attention or utility:<name>")
        ->required();
    c_predict->add_option("--dtype", pa.dtype, "fp32 or bf16");
    c_predict->add_option("--transpose", pa.transpose, "NN, TN, NT or TT (default per family)");
    c_predict->add_option("--batch", pa.batch);
    c_predict->add_option("--m", pa.m);
    c_predict->add_option("--n", pa.n);
    c_predict->add_option("--k", pa.k);
    c_predict->add_option("--rows", pa.rows);
    c_predict->add_option("--length", pa.length);
    c_predict->add_option("--heads", pa.heads);
    c_predict->add_option("--q-len", pa.q_len);
    c_predict->add_option("--kv-len", pa.kv_len);
    c_predict->add_option("--features", pa.features_file, "Utility features JSON file")->check(CLI::ExistingFile);
    c_predict->add_option("--flops", pa.flops);
    c_predict->add_option("--int-ops", pa.int_ops);
    c_predict->add_option("--bytes-loaded", pa.bytes_loaded);
    c_predict->add_option("--bytes-stored", pa.bytes_stored);
    c_predict->add_option("--total-bytes", pa.total_bytes, "Defaults to loaded + stored");
    c_predict->add_option("--blocks-per-sm", pa.blocks_per_sm, "Override resident blocks per SM");

    GraphArgs ga;
    auto* c_model = app.add_subcommand("predict-model", "Predict a whole model graph");
    c_model->add_option("--graph", ga.graph, "Model graph JSON")->required();
    c_model->add_option("--blocks-per-sm", ga.blocks_per_sm, "Override resident blocks per SM");

    PrecomputeArgs pc;
    auto* c_pre = app.add_subcommand("precompute", "Predict every point of a grid into a store file");
    c_pre->add_option("--grid", pc.grid, "Grid JSON")->required();
    c_pre->add_option("--store", pc.store, "Store file to write")->required();
    c_pre->add_flag("--skip-unresolved", pc.skip_unresolved, "Leave out points with no usable configuration");

    LookupArgs lk;
    auto* c_lookup = app.add_subcommand("lookup", "Look up one point in a store file");
    c_lookup->add_option("--store", lk.store, "Store file")->required();
    c_lookup->add_option("--at", lk.at, "axis=value, repeatable")->required();

    PartitionArgs pt;
    auto* c_part = app.add_subcommand("partition", "Split a graph across two devices (A = --dataset)");
    c_part->add_option("--graph", pt.graph, "Model graph JSON")->required();
    c_part->add_option("--dataset-b", pt.dataset_b, "Dataset of device B")->required();
    c_part->add_option("--requests", pt.requests, "Pipelined requests")->check(CLI::PositiveNumber);
    c_part->add_option("--link-gbs", pt.link_gbs, "Link bandwidth in GB/s (0 = ignore transfer)")
        ->check(CLI::NonNegativeNumber);

    ReportArgs ra;
    auto* c_report = app.add_subcommand("report", "Error report over measured cases, or grid-error analysis");
    c_report->add_option("--cases", ra.cases, "Cases JSON");
    c_report->add_option("--bins", ra.bins, "Bins over the axis")->check(CLI::PositiveNumber);
    c_report->add_flag("--grid-error", ra.grid_error, "Dense interpolation error against an oracle");
    c_report->add_option("--preset", ra.preset, "Oracle preset for --grid-error");
    c_report->add_option("--config", ra.oracle_config, "Oracle config JSON for --grid-error");
    c_report->add_option("--stride", ra.stride, "Scan stride for --grid-error")->check(CLI::PositiveNumber);

    OracleArgs oa;
    auto* c_oracle = app.add_subcommand("oracle", "Synthetic ground-truth fixtures");
    c_oracle->require_subcommand(1);
    auto* c_emit = c_oracle->add_subcommand("emit", "Emit a fixture dataset");
    c_emit->add_option("--preset", oa.preset, "Preset name");
    c_emit->add_option("--config", oa.config, "Oracle config JSON");
    c_emit->add_option("--noise", oa.noise, "Relative log-normal noise sigma")->check(CLI::NonNegativeNumber);
    auto* c_show = c_oracle->add_subcommand("preset", "Print a preset's oracle config");
    c_show->add_option("name", oa.name, "Preset name")->required();
    auto* c_list = c_oracle->add_subcommand("list", "List preset names");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    if (!argv.empty()) argv.pop_back();  // program name

    const CLI::App* active = &app;
    int code = kExitOk;
    try {
        app.parse(argv);
        set_warning_sink(g.quiet ? WarningSink([](std::string_view) {})
                                 : WarningSink([&err](std::string_view m) { err << "warning: " << m << '\n'; }));
        if (g.format == "csv" && !c_report->parsed() && !c_model->parsed()) {
            throw UsageError("--format csv is only supported by report and predict-model");
        }
        const std::vector<std::pair<CLI::App*, std::function<void()>>> commands = {
            {c_ingest, [&] { cmd_ingest(ctx, ingest); }},
            {c_fit, [&] { cmd_fit(ctx, fitargs, c_fit); }},
            {c_predict, [&] { cmd_predict(ctx, pa, c_predict); }},
            {c_model, [&] { cmd_predict_model(ctx, ga, c_model); }},
            {c_pre, [&] { cmd_precompute(ctx, pc, c_pre); }},
            {c_lookup, [&] { cmd_lookup(ctx, lk); }},
            {c_part, [&] { cmd_partition(ctx, pt, c_part); }},
            {c_report, [&] { cmd_report(ctx, ra, c_report); }},
            {c_emit, [&] { cmd_oracle_emit(ctx, oa); }},
            {c_show,
             [&] {
                 ctx.require_json("oracle preset");
                 ctx.emit(oracle::to_json(oracle::preset(oa.name)));
             }},
            {c_list, [&] { ctx.emit(json(oracle::preset_names())); }},
        };
        for (const auto& [sub, action] : commands) {
            if (!sub->parsed()) continue;
            active = sub;
            action();
            break;
        }
    } catch (const CLI::ParseError& e) {
        code = app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    } catch (const MissingInput& e) {
        err << "error: " << e.what() << "\n\n" << e.app->help();
        code = kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        if (e.category() == ErrorCategory::Usage) err << "run '" << active->get_name() << " --help' for usage\n";
        code = exit_code(e.category());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        code = kExitIo;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        code = kExitData;
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        code = kExitIo;
    }
    reset_warning_sink();
    return code;
}

}  // namespace pm2lat::cli
