#include "pm2lat/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "pm2lat/error.hpp"
#include "pm2lat/log.hpp"

namespace pm2lat {

using nlohmann::json;

namespace {

// Typed field access over one JSON object, tracking a JSON pointer for
// diagnostics and warning about fields nobody asked for.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string pointer, const std::string& source)
        : j_(j), pointer_(std::move(pointer)), source_(source) {
        if (!j_.is_object()) fail(pointer_.empty() ? "/" : pointer_, "expected an object");
    }

    bool has(const std::string& name) const { return j_.contains(name) && !j_.at(name).is_null(); }

    const json& at(const std::string& name) {
        used_.insert(name);
        if (!has(name)) fail(child_pointer(name), "missing field");
        return j_.at(name);
    }

    double number(const std::string& name) {
        const auto& v = at(name);
        if (!v.is_number()) fail(child_pointer(name), "expected a number");
        return v.get<double>();
    }

    std::optional<double> optional_number(const std::string& name) {
        used_.insert(name);
        if (!has(name)) return std::nullopt;
        return number(name);
    }

    std::int64_t integer(const std::string& name) {
        const auto& v = at(name);
        if (v.is_number_integer()) return v.get<std::int64_t>();
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (d == static_cast<double>(static_cast<std::int64_t>(d))) return static_cast<std::int64_t>(d);
        }
        fail(child_pointer(name), "expected an integer");
    }

    std::optional<std::int64_t> optional_integer(const std::string& name) {
        used_.insert(name);
        if (!has(name)) return std::nullopt;
        return integer(name);
    }

    std::string string(const std::string& name) {
        const auto& v = at(name);
        if (!v.is_string()) fail(child_pointer(name), "expected a string");
        return v.get<std::string>();
    }

    // Parses an enum-like string field, converting parser errors into
    // SchemaErrors with a locator.
    template <typename Parse>
    auto parsed(const std::string& name, Parse parse) {
        const auto text = string(name);
        try {
            return parse(text);
        } catch (const SchemaError& e) {
            fail(child_pointer(name), e.what());
        }
    }

    const json& array(const std::string& name) {
        const auto& v = at(name);
        if (!v.is_array()) fail(child_pointer(name), "expected an array");
        return v;
    }

    void ignore(const std::string& name) { used_.insert(name); }

    std::string child_pointer(const std::string& name) const { return pointer_ + "/" + name; }
    const std::string& pointer() const { return pointer_; }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!used_.contains(key)) {
                warn(source_ + ": ignoring unknown field " + child_pointer(key));
            }
        }
    }

    [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
        throw SchemaError(source_ + ": " + pointer + ": " + message);
    }

private:
    const json& j_;
    std::string pointer_;
    const std::string& source_;
    std::set<std::string> used_;
};

template <typename Fn>
auto with_locator(const std::string& source, const std::string& pointer, Fn fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + pointer + ": " + e.what());
    }
}

KernelKey read_kernel(const json& j, const std::string& pointer, const std::string& source) {
    ObjectReader r(j, pointer, source);
    KernelKey k;
    const auto family_text = r.string("family");
    try {
        k.family = parse_family(family_text);
    } catch (const Error&) {
        r.fail(r.child_pointer("family"), "unknown family '" + family_text + "'");
    }
    k.dtype = r.parsed("dtype", parse_dtype);
    if (k.family.is_utility()) {
        k.library = Library::Custom;
        k.split_k = 0;
        for (const char* ignored : {"library", "algorithm_id", "tile_m", "tile_n", "split_k", "swizzle",
                                    "reduction_scheme", "stages", "transpose_mode"}) {
            r.ignore(ignored);
        }
        r.finish();
        return k;
    }
    k.library = r.parsed("library", parse_library);
    k.algorithm_id = r.integer("algorithm_id");
    k.tile_m = r.integer("tile_m");
    k.tile_n = r.integer("tile_n");
    k.split_k = r.optional_integer("split_k").value_or(1);
    k.swizzle = r.integer("swizzle");
    k.reduction_scheme = r.integer("reduction_scheme");
    k.stages = r.integer("stages");
    k.transpose_mode = r.parsed("transpose_mode", parse_transpose);
    r.finish();
    return k;
}

DeviceProfile read_device(const json& j, const std::string& pointer, const std::string& source) {
    ObjectReader r(j, pointer, source);
    DeviceProfile d;
    d.device_id = r.string("device_id");
    d.max_freq_ghz = r.number("max_freq_ghz");
    d.fp32_tflops = r.number("fp32_tflops");
    d.bf16_tflops = r.optional_number("bf16_tflops");
    d.dram_bw_gbs = r.number("dram_bw_gbs");
    d.mem_gb = r.number("mem_gb");
    d.l2_mb = r.number("l2_mb");
    d.sm_count = r.integer("sm_count");
    d.cuda_cores = r.integer("cuda_cores");
    d.power_w = r.number("power_w");
    d.collection_freq_mhz = r.number("collection_freq_mhz");
    r.finish();
    with_locator(source, pointer, [&] { validate(d); });
    return d;
}

MatMulShape read_matmul_shape(const json& j, const std::string& pointer, const std::string& source) {
    ObjectReader r(j, pointer, source);
    MatMulShape s;
    s.batch = r.optional_integer("batch").value_or(1);
    s.m = r.integer("m");
    s.n = r.integer("n");
    s.k = r.integer("k");
    r.finish();
    with_locator(source, pointer, [&] { validate(s); });
    return s;
}

MemBoundFeatures read_features(const json& j, const std::string& pointer, const std::string& source) {
    ObjectReader r(j, pointer, source);
    MemBoundFeatures f;
    f.flops = r.number("flops");
    f.int_ops = r.number("int_ops");
    f.bytes_loaded = r.number("bytes_loaded");
    f.bytes_stored = r.number("bytes_stored");
    f.total_bytes_accessed = r.number("total_bytes_accessed");
    r.finish();
    with_locator(source, pointer, [&] { validate(f); });
    return f;
}

ThroughputCurve read_curve(const json& j, const std::string& pointer, const std::string& source) {
    ObjectReader r(j, pointer, source);
    ThroughputCurve c;
    c.kernel = read_kernel(r.at("kernel"), r.child_pointer("kernel"), source);
    c.varying_dim_name = r.string("varying_dim_name");
    c.device_id = r.string("device_id");
    const auto& samples = r.array("samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ObjectReader sr(samples[i], r.child_pointer("samples") + "/" + std::to_string(i), source);
        c.samples.push_back({sr.integer("dim_value"), sr.number("throughput_gflops")});
        sr.finish();
    }
    c.ref_dim_value = r.integer("ref_dim_value");
    c.ref_duration_us = r.number("ref_duration_us");
    c.ref_waves = r.integer("ref_waves");
    c.blocks_per_sm = r.optional_integer("blocks_per_sm");
    r.finish();
    with_locator(source, pointer, [&] { validate(c); });
    return c;
}

ConfigRecord read_config_record(const json& j, const std::string& pointer, const std::string& source) {
    ObjectReader r(j, pointer, source);
    ConfigRecord rec;
    const auto family_text = r.string("family");
    try {
        rec.family = parse_family(family_text);
    } catch (const Error&) {
        r.fail(r.child_pointer("family"), "unknown family '" + family_text + "'");
    }
    rec.dtype = r.parsed("dtype", parse_dtype);
    rec.transpose_mode = r.parsed("transpose_mode", parse_transpose);
    rec.shape = read_matmul_shape(r.at("shape"), r.child_pointer("shape"), source);
    rec.chosen_key = read_kernel(r.at("chosen_key"), r.child_pointer("chosen_key"), source);
    r.finish();
    with_locator(source, pointer, [&] { validate(rec); });
    return rec;
}

MemBoundModel read_model(const json& j, const std::string& pointer, const std::string& source) {
    ObjectReader r(j, pointer, source);
    MemBoundModel m;
    m.kernel_name = r.string("kernel_name");
    m.dtype = r.parsed("dtype", parse_dtype);
    const auto& w = r.array("weights");
    if (w.size() != kMemBoundFeatureCount) {
        r.fail(r.child_pointer("weights"), "expected exactly 5 weights");
    }
    for (std::size_t i = 0; i < kMemBoundFeatureCount; ++i) {
        if (!w[i].is_number()) r.fail(r.child_pointer("weights") + "/" + std::to_string(i), "expected a number");
        m.weights[i] = w[i].get<double>();
    }
    m.intercept = r.number("intercept");
    m.train_device_id = r.string("train_device_id");
    ObjectReader sr(r.at("residual_stats"), r.child_pointer("residual_stats"), source);
    m.residual_stats.max_rel_err = sr.number("max_rel_err");
    m.residual_stats.mean_rel_err = sr.number("mean_rel_err");
    sr.finish();
    r.finish();
    return m;
}

auto config_order(const ConfigRecord& r) {
    return std::tie(r.family, r.dtype, r.transpose_mode, r.shape, r.chosen_key);
}

auto record_order(const MemBoundRecord& r) {
    return std::make_tuple(std::cref(r.kernel_name), r.dtype, r.features.flops, r.features.int_ops,
                           r.features.bytes_loaded, r.features.bytes_stored, r.features.total_bytes_accessed,
                           r.latency_us);
}

bool config_less(const ConfigRecord& a, const ConfigRecord& b) { return config_order(a) < config_order(b); }
bool record_less(const MemBoundRecord& a, const MemBoundRecord& b) { return record_order(a) < record_order(b); }
bool model_less(const MemBoundModel& a, const MemBoundModel& b) {
    return std::tie(a.kernel_name, a.dtype) < std::tie(b.kernel_name, b.dtype);
}

std::string config_query_label(const ConfigRecord& r) {
    return to_string(r.family) + "/" + std::string(to_string(r.dtype)) + "/" +
           std::string(to_string(r.transpose_mode)) + " at (" + std::to_string(r.shape.batch) + "," +
           std::to_string(r.shape.m) + "," + std::to_string(r.shape.n) + "," + std::to_string(r.shape.k) + ")";
}

}  // namespace

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

json to_json(const KernelKey& k) {
    json j;
    j["family"] = to_string(k.family);
    j["dtype"] = to_string(k.dtype);
    if (k.family.is_utility()) return j;
    j["library"] = to_string(k.library);
    j["algorithm_id"] = k.algorithm_id;
    j["tile_m"] = k.tile_m;
    j["tile_n"] = k.tile_n;
    j["split_k"] = k.split_k;
    j["swizzle"] = k.swizzle;
    j["reduction_scheme"] = k.reduction_scheme;
    j["stages"] = k.stages;
    j["transpose_mode"] = to_string(k.transpose_mode);
    return j;
}

json to_json(const DeviceProfile& d) {
    json j;
    j["device_id"] = d.device_id;
    j["max_freq_ghz"] = d.max_freq_ghz;
    j["fp32_tflops"] = d.fp32_tflops;
    if (d.bf16_tflops) j["bf16_tflops"] = *d.bf16_tflops;
    j["dram_bw_gbs"] = d.dram_bw_gbs;
    j["mem_gb"] = d.mem_gb;
    j["l2_mb"] = d.l2_mb;
    j["sm_count"] = d.sm_count;
    j["cuda_cores"] = d.cuda_cores;
    j["power_w"] = d.power_w;
    j["collection_freq_mhz"] = d.collection_freq_mhz;
    return j;
}

json to_json(const ThroughputCurve& c) {
    json j;
    j["kernel"] = to_json(c.kernel);
    j["varying_dim_name"] = c.varying_dim_name;
    j["device_id"] = c.device_id;
    json samples = json::array();
    for (const auto& s : c.samples) {
        samples.push_back({{"dim_value", s.dim_value}, {"throughput_gflops", s.throughput_gflops}});
    }
    j["samples"] = std::move(samples);
    j["ref_dim_value"] = c.ref_dim_value;
    j["ref_duration_us"] = c.ref_duration_us;
    j["ref_waves"] = c.ref_waves;
    if (c.blocks_per_sm) j["blocks_per_sm"] = *c.blocks_per_sm;
    return j;
}

json to_json(const MemBoundFeatures& f) {
    return {{"flops", f.flops},
            {"int_ops", f.int_ops},
            {"bytes_loaded", f.bytes_loaded},
            {"bytes_stored", f.bytes_stored},
            {"total_bytes_accessed", f.total_bytes_accessed}};
}

json to_json(const MemBoundModel& m) {
    return {{"kernel_name", m.kernel_name},
            {"dtype", to_string(m.dtype)},
            {"weights", m.weights},
            {"intercept", m.intercept},
            {"train_device_id", m.train_device_id},
            {"residual_stats",
             {{"max_rel_err", m.residual_stats.max_rel_err}, {"mean_rel_err", m.residual_stats.mean_rel_err}}}};
}

namespace {

json shape_to_json(const MatMulShape& s) {
    return {{"batch", s.batch}, {"m", s.m}, {"n", s.n}, {"k", s.k}};
}

}  // namespace

json to_json(const Dataset& ds) {
    json j;
    j["schema_version"] = ds.schema_version;
    j["device"] = to_json(ds.device);
    json curves = json::array();
    for (const auto& [key, curve] : ds.curves) curves.push_back(to_json(curve));
    j["curves"] = std::move(curves);
    json configs = json::array();
    for (const auto& r : ds.config_map) {
        configs.push_back({{"family", to_string(r.family)},
                           {"dtype", to_string(r.dtype)},
                           {"transpose_mode", to_string(r.transpose_mode)},
                           {"shape", shape_to_json(r.shape)},
                           {"chosen_key", to_json(r.chosen_key)}});
    }
    j["config_map"] = std::move(configs);
    json records = json::array();
    for (const auto& r : ds.membound_records) {
        records.push_back({{"kernel_name", r.kernel_name},
                           {"dtype", to_string(r.dtype)},
                           {"features", to_json(r.features)},
                           {"latency_us", r.latency_us}});
    }
    j["membound_records"] = std::move(records);
    if (!ds.membound_models.empty()) {
        json models = json::array();
        for (const auto& m : ds.membound_models) models.push_back(to_json(m));
        j["membound_models"] = std::move(models);
    }
    return j;
}

json to_json(const ModelGraph& g) {
    json j;
    j["model_name"] = g.model_name;
    j["batch_size"] = g.batch_size;
    json layers = json::array();
    for (const auto& l : g.layers) {
        json lj;
        lj["layer_id"] = l.layer_id;
        lj["family"] = to_string(l.family);
        lj["dtype"] = to_string(l.dtype);
        if (l.transpose_mode) lj["transpose_mode"] = to_string(*l.transpose_mode);
        struct Visitor {
            json& out;
            void operator()(const MatMulShape& s) const { out["shape"] = shape_to_json(s); }
            void operator()(const VectorShape& s) const { out["shape"] = {{"rows", s.rows}, {"length", s.length}}; }
            void operator()(const AttentionShape& s) const {
                out["shape"] = {{"batch", s.batch}, {"heads", s.heads}, {"q_len", s.q_len}, {"kv_len", s.kv_len}};
            }
            void operator()(const MemBoundFeatures& f) const { out["features"] = to_json(f); }
        };
        std::visit(Visitor{lj}, l.shape);
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    return j;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

KernelKey kernel_key_from_json(const json& j, const std::string& source) {
    auto k = read_kernel(j, "", source);
    with_locator(source, "/", [&] { validate(k); });
    return k;
}

MemBoundFeatures features_from_json(const json& j, const std::string& source) {
    return read_features(j, "", source);
}

void canonicalize(Dataset& ds) {
    std::sort(ds.config_map.begin(), ds.config_map.end(), config_less);
    std::sort(ds.membound_records.begin(), ds.membound_records.end(), record_less);
    std::sort(ds.membound_models.begin(), ds.membound_models.end(), model_less);
}

void validate(const Dataset& ds, const std::string& source) {
    if (ds.schema_version != kSchemaVersion) {
        throw ValidationError(source + ": unsupported schema_version '" + ds.schema_version + "'");
    }
    validate(ds.device);
    for (const auto& [key, curve] : ds.curves) {
        validate(curve);
        if (curve.device_id != ds.device.device_id) {
            throw ValidationError(source + ": curve " + to_string(key) + " belongs to device '" + curve.device_id +
                                  "', dataset device is '" + ds.device.device_id + "'");
        }
    }
    std::map<std::tuple<Family, DType, TransposeMode, MatMulShape>, const KernelKey*> choices;
    for (const auto& rec : ds.config_map) {
        validate(rec);
        auto [it, inserted] =
            choices.emplace(std::tuple{rec.family, rec.dtype, rec.transpose_mode, rec.shape}, &rec.chosen_key);
        if (!inserted && !(*it->second == rec.chosen_key)) {
            throw ValidationError(source + ": config_map has two different choices for " + config_query_label(rec));
        }
    }
    for (const auto& r : ds.membound_records) {
        validate(r.features);
        if (!(r.latency_us > 0)) {
            throw ValidationError(source + ": membound record for '" + r.kernel_name + "' has non-positive latency");
        }
    }
    for (std::size_t i = 1; i < ds.membound_models.size(); ++i) {
        if (!model_less(ds.membound_models[i - 1], ds.membound_models[i])) {
            throw ValidationError(source + ": duplicate membound model for '" + ds.membound_models[i].kernel_name + "'");
        }
    }
}

Dataset dataset_from_json(const json& j, const std::string& source) {
    ObjectReader r(j, "", source);
    Dataset ds;
    ds.schema_version = r.string("schema_version");
    if (ds.schema_version.substr(0, ds.schema_version.find('.')) != kSchemaVersion) {
        throw ValidationError(source + ": /schema_version: unsupported major version '" + ds.schema_version + "'");
    }
    ds.schema_version = std::string(kSchemaVersion);
    ds.device = read_device(r.at("device"), "/device", source);

    const auto& curves = r.array("curves");
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto pointer = "/curves/" + std::to_string(i);
        auto curve = read_curve(curves[i], pointer, source);
        if (curve.device_id != ds.device.device_id) {
            throw ValidationError(source + ": " + pointer + ": curve " + to_string(curve.kernel) +
                                  " has device_id '" + curve.device_id + "' but dataset device is '" +
                                  ds.device.device_id + "'");
        }
        auto key = curve.kernel;
        auto [it, inserted] = ds.curves.emplace(key, std::move(curve));
        if (!inserted) {
            throw ValidationError(source + ": " + pointer + ": duplicate curve for kernel " + to_string(key));
        }
    }

    if (r.has("config_map")) {
        const auto& configs = r.array("config_map");
        for (std::size_t i = 0; i < configs.size(); ++i) {
            ds.config_map.push_back(read_config_record(configs[i], "/config_map/" + std::to_string(i), source));
        }
    }
    if (r.has("membound_records")) {
        const auto& records = r.array("membound_records");
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto pointer = "/membound_records/" + std::to_string(i);
            ObjectReader rr(records[i], pointer, source);
            MemBoundRecord rec;
            rec.kernel_name = rr.string("kernel_name");
            rec.dtype = rr.parsed("dtype", parse_dtype);
            rec.features = read_features(rr.at("features"), pointer + "/features", source);
            rec.latency_us = rr.number("latency_us");
            rr.finish();
            if (!(rec.latency_us > 0)) {
                throw ValidationError(source + ": " + pointer + ": latency_us must be positive");
            }
            ds.membound_records.push_back(std::move(rec));
        }
    }
    if (r.has("membound_models")) {
        const auto& models = r.array("membound_models");
        for (std::size_t i = 0; i < models.size(); ++i) {
            ds.membound_models.push_back(read_model(models[i], "/membound_models/" + std::to_string(i), source));
        }
    }
    r.finish();

    canonicalize(ds);
    validate(ds, source);
    return ds;
}

ModelGraph model_graph_from_json(const json& j, const std::string& source) {
    ObjectReader r(j, "", source);
    ModelGraph g;
    g.model_name = r.string("model_name");
    g.batch_size = r.optional_integer("batch_size").value_or(1);
    const auto& layers = r.array("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto pointer = "/layers/" + std::to_string(i);
        ObjectReader lr(layers[i], pointer, source);
        LayerSpec layer;
        layer.layer_id = lr.string("layer_id");
        const auto family_text = lr.string("family");
        try {
            layer.family = parse_family(family_text);
        } catch (const UnknownFamily&) {
            throw UnresolvedLayer("layer '" + layer.layer_id + "' (" + source + ": " + pointer +
                                  "): unknown family '" + family_text + "'");
        } catch (const SchemaError& e) {
            lr.fail(lr.child_pointer("family"), e.what());
        }
        layer.dtype = lr.parsed("dtype", parse_dtype);
        if (lr.has("transpose_mode")) layer.transpose_mode = lr.parsed("transpose_mode", parse_transpose);

        if (layer.family.is_utility()) {
            layer.shape = read_features(lr.at("features"), lr.child_pointer("features"), source);
        } else {
            const auto shape_pointer = lr.child_pointer("shape");
            const auto& sj = lr.at("shape");
            switch (layer.family.kind) {
                case FamilyKind::TritonVec: {
                    ObjectReader sr(sj, shape_pointer, source);
                    VectorShape s{sr.integer("rows"), sr.integer("length")};
                    sr.finish();
                    with_locator(source, shape_pointer, [&] { validate(s); });
                    layer.shape = s;
                    break;
                }
                case FamilyKind::FlashAttention:
                case FamilyKind::CutlassAttention: {
                    ObjectReader sr(sj, shape_pointer, source);
                    AttentionShape s;
                    s.batch = sr.optional_integer("batch").value_or(1);
                    s.heads = sr.optional_integer("heads").value_or(1);
                    s.q_len = sr.integer("q_len");
                    s.kv_len = sr.integer("kv_len");
                    sr.finish();
                    with_locator(source, shape_pointer, [&] { validate(s); });
                    layer.shape = s;
                    break;
                }
                default:
                    layer.shape = read_matmul_shape(sj, shape_pointer, source);
            }
        }
        lr.finish();
        g.layers.push_back(std::move(layer));
    }
    r.finish();
    try {
        validate(g);
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    }
    return g;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto text = buf.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
    return dataset_from_json(read_json_file(path), path.string());
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    write_text_file(path, to_json(ds).dump(2) + "\n");
}

ModelGraph load_model_graph(const std::filesystem::path& path) {
    return model_graph_from_json(read_json_file(path), path.string());
}

void save_model_graph(const ModelGraph& g, const std::filesystem::path& path) {
    write_text_file(path, to_json(g).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Merge
// ---------------------------------------------------------------------------

Dataset merge_datasets(const Dataset& a, const Dataset& b) {
    if (a.device.device_id != b.device.device_id) {
        throw DeviceMismatch("cannot merge '" + a.device.device_id + "' with '" + b.device.device_id + "'");
    }
    if (a.schema_version != b.schema_version) {
        throw DeviceMismatch("schema_version '" + a.schema_version + "' vs '" + b.schema_version + "'");
    }
    if (!(a.device == b.device)) {
        throw ConflictError("device '" + a.device.device_id + "' has different profiles in the two datasets");
    }

    Dataset out;
    out.schema_version = a.schema_version;
    out.device = a.device;
    out.curves = a.curves;
    for (const auto& [key, curve] : b.curves) {
        auto [it, inserted] = out.curves.emplace(key, curve);
        if (!inserted && !(it->second == curve)) {
            throw ConflictError("kernel " + to_string(key) + " has different measurements in the two datasets");
        }
    }

    auto sorted_a = a;
    auto sorted_b = b;
    canonicalize(sorted_a);
    canonicalize(sorted_b);
    std::set_union(sorted_a.config_map.begin(), sorted_a.config_map.end(), sorted_b.config_map.begin(),
                   sorted_b.config_map.end(), std::back_inserter(out.config_map), config_less);
    for (std::size_t i = 1; i < out.config_map.size(); ++i) {
        const auto& p = out.config_map[i - 1];
        const auto& c = out.config_map[i];
        if (std::tie(p.family, p.dtype, p.transpose_mode, p.shape) ==
            std::tie(c.family, c.dtype, c.transpose_mode, c.shape)) {
            throw ConflictError("config choice differs for " + config_query_label(c));
        }
    }
    // Multiset union: a record present k times in one input and j in the
    // other appears max(k, j) times, which keeps merge idempotent.
    std::set_union(sorted_a.membound_records.begin(), sorted_a.membound_records.end(),
                   sorted_b.membound_records.begin(), sorted_b.membound_records.end(),
                   std::back_inserter(out.membound_records), record_less);
    std::set_union(sorted_a.membound_models.begin(), sorted_a.membound_models.end(),
                   sorted_b.membound_models.begin(), sorted_b.membound_models.end(),
                   std::back_inserter(out.membound_models), model_less);
    for (const auto& m : out.membound_models) {
        for (const auto* src : {&sorted_a.membound_models, &sorted_b.membound_models}) {
            auto it = std::lower_bound(src->begin(), src->end(), m, model_less);
            if (it != src->end() && !model_less(m, *it) && !(*it == m)) {
                throw ConflictError("membound model '" + m.kernel_name + "' differs between the datasets");
            }
        }
    }
    return out;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fingerprint(const Dataset& ds) { return fnv1a_hex(to_json(ds).dump()); }

}  // namespace pm2lat
