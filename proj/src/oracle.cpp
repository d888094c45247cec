#include "pm2lat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstring>
#include <random>

#include "pm2lat/error.hpp"

namespace pm2lat::oracle {

using nlohmann::json;

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

double dtype_bytes(DType d) { return d == DType::FP32 ? 4.0 : 2.0; }

// FNV-1a over a byte sequence, used to key the noise stream.
class StreamKey {
public:
    explicit StreamKey(std::uint64_t seed) { mix(seed); }

    void mix(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h_ ^= (v >> (8 * i)) & 0xffU;
            h_ *= 0x100000001b3ULL;
        }
    }
    void mix(std::string_view s) {
        for (unsigned char c : s) {
            h_ ^= c;
            h_ *= 0x100000001b3ULL;
        }
        mix(static_cast<std::uint64_t>(s.size()));
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

double noise_factor(double sigma, const StreamKey& key) {
    if (sigma == 0) return 1.0;
    std::mt19937_64 rng(key.value());
    std::normal_distribution<double> normal(0.0, sigma);
    return std::exp(normal(rng));
}

const PlantedCurve& planted(const SyntheticDevice& dev, const KernelKey& key) {
    auto it = dev.curves.find(key);
    if (it == dev.curves.end()) throw UnknownKernel("kernel " + to_string(key) + " is not planted on " + dev.profile.device_id);
    return it->second;
}

struct ScheduledWork {
    std::int64_t varying = 0;
    std::int64_t waves = 0;
};

ScheduledWork schedule(const KernelKey& key, const KernelInstance& instance, const WaveModel& wm) {
    switch (key.family.kind) {
        case FamilyKind::MatMul:
        case FamilyKind::BatchedMatMul:
        case FamilyKind::Linear:
        case FamilyKind::TritonMM: {
            const auto& s = std::get<MatMulShape>(instance);
            return {s.k, wave_count(s, key, wm)};
        }
        case FamilyKind::TritonVec: {
            const auto& s = std::get<VectorShape>(instance);
            return {s.length, waves_for_blocks(ceil_div(s.rows, key.tile_m), wm)};
        }
        case FamilyKind::FlashAttention:
        case FamilyKind::CutlassAttention: {
            const auto& s = std::get<AttentionShape>(instance);
            return {s.kv_len, waves_for_blocks(s.batch * s.heads * ceil_div(s.q_len, key.tile_m), wm)};
        }
        case FamilyKind::Utility:
            break;
    }
    throw UnknownFamily(to_string(key.family) + " has no compute schedule");
}

void mix_instance(StreamKey& sk, const KernelInstance& instance) {
    struct Visitor {
        StreamKey& sk;
        void operator()(const MatMulShape& s) const {
            for (auto v : {s.batch, s.m, s.n, s.k}) sk.mix(static_cast<std::uint64_t>(v));
        }
        void operator()(const VectorShape& s) const {
            for (auto v : {s.rows, s.length}) sk.mix(static_cast<std::uint64_t>(v));
        }
        void operator()(const AttentionShape& s) const {
            for (auto v : {s.batch, s.heads, s.q_len, s.kv_len}) sk.mix(static_cast<std::uint64_t>(v));
        }
    };
    std::visit(Visitor{sk}, instance);
}

double noiseless_duration(const SyntheticDevice& dev, const KernelKey& key, const KernelInstance& instance,
                          const WaveModel& wm) {
    const auto& curve = planted(dev, key);
    const auto work = schedule(key, instance, wm);
    const double x = static_cast<double>(work.varying);
    return wave_work_gflop(key, work.varying, wm) / curve(x) * static_cast<double>(work.waves) * 1e6;
}

}  // namespace

void validate(const SyntheticDevice& dev, std::int64_t max_dim) {
    pm2lat::validate(dev.profile);
    if (!(dev.noise_rel_sigma >= 0)) throw ValidationError("noise_rel_sigma must be non-negative");
    const double hi = 2.0 * static_cast<double>(max_dim);
    for (const auto& [key, c] : dev.curves) {
        pm2lat::validate(key);
        if (!(c.c * 1.0 + c.d > 0) || !(c.c * hi + c.d > 0)) {
            throw ValidationError("planted curve for " + to_string(key) + " has a pole in [1, " +
                                  std::to_string(2 * max_dim) + "]");
        }
        if (!(c(1.0) > 0) || !(c(hi) > 0)) {
            throw ValidationError("planted curve for " + to_string(key) + " is not positive on its range");
        }
    }
}

double wave_work_gflop(const KernelKey& key, std::int64_t varying, const WaveModel& wm) {
    return 2.0 * static_cast<double>(varying) * static_cast<double>(key.tile_m) *
           static_cast<double>(std::max<std::int64_t>(key.tile_n, 1)) *
           static_cast<double>(wm.blocks_per_wave()) * 1e-9;
}

double true_duration(const SyntheticDevice& dev, const KernelKey& key, const KernelInstance& instance,
                     const WaveModel& wm, std::int64_t repetition) {
    const double base = noiseless_duration(dev, key, instance, wm);
    if (dev.noise_rel_sigma == 0) return base;
    StreamKey sk(dev.noise_seed);
    sk.mix(to_string(key));
    mix_instance(sk, instance);
    sk.mix(static_cast<std::uint64_t>(repetition));
    return base * noise_factor(dev.noise_rel_sigma, sk);
}

double true_duration(const SyntheticDevice& dev, const KernelKey& key, const MatMulShape& shape,
                     const WaveModel& wm, std::int64_t repetition) {
    return true_duration(dev, key, KernelInstance{shape}, wm, repetition);
}

double true_membound_latency(const SyntheticDevice& dev, const std::string& kernel_name, DType dtype,
                             const MemBoundFeatures& features, std::int64_t repetition) {
    auto it = dev.membound.find({kernel_name, dtype});
    if (it == dev.membound.end()) {
        throw UnknownKernel("utility kernel '" + kernel_name + "' is not planted on " + dev.profile.device_id);
    }
    const auto x = as_vector(features);
    double latency = it->second.intercept;
    for (std::size_t j = 0; j < kMemBoundFeatureCount; ++j) {
        latency += it->second.weights[j] * x(static_cast<Eigen::Index>(j));
    }
    if (dev.noise_rel_sigma == 0) return latency;
    StreamKey sk(dev.noise_seed);
    sk.mix(kernel_name);
    sk.mix(static_cast<std::uint64_t>(dtype));
    for (std::size_t j = 0; j < kMemBoundFeatureCount; ++j) {
        double v = x(static_cast<Eigen::Index>(j));
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        sk.mix(bits);
    }
    sk.mix(static_cast<std::uint64_t>(repetition));
    return latency * noise_factor(dev.noise_rel_sigma, sk);
}

MemBoundFeatures utility_features(const UtilityTraits& t, DType dtype, std::int64_t rows, std::int64_t cols) {
    const double n = static_cast<double>(rows) * static_cast<double>(cols);
    const double eb = dtype_bytes(dtype);
    MemBoundFeatures f;
    f.flops = t.flops_per_element * n;
    f.int_ops = t.int_ops_per_element * n + t.int_ops_per_row * static_cast<double>(rows);
    f.bytes_loaded = t.loads_per_element * eb * n;
    f.bytes_stored = t.stores_per_element * eb * n;
    f.total_bytes_accessed = f.bytes_loaded + f.bytes_stored;
    return f;
}

std::vector<std::int64_t> powers_of_two(std::int64_t lo, std::int64_t hi) {
    std::vector<std::int64_t> out;
    for (std::int64_t v = lo; v <= hi; v *= 2) out.push_back(v);
    return out;
}

SamplingPlan SamplingPlan::defaults() {
    SamplingPlan p;
    p.dims = powers_of_two(32, 8192);
    p.config_m = powers_of_two(64, 8192);
    p.config_n = powers_of_two(64, 8192);
    p.config_k = powers_of_two(64, 8192);
    for (std::int64_t rows : {1, 8, 64, 512, 4096}) {
        for (std::int64_t cols : {256, 1024, 4096, 16384}) p.utility_sizes.emplace_back(rows, cols);
    }
    return p;
}

KernelInstance collection_instance(const KernelKey& key, const WaveModel& wm, std::int64_t ref_waves,
                                   std::int64_t varying) {
    const auto blocks = wm.blocks_per_wave() * ref_waves;
    switch (key.family.kind) {
        case FamilyKind::TritonVec:
            return VectorShape{key.tile_m * blocks, varying};
        case FamilyKind::FlashAttention:
        case FamilyKind::CutlassAttention:
            return AttentionShape{1, blocks, key.tile_m, varying};
        case FamilyKind::Utility:
            throw UnknownFamily("utility kernels have no collection shape");
        default:
            return MatMulShape{1, key.tile_m * blocks, key.tile_n, varying};
    }
}

Dataset emit_fixture(const SyntheticDevice& dev, const SamplingPlan& plan) {
    if (plan.dims.size() < 2) throw ValidationError("sampling plan needs at least 2 dims");
    validate(dev, plan.dims.back());
    const WaveModel wm{dev.profile.sm_count, 1};
    const std::int64_t reps = dev.noise_rel_sigma == 0 ? 1 : std::max<std::int64_t>(plan.repetitions, 1);

    Dataset ds;
    ds.device = dev.profile;
    for (const auto& [key, curve] : dev.curves) {
        ThroughputCurve tc;
        tc.kernel = key;
        tc.varying_dim_name = std::string(varying_dim_of(key.family));
        tc.device_id = dev.profile.device_id;
        for (auto dim : plan.dims) {
            const auto instance = collection_instance(key, wm, plan.ref_waves, dim);
            double total = 0;
            for (std::int64_t r = 0; r < reps; ++r) total += true_duration(dev, key, instance, wm, r);
            const double mean_us = total / static_cast<double>(reps);
            const auto waves = schedule(key, instance, wm).waves;
            tc.samples.push_back(
                {dim, wave_work_gflop(key, dim, wm) * static_cast<double>(waves) / (mean_us * 1e-6)});
            if (dim == plan.dims.back()) {
                tc.ref_dim_value = dim;
                tc.ref_duration_us = mean_us;
                tc.ref_waves = waves;
            }
        }
        ds.curves.emplace(key, std::move(tc));
    }

    // The recorded heuristic picks the fastest planted kernel per query shape.
    std::map<std::tuple<Family, DType, TransposeMode>, std::vector<KernelKey>> by_triple;
    for (const auto& [key, curve] : dev.curves) {
        by_triple[{key.family, key.dtype, key.transpose_mode}].push_back(key);
    }
    for (const auto& [triple, keys] : by_triple) {
        const auto& family = std::get<0>(triple);
        const bool gemm = family.uses_gemm_tiles();
        const bool vec = family.kind == FamilyKind::TritonVec;
        const std::vector<std::int64_t> unit{1};
        const auto& batches = vec ? unit : plan.config_batch;
        const auto& ns = gemm ? plan.config_n : unit;
        for (auto b : batches) {
            for (auto m : plan.config_m) {
                for (auto n : ns) {
                    for (auto k : plan.config_k) {
                        KernelInstance instance = MatMulShape{b, m, n, k};
                        if (vec) instance = VectorShape{m, k};
                        else if (!gemm) instance = AttentionShape{1, b, m, k};
                        const KernelKey* best = nullptr;
                        double best_us = std::numeric_limits<double>::infinity();
                        for (const auto& key : keys) {
                            const double us = noiseless_duration(dev, key, instance, wm);
                            if (us < best_us) {
                                best_us = us;
                                best = &key;
                            }
                        }
                        ds.config_map.push_back({family, std::get<1>(triple), std::get<2>(triple),
                                                 resolution_shape(instance), *best});
                    }
                }
            }
        }
    }

    for (const auto& [id, model] : dev.membound) {
        const auto& [name, dtype] = id;
        auto traits_it = dev.utility_traits.find(id);
        const UtilityTraits traits = traits_it == dev.utility_traits.end() ? UtilityTraits{} : traits_it->second;
        for (const auto& [rows, cols] : plan.utility_sizes) {
            MemBoundRecord rec;
            rec.kernel_name = name;
            rec.dtype = dtype;
            rec.features = utility_features(traits, dtype, rows, cols);
            double total = 0;
            for (std::int64_t r = 0; r < reps; ++r) total += true_membound_latency(dev, name, dtype, rec.features, r);
            rec.latency_us = total / static_cast<double>(reps);
            ds.membound_records.push_back(std::move(rec));
        }
    }
    canonicalize(ds);
    pm2lat::validate(ds, "fixture " + dev.profile.device_id);
    return ds;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

DeviceProfile table_device(const std::string& name) {
    struct Row {
        const char* id;
        double freq, fp32;
        std::optional<double> bf16;
        double bw, mem, l2;
        std::int64_t sm, cores;
        double power;
    };
    static const Row rows[] = {
        {"rtx3060m", 2.090, 16.05, 32.10, 336, 6, 3, 30, 3840, 130},
        {"t4", 1.590, 8.141, std::nullopt, 320, 16, 4, 40, 2560, 70},
        {"l4", 2.040, 30.29, 121.16, 300, 24, 48, 58, 7242, 70},
        {"a100", 1.410, 19.49, 311.87, 1560, 40, 40, 108, 6912, 400},
        {"rtx5070", 3.090, 37.97, 75.94, 672, 12, 48, 48, 6144, 250},
    };
    for (const auto& r : rows) {
        if (name == r.id) {
            DeviceProfile d;
            d.device_id = r.id;
            d.max_freq_ghz = r.freq;
            d.fp32_tflops = r.fp32;
            d.bf16_tflops = r.bf16;
            d.dram_bw_gbs = r.bw;
            d.mem_gb = r.mem;
            d.l2_mb = r.l2;
            d.sm_count = r.sm;
            d.cuda_cores = r.cores;
            d.power_w = r.power;
            d.collection_freq_mhz = r.freq * 1000.0;
            return d;
        }
    }
    throw ValidationError("unknown device '" + name + "'");
}

namespace {

KernelKey gemm_key(FamilyKind kind, DType dtype, Library lib, std::int64_t alg, std::int64_t tm, std::int64_t tn,
                   std::int64_t split_k, std::int64_t stages, TransposeMode t) {
    KernelKey k;
    k.family = Family{kind, {}};
    k.dtype = dtype;
    k.library = lib;
    k.algorithm_id = alg;
    k.tile_m = tm;
    k.tile_n = tn;
    k.split_k = split_k;
    k.swizzle = split_k > 1 ? 1 : 0;
    k.reduction_scheme = split_k > 1 ? 1 : 0;
    k.stages = stages;
    k.transpose_mode = t;
    return k;
}

// Saturating rational curve: peak efficiency grows with tile area, the
// half-saturation point varies with the kernel index.
PlantedCurve planted_for(const KernelKey& key, double peak_gflops, int index) {
    const double area = static_cast<double>(key.tile_m * std::max<std::int64_t>(key.tile_n, 1));
    const double eff = std::clamp(0.35 + 0.06 * std::log2(area / 1024.0) + 0.015 * (index % 5), 0.2, 0.92);
    PlantedCurve c;
    c.a = peak_gflops * eff;
    c.c = 1.0;
    c.d = 48.0 * (1 + index % 7);
    c.b = c.a * c.d * 0.02 * (index % 4);
    return c;
}

void plant_utilities(SyntheticDevice& dev, DType dtype) {
    const double peak = (dtype == DType::FP32 ? dev.profile.fp32_tflops : dev.profile.bf16_tflops.value_or(1.0)) * 1e3;
    const double us_per_byte = 1.0 / (dev.profile.dram_bw_gbs * 1e3);  // GB/s == 1e3 bytes/us
    const double us_per_flop = 1.0 / (peak * 1e3);
    const std::vector<std::pair<std::string, UtilityTraits>> kernels = {
        {"gelu", {8, 1, 0, 1, 1}},    {"relu", {1, 1, 0, 1, 1}},    {"softmax", {5, 2, 32, 1, 1}},
        {"add", {1, 1, 0, 2, 1}},     {"mul", {1, 1, 0, 2, 1}},     {"dropout", {2, 3, 0, 1, 2}},
        {"layernorm", {8, 2, 48, 1, 1}},
    };
    int i = 0;
    for (const auto& [name, traits] : kernels) {
        PlantedLinear lin;
        lin.weights = {us_per_flop * (1.5 + 0.1 * i), us_per_flop * 0.5, us_per_byte * (0.3 + 0.02 * i),
                       us_per_byte * 0.4, us_per_byte * (0.6 + 0.05 * i)};
        lin.intercept = 3.0 + 0.25 * i;
        dev.membound[{name, dtype}] = lin;
        dev.utility_traits[{name, dtype}] = traits;
        ++i;
    }
}

OracleConfig fp32_preset() {
    OracleConfig cfg;
    cfg.device.profile = table_device("rtx3060m");
    cfg.device.profile.device_id = "synthetic-rtx3060m";
    cfg.device.noise_seed = 42;
    const double peak = cfg.device.profile.fp32_tflops * 1e3;
    const auto nn = TransposeMode::NN;
    const auto tn = TransposeMode::TN;
    const std::vector<KernelKey> keys = {
        gemm_key(FamilyKind::MatMul, DType::FP32, Library::cuBLAS, 0, 64, 64, 1, 3, nn),
        gemm_key(FamilyKind::MatMul, DType::FP32, Library::cuBLAS, 1, 128, 64, 1, 3, nn),
        gemm_key(FamilyKind::MatMul, DType::FP32, Library::cuBLAS, 1, 64, 128, 1, 3, nn),
        gemm_key(FamilyKind::MatMul, DType::FP32, Library::cuBLAS, 2, 128, 128, 1, 4, nn),
        gemm_key(FamilyKind::MatMul, DType::FP32, Library::cuBLAS, 2, 128, 128, 2, 4, nn),
        gemm_key(FamilyKind::Linear, DType::FP32, Library::cuBLAS, 0, 64, 64, 1, 3, tn),
        gemm_key(FamilyKind::Linear, DType::FP32, Library::cuBLAS, 1, 128, 64, 1, 3, tn),
        gemm_key(FamilyKind::Linear, DType::FP32, Library::cuBLAS, 2, 128, 128, 1, 4, tn),
        gemm_key(FamilyKind::Linear, DType::FP32, Library::cuBLAS, 3, 256, 128, 1, 4, tn),
        gemm_key(FamilyKind::BatchedMatMul, DType::FP32, Library::cuBLAS, 0, 32, 32, 1, 2, nn),
        gemm_key(FamilyKind::BatchedMatMul, DType::FP32, Library::cuBLAS, 0, 64, 64, 1, 3, nn),
        gemm_key(FamilyKind::BatchedMatMul, DType::FP32, Library::cuBLAS, 1, 128, 64, 1, 3, nn),
        gemm_key(FamilyKind::BatchedMatMul, DType::FP32, Library::cuBLAS, 2, 128, 128, 1, 4, nn),
    };
    int i = 0;
    for (const auto& k : keys) cfg.device.curves[k] = planted_for(k, peak, i++);
    plant_utilities(cfg.device, DType::FP32);
    cfg.plan = SamplingPlan::defaults();
    cfg.plan.config_batch = {1, 8, 64};
    return cfg;
}

OracleConfig bf16_preset() {
    OracleConfig cfg;
    cfg.device.profile = table_device("a100");
    cfg.device.profile.device_id = "synthetic-a100";
    cfg.device.noise_seed = 7;
    const double peak = cfg.device.profile.bf16_tflops.value() * 1e3;
    const std::vector<std::pair<std::int64_t, std::int64_t>> tiles = {
        {64, 64}, {64, 128}, {128, 64}, {128, 128}, {128, 256}, {256, 128}, {64, 256}, {256, 64}};
    const std::vector<std::tuple<FamilyKind, TransposeMode, std::size_t>> families = {
        {FamilyKind::MatMul, TransposeMode::NN, 40},
        {FamilyKind::Linear, TransposeMode::TN, 36},
        {FamilyKind::BatchedMatMul, TransposeMode::NN, 24},
    };
    int index = 0;
    for (const auto& [kind, transpose, count] : families) {
        std::size_t made = 0;
        for (std::int64_t stages : {3, 4, 5}) {
            for (std::int64_t split_k : {1, 2}) {
                for (const auto& [tm, tn] : tiles) {
                    if (made == count) break;
                    const auto lib = (made % 3 == 2) ? Library::CUTLASS : Library::cuBLAS;
                    auto key = gemm_key(kind, DType::BF16, lib, static_cast<std::int64_t>(made % 8), tm, tn, split_k,
                                        stages, transpose);
                    cfg.device.curves[key] = planted_for(key, peak, index++);
                    ++made;
                }
            }
        }
    }
    plant_utilities(cfg.device, DType::BF16);
    cfg.plan = SamplingPlan::defaults();
    cfg.plan.config_m = powers_of_two(64, 4096);
    cfg.plan.config_n = powers_of_two(64, 4096);
    cfg.plan.config_k = powers_of_two(64, 4096);
    return cfg;
}

OracleConfig generic_preset() {
    OracleConfig cfg;
    cfg.device.profile = table_device("l4");
    cfg.device.profile.device_id = "synthetic-l4";
    cfg.device.noise_seed = 11;
    const double peak = cfg.device.profile.bf16_tflops.value() * 1e3;
    const double peak32 = cfg.device.profile.fp32_tflops * 1e3;
    std::vector<std::pair<KernelKey, double>> keys;
    keys.emplace_back(gemm_key(FamilyKind::TritonMM, DType::BF16, Library::Triton, 0, 64, 64, 1, 3, TransposeMode::NN), peak);
    keys.emplace_back(gemm_key(FamilyKind::TritonMM, DType::BF16, Library::Triton, 1, 128, 128, 1, 4, TransposeMode::NN), peak);
    // TritonVec: tile_m rows per block, tile_n lanes.
    keys.emplace_back(gemm_key(FamilyKind::TritonVec, DType::FP32, Library::Triton, 0, 1, 128, 1, 1, TransposeMode::NN), peak32);
    keys.emplace_back(gemm_key(FamilyKind::TritonVec, DType::FP32, Library::Triton, 1, 4, 128, 1, 1, TransposeMode::NN), peak32);
    // Attention: tile_m query rows per block, tile_n head dim.
    keys.emplace_back(gemm_key(FamilyKind::FlashAttention, DType::BF16, Library::Custom, 0, 64, 64, 1, 2, TransposeMode::NN), peak);
    keys.emplace_back(gemm_key(FamilyKind::FlashAttention, DType::BF16, Library::Custom, 1, 128, 64, 1, 2, TransposeMode::NN), peak);
    keys.emplace_back(gemm_key(FamilyKind::CutlassAttention, DType::BF16, Library::CUTLASS, 0, 64, 64, 1, 3, TransposeMode::NN), peak);
    int i = 0;
    for (const auto& [k, p] : keys) cfg.device.curves[k] = planted_for(k, p, i++);
    plant_utilities(cfg.device, DType::BF16);
    cfg.plan = SamplingPlan::defaults();
    cfg.plan.config_batch = {1, 16};
    return cfg;
}

}  // namespace

OracleConfig preset(const std::string& name) {
    if (name == "fp32") return fp32_preset();
    if (name == "bf16") return bf16_preset();
    if (name == "generic") return generic_preset();
    throw UsageError("unknown oracle preset '" + name + "' (expected fp32, bf16 or generic)");
}

std::vector<std::string> preset_names() { return {"fp32", "bf16", "generic"}; }

// ---------------------------------------------------------------------------
// Config JSON
// ---------------------------------------------------------------------------

json to_json(const OracleConfig& cfg) {
    json j;
    j["device"] = pm2lat::to_json(cfg.device.profile);
    j["noise_seed"] = cfg.device.noise_seed;
    j["noise_rel_sigma"] = cfg.device.noise_rel_sigma;
    json kernels = json::array();
    for (const auto& [key, c] : cfg.device.curves) {
        kernels.push_back({{"kernel", pm2lat::to_json(key)}, {"a", c.a}, {"b", c.b}, {"c", c.c}, {"d", c.d}});
    }
    j["kernels"] = std::move(kernels);
    json utilities = json::array();
    for (const auto& [id, lin] : cfg.device.membound) {
        json u{{"kernel_name", id.first}, {"dtype", to_string(id.second)}, {"weights", lin.weights},
               {"intercept", lin.intercept}};
        if (auto it = cfg.device.utility_traits.find(id); it != cfg.device.utility_traits.end()) {
            const auto& t = it->second;
            u["traits"] = {{"flops_per_element", t.flops_per_element},
                           {"int_ops_per_element", t.int_ops_per_element},
                           {"int_ops_per_row", t.int_ops_per_row},
                           {"loads_per_element", t.loads_per_element},
                           {"stores_per_element", t.stores_per_element}};
        }
        utilities.push_back(std::move(u));
    }
    j["utilities"] = std::move(utilities);
    json sizes = json::array();
    for (const auto& [r, c] : cfg.plan.utility_sizes) sizes.push_back({r, c});
    j["plan"] = {{"dims", cfg.plan.dims},
                 {"ref_waves", cfg.plan.ref_waves},
                 {"repetitions", cfg.plan.repetitions},
                 {"config_batch", cfg.plan.config_batch},
                 {"config_m", cfg.plan.config_m},
                 {"config_n", cfg.plan.config_n},
                 {"config_k", cfg.plan.config_k},
                 {"utility_sizes", std::move(sizes)}};
    return j;
}

OracleConfig oracle_config_from_json(const json& j, const std::string& source) {
    OracleConfig cfg;
    try {
        // Round-trip the device through the dataset reader for consistent validation.
        json shell{{"schema_version", std::string(kSchemaVersion)}, {"device", j.at("device")}, {"curves", json::array()}};
        cfg.device.profile = dataset_from_json(shell, source).device;
        cfg.device.noise_seed = j.value("noise_seed", std::uint64_t{0});
        cfg.device.noise_rel_sigma = j.value("noise_rel_sigma", 0.0);
        for (const auto& k : j.at("kernels")) {
            const auto key = kernel_key_from_json(k.at("kernel"), source);
            cfg.device.curves[key] = {k.at("a").get<double>(), k.at("b").get<double>(), k.at("c").get<double>(),
                                      k.at("d").get<double>()};
        }
        for (const auto& u : j.value("utilities", json::array())) {
            std::pair<std::string, DType> id{u.at("kernel_name").get<std::string>(),
                                             parse_dtype(u.at("dtype").get<std::string>())};
            PlantedLinear lin;
            lin.weights = u.at("weights").get<std::array<double, kMemBoundFeatureCount>>();
            lin.intercept = u.at("intercept").get<double>();
            cfg.device.membound[id] = lin;
            if (u.contains("traits")) {
                const auto& t = u.at("traits");
                cfg.device.utility_traits[id] = {t.at("flops_per_element").get<double>(),
                                                 t.at("int_ops_per_element").get<double>(),
                                                 t.at("int_ops_per_row").get<double>(),
                                                 t.at("loads_per_element").get<double>(),
                                                 t.at("stores_per_element").get<double>()};
            }
        }
        const auto defaults = SamplingPlan::defaults();
        const auto& p = j.at("plan");
        cfg.plan.dims = p.value("dims", defaults.dims);
        cfg.plan.ref_waves = p.value("ref_waves", defaults.ref_waves);
        cfg.plan.repetitions = p.value("repetitions", defaults.repetitions);
        cfg.plan.config_batch = p.value("config_batch", defaults.config_batch);
        cfg.plan.config_m = p.value("config_m", defaults.config_m);
        cfg.plan.config_n = p.value("config_n", defaults.config_n);
        cfg.plan.config_k = p.value("config_k", defaults.config_k);
        if (p.contains("utility_sizes")) {
            for (const auto& s : p.at("utility_sizes")) {
                cfg.plan.utility_sizes.emplace_back(s.at(0).get<std::int64_t>(), s.at(1).get<std::int64_t>());
            }
        } else {
            cfg.plan.utility_sizes = defaults.utility_sizes;
        }
    } catch (const json::exception& e) {
        throw SchemaError(source + ": " + e.what());
    }
    validate(cfg.device, cfg.plan.dims.empty() ? 8192 : cfg.plan.dims.back());
    return cfg;
}

}  // namespace pm2lat::oracle
