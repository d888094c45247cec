#include "pm2lat/core.hpp"

#include <array>
#include <cmath>

#include "pm2lat/error.hpp"

namespace pm2lat {

namespace {

constexpr std::array<std::pair<FamilyKind, std::string_view>, 7> kFamilyNames{{
    {FamilyKind::MatMul, "matmul"},
    {FamilyKind::BatchedMatMul, "batched_matmul"},
    {FamilyKind::Linear, "linear"},
    {FamilyKind::TritonMM, "triton_mm"},
    {FamilyKind::TritonVec, "triton_vec"},
    {FamilyKind::FlashAttention, "flash_attention"},
    {FamilyKind::CutlassAttention, "cutlass_attention"},
}};

constexpr std::string_view kUtilityPrefix = "utility:";

bool positive_finite(double v) { return std::isfinite(v) && v > 0; }

void require_positive(double v, std::string_view field, const std::string& where) {
    if (!positive_finite(v)) {
        throw ValidationError(where + ": " + std::string(field) + " must be positive and finite");
    }
}

}  // namespace

std::string_view to_string(DType d) { return d == DType::FP32 ? "fp32" : "bf16"; }

DType parse_dtype(std::string_view s) {
    if (s == "fp32" || s == "FP32") return DType::FP32;
    if (s == "bf16" || s == "BF16") return DType::BF16;
    throw SchemaError("unknown dtype '" + std::string(s) + "'");
}

std::string_view to_string(Library l) {
    switch (l) {
        case Library::cuBLAS: return "cublas";
        case Library::CUTLASS: return "cutlass";
        case Library::Triton: return "triton";
        case Library::Custom: return "custom";
    }
    return "custom";
}

Library parse_library(std::string_view s) {
    if (s == "cublas" || s == "cuBLAS") return Library::cuBLAS;
    if (s == "cutlass" || s == "CUTLASS") return Library::CUTLASS;
    if (s == "triton" || s == "Triton") return Library::Triton;
    if (s == "custom" || s == "Custom") return Library::Custom;
    throw SchemaError("unknown library '" + std::string(s) + "'");
}

std::string_view to_string(TransposeMode t) {
    switch (t) {
        case TransposeMode::NN: return "NN";
        case TransposeMode::TN: return "TN";
        case TransposeMode::NT: return "NT";
        case TransposeMode::TT: return "TT";
    }
    return "NN";
}

TransposeMode parse_transpose(std::string_view s) {
    if (s == "NN" || s == "nn") return TransposeMode::NN;
    if (s == "TN" || s == "tn") return TransposeMode::TN;
    if (s == "NT" || s == "nt") return TransposeMode::NT;
    if (s == "TT" || s == "tt") return TransposeMode::TT;
    throw SchemaError("unknown transpose_mode '" + std::string(s) + "'");
}

bool Family::uses_gemm_tiles() const {
    switch (kind) {
        case FamilyKind::MatMul:
        case FamilyKind::BatchedMatMul:
        case FamilyKind::Linear:
        case FamilyKind::TritonMM:
            return true;
        default:
            return false;
    }
}

std::string to_string(const Family& f) {
    if (f.is_utility()) return std::string(kUtilityPrefix) + f.utility_name;
    for (const auto& [kind, name] : kFamilyNames) {
        if (kind == f.kind) return std::string(name);
    }
    return "unknown";
}

Family parse_family(std::string_view s) {
    if (s.starts_with(kUtilityPrefix)) {
        auto name = s.substr(kUtilityPrefix.size());
        if (name.empty()) throw SchemaError("utility family needs a kernel name");
        return Family::utility(std::string(name));
    }
    for (const auto& [kind, name] : kFamilyNames) {
        if (name == s) return Family{kind, {}};
    }
    throw UnknownFamily("'" + std::string(s) + "'");
}

TransposeMode default_transpose(const Family& f) {
    return f.kind == FamilyKind::Linear ? TransposeMode::TN : TransposeMode::NN;
}

void validate(const DeviceProfile& d) {
    const std::string where = "device '" + d.device_id + "'";
    if (d.device_id.empty()) throw ValidationError("device: device_id is empty");
    require_positive(d.max_freq_ghz, "max_freq_ghz", where);
    require_positive(d.fp32_tflops, "fp32_tflops", where);
    if (d.bf16_tflops) require_positive(*d.bf16_tflops, "bf16_tflops", where);
    require_positive(d.dram_bw_gbs, "dram_bw_gbs", where);
    require_positive(d.mem_gb, "mem_gb", where);
    require_positive(d.l2_mb, "l2_mb", where);
    if (d.sm_count < 1) throw ValidationError(where + ": sm_count must be >= 1");
    if (d.cuda_cores < 1) throw ValidationError(where + ": cuda_cores must be >= 1");
    require_positive(d.power_w, "power_w", where);
    require_positive(d.collection_freq_mhz, "collection_freq_mhz", where);
}

KernelKey KernelKey::utility(std::string name, DType dtype) {
    KernelKey k;
    k.family = Family::utility(std::move(name));
    k.dtype = dtype;
    k.library = Library::Custom;
    k.split_k = 0;
    return k;
}

std::string to_string(const KernelKey& k) {
    std::string s = to_string(k.family);
    s += '/';
    s += to_string(k.dtype);
    if (k.family.is_utility()) return s;
    s += '/';
    s += to_string(k.library);
    s += "/alg" + std::to_string(k.algorithm_id);
    s += "/" + std::to_string(k.tile_m) + "x" + std::to_string(k.tile_n);
    s += "/sk" + std::to_string(k.split_k);
    s += "/sw" + std::to_string(k.swizzle);
    s += "/rs" + std::to_string(k.reduction_scheme);
    s += "/st" + std::to_string(k.stages);
    s += '/';
    s += to_string(k.transpose_mode);
    return s;
}

void validate(const KernelKey& k) {
    if (k.family.is_utility()) {
        if (k.family.utility_name.empty()) throw ValidationError("utility kernel without a name");
        return;
    }
    const std::string where = "kernel " + to_string(k);
    if (k.tile_m < 1) throw ValidationError(where + ": tile_m must be >= 1");
    if (k.family.uses_gemm_tiles() && k.tile_n < 1) {
        throw ValidationError(where + ": tile_n must be >= 1");
    }
    if (k.split_k < 1) throw ValidationError(where + ": split_k must be >= 1");
}

void validate(const MatMulShape& s) {
    if (s.batch < 1 || s.m < 1 || s.n < 1 || s.k < 1) {
        throw ValidationError("matmul shape dims must all be >= 1");
    }
}

void validate(const VectorShape& s) {
    if (s.rows < 1 || s.length < 1) throw ValidationError("vector shape dims must all be >= 1");
}

void validate(const AttentionShape& s) {
    if (s.batch < 1 || s.heads < 1 || s.q_len < 1 || s.kv_len < 1) {
        throw ValidationError("attention shape dims must all be >= 1");
    }
}

double flop_count(const MatMulShape& s) {
    return 2.0 * static_cast<double>(s.batch) * static_cast<double>(s.m) *
           static_cast<double>(s.n) * static_cast<double>(s.k);
}

void validate(const MemBoundFeatures& f) {
    for (double v : {f.flops, f.int_ops, f.bytes_loaded, f.bytes_stored, f.total_bytes_accessed}) {
        if (!std::isfinite(v) || v < 0) {
            throw ValidationError("memory-bound features must be finite and non-negative");
        }
    }
}

void validate(const ThroughputCurve& c) {
    const std::string where = "curve " + to_string(c.kernel);
    validate(c.kernel);
    if (c.samples.size() < 2) throw ValidationError(where + ": needs at least 2 samples");
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
        const auto& s = c.samples[i];
        if (s.dim_value < 1) {
            throw ValidationError(where + ": sample " + std::to_string(i) + " dim_value must be >= 1");
        }
        if (!positive_finite(s.throughput_gflops)) {
            throw ValidationError(where + ": sample " + std::to_string(i) +
                                  " throughput must be positive");
        }
        if (i > 0 && s.dim_value <= c.samples[i - 1].dim_value) {
            throw ValidationError(where + ": samples not strictly ascending in " +
                                  c.varying_dim_name + " at index " + std::to_string(i));
        }
    }
    if (c.ref_dim_value != c.samples.back().dim_value) {
        throw ValidationError(where + ": ref_dim_value must equal the largest sampled dim_value");
    }
    require_positive(c.ref_duration_us, "ref_duration_us", where);
    if (c.ref_waves < 1) throw ValidationError(where + ": ref_waves must be >= 1");
    if (c.blocks_per_sm && *c.blocks_per_sm < 1) throw ValidationError(where + ": blocks_per_sm must be >= 1");
}

void validate(const ModelGraph& g) {
    if (g.layers.empty()) {
        throw ValidationError("model '" + g.model_name + "' has no layers");
    }
    if (g.batch_size < 1) throw ValidationError("model '" + g.model_name + "': batch_size must be >= 1");
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (g.layers[i].layer_id == g.layers[j].layer_id) {
                throw ValidationError("duplicate layer_id '" + g.layers[i].layer_id + "' at index " +
                                      std::to_string(i));
            }
        }
    }
}

std::string_view to_string(ConfigMatch m) {
    switch (m) {
        case ConfigMatch::None: return "none";
        case ConfigMatch::Exact: return "exact";
        case ConfigMatch::Nearest: return "nearest";
    }
    return "none";
}

}  // namespace pm2lat

std::size_t std::hash<pm2lat::KernelKey>::operator()(const pm2lat::KernelKey& k) const noexcept {
    std::size_t h = std::hash<std::string>{}(k.family.utility_name);
    auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
    mix(static_cast<std::size_t>(k.family.kind));
    mix(static_cast<std::size_t>(k.dtype));
    mix(static_cast<std::size_t>(k.library));
    for (auto v : {k.algorithm_id, k.tile_m, k.tile_n, k.split_k, k.swizzle, k.reduction_scheme, k.stages}) {
        mix(std::hash<std::int64_t>{}(v));
    }
    mix(static_cast<std::size_t>(k.transpose_mode));
    return h;
}
