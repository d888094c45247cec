#include "pm2lat/compute.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pm2lat/error.hpp"

namespace pm2lat {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::array<double, 4> log2_of(const MatMulShape& s) {
    return {std::log2(static_cast<double>(s.batch)), std::log2(static_cast<double>(s.m)),
            std::log2(static_cast<double>(s.n)), std::log2(static_cast<double>(s.k))};
}

std::string triple_label(const Family& family, DType dtype, TransposeMode transpose) {
    return to_string(family) + "/" + std::string(to_string(dtype)) + "/" + std::string(to_string(transpose));
}

void check_wave_model(const WaveModel& wm) {
    if (wm.sm_count < 1 || wm.blocks_per_sm < 1) {
        throw ValidationError("wave model needs sm_count >= 1 and blocks_per_sm >= 1");
    }
}

// Shared tail of every compute-bound prediction.
Prediction scale_reference(const ThroughputCurve& curve, std::int64_t varying, std::int64_t waves) {
    const auto interp = interpolate_throughput(curve, varying);
    const double ref_throughput = curve.ref_throughput();

    Prediction p;
    p.kernel = curve.kernel;
    auto& b = p.breakdown;
    b.base_duration_us = curve.ref_duration_us *
                         (static_cast<double>(varying) / static_cast<double>(curve.ref_dim_value)) *
                         (ref_throughput / interp.throughput);
    b.waves = waves;
    b.ref_waves = curve.ref_waves;
    b.wave_scale = static_cast<double>(waves) / static_cast<double>(curve.ref_waves);
    b.interpolated_throughput = interp.throughput;
    b.ref_throughput = ref_throughput;
    b.varying_value = varying;
    b.below_range = interp.below_range;
    b.above_range = interp.above_range;
    p.latency_us = waves == curve.ref_waves ? b.base_duration_us : b.base_duration_us * b.wave_scale;
    return p;
}

void check_curve(const KernelKey& key, const ThroughputCurve& curve) {
    if (!(key == curve.kernel)) {
        throw CurveMismatch("key " + to_string(key) + " does not match curve " + to_string(curve.kernel));
    }
}

}  // namespace

void validate(const ConfigRecord& r) {
    validate(r.shape);
    validate(r.chosen_key);
    if (!(r.chosen_key.family == r.family) || r.chosen_key.dtype != r.dtype ||
        r.chosen_key.transpose_mode != r.transpose_mode) {
        throw ValidationError("config record for " + triple_label(r.family, r.dtype, r.transpose_mode) +
                              " has inconsistent chosen_key " + to_string(r.chosen_key));
    }
}

ConfigResolver::ConfigResolver(std::span<const ConfigRecord> records) {
    for (const auto& r : records) {
        table_[Triple{r.family, r.dtype, r.transpose_mode}].push_back(
            Entry{r.shape, r.chosen_key, log2_of(r.shape)});
    }
    for (auto& [triple, entries] : table_) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.shape < b.shape; });
        // First record wins on duplicate shapes.
        auto last = std::unique(entries.begin(), entries.end(),
                                [](const Entry& a, const Entry& b) { return a.shape == b.shape; });
        entries.erase(last, entries.end());
    }
}

std::size_t ConfigResolver::size() const {
    std::size_t n = 0;
    for (const auto& [triple, entries] : table_) n += entries.size();
    return n;
}

ResolvedConfig ConfigResolver::resolve(const Family& family, DType dtype, TransposeMode transpose,
                                       const MatMulShape& shape) const {
    auto it = table_.find(Triple{family, dtype, transpose});
    if (it == table_.end() || it->second.empty()) {
        throw NoConfigAvailable("no recorded configuration for " + triple_label(family, dtype, transpose));
    }
    const auto& entries = it->second;
    auto hit = std::lower_bound(entries.begin(), entries.end(), shape,
                                [](const Entry& e, const MatMulShape& s) { return e.shape < s; });
    if (hit != entries.end() && hit->shape == shape) {
        return {hit->key, ConfigMatch::Exact, hit->shape};
    }

    const Entry* best = nullptr;
    double best_dist = std::numeric_limits<double>::infinity();
    double best_batch_gap = std::numeric_limits<double>::infinity();
    const auto q = log2_of(shape);
    for (const auto& e : entries) {
        const double dist =
            std::max({std::abs(e.lg[1] - q[1]), std::abs(e.lg[2] - q[2]), std::abs(e.lg[3] - q[3])});
        const double batch_gap = std::abs(e.lg[0] - q[0]);
        bool better = false;
        if (best == nullptr || dist < best_dist) {
            better = true;
        } else if (dist == best_dist) {
            const auto mine = std::tie(e.shape.m, e.shape.n, e.shape.k);
            const auto theirs = std::tie(best->shape.m, best->shape.n, best->shape.k);
            better = mine < theirs || (mine == theirs && batch_gap < best_batch_gap);
        }
        if (better) {
            best = &e;
            best_dist = dist;
            best_batch_gap = batch_gap;
        }
    }
    return {best->key, ConfigMatch::Nearest, best->shape};
}

ResolvedConfig resolve_config(const Family& family, DType dtype, TransposeMode transpose,
                              const MatMulShape& shape, const ConfigResolver& resolver) {
    return resolver.resolve(family, dtype, transpose, shape);
}

std::int64_t gemm_block_count(const MatMulShape& shape, const KernelKey& key) {
    if (key.tile_m < 1 || key.tile_n < 1 || key.split_k < 1) {
        throw InvalidTile("kernel " + to_string(key) + " has a zero tile or split_k");
    }
    validate(shape);
    return shape.batch * ceil_div(shape.m, key.tile_m) * ceil_div(shape.n, key.tile_n) * key.split_k;
}

std::int64_t waves_for_blocks(std::int64_t blocks, const WaveModel& wm) {
    check_wave_model(wm);
    return ceil_div(blocks, wm.blocks_per_wave());
}

std::int64_t wave_count(const MatMulShape& shape, const KernelKey& key, const WaveModel& wm) {
    return waves_for_blocks(gemm_block_count(shape, key), wm);
}

InterpolatedThroughput interpolate_throughput(const ThroughputCurve& curve, std::int64_t new_dim) {
    const auto& s = curve.samples;
    if (new_dim < s.front().dim_value) return {s.front().throughput_gflops, true, false};
    if (new_dim > curve.ref_dim_value) return {curve.ref_throughput(), false, true};

    auto hi = std::lower_bound(s.begin(), s.end(), new_dim,
                               [](const ThroughputSample& x, std::int64_t d) { return x.dim_value < d; });
    if (hi->dim_value == new_dim) return {hi->throughput_gflops, false, false};
    auto lo = std::prev(hi);
    const double k1 = static_cast<double>(lo->dim_value);
    const double k3 = static_cast<double>(hi->dim_value);
    const double t1 = lo->throughput_gflops;
    const double t3 = hi->throughput_gflops;
    return {t1 + (static_cast<double>(new_dim) - k1) / (k3 - k1) * (t3 - t1), false, false};
}

Prediction predict_compute(const MatMulShape& shape, const KernelKey& key, const ThroughputCurve& curve,
                           const WaveModel& wm) {
    check_curve(key, curve);
    validate(shape);
    return scale_reference(curve, shape.k, wave_count(shape, key, wm));
}

std::string_view varying_dim_of(const Family& family) {
    switch (family.kind) {
        case FamilyKind::TritonVec: return kVaryingLength;
        case FamilyKind::FlashAttention:
        case FamilyKind::CutlassAttention: return kVaryingSeqLen;
        case FamilyKind::Utility: throw UnknownFamily(to_string(family) + " has no throughput curve");
        default: return kVaryingK;
    }
}

Prediction predict_generic(const KernelInstance& instance, const KernelKey& key, const ThroughputCurve& curve,
                           const WaveModel& wm) {
    check_curve(key, curve);
    const auto expected_dim = varying_dim_of(key.family);
    if (curve.varying_dim_name != expected_dim) {
        throw CurveMismatch("curve " + to_string(curve.kernel) + " varies '" + curve.varying_dim_name +
                            "' but " + to_string(key.family) + " varies '" + std::string(expected_dim) + "'");
    }
    const auto family_error = [&key](std::string_view shape_kind) {
        return UnknownFamily(std::string(shape_kind) + " instance cannot run on " + to_string(key.family));
    };
    if (key.tile_m < 1) throw InvalidTile("kernel " + to_string(key) + " has no block size");

    switch (key.family.kind) {
        case FamilyKind::MatMul:
        case FamilyKind::BatchedMatMul:
        case FamilyKind::Linear:
        case FamilyKind::TritonMM: {
            const auto* shape = std::get_if<MatMulShape>(&instance);
            if (shape == nullptr) throw family_error("non-matmul");
            return predict_compute(*shape, key, curve, wm);
        }
        case FamilyKind::TritonVec: {
            const auto* shape = std::get_if<VectorShape>(&instance);
            if (shape == nullptr) throw family_error("non-vector");
            validate(*shape);
            const auto blocks = ceil_div(shape->rows, key.tile_m);
            return scale_reference(curve, shape->length, waves_for_blocks(blocks, wm));
        }
        case FamilyKind::FlashAttention:
        case FamilyKind::CutlassAttention: {
            const auto* shape = std::get_if<AttentionShape>(&instance);
            if (shape == nullptr) throw family_error("non-attention");
            validate(*shape);
            const auto blocks = shape->batch * shape->heads * ceil_div(shape->q_len, key.tile_m);
            return scale_reference(curve, shape->kv_len, waves_for_blocks(blocks, wm));
        }
        case FamilyKind::Utility:
            break;
    }
    throw UnknownFamily(to_string(key.family) + " is not a compute-bound family");
}

MatMulShape resolution_shape(const KernelInstance& instance) {
    struct Visitor {
        MatMulShape operator()(const MatMulShape& s) const { return s; }
        MatMulShape operator()(const VectorShape& s) const { return {1, s.rows, 1, s.length}; }
        MatMulShape operator()(const AttentionShape& s) const {
            return {s.batch * s.heads, s.q_len, 1, s.kv_len};
        }
    };
    return std::visit(Visitor{}, instance);
}

}  // namespace pm2lat
