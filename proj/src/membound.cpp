#include "pm2lat/membound.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pm2lat/error.hpp"
#include "pm2lat/log.hpp"

namespace pm2lat {

Eigen::Matrix<double, 5, 1> as_vector(const MemBoundFeatures& f) {
    Eigen::Matrix<double, 5, 1> v;
    v << f.flops, f.int_ops, f.bytes_loaded, f.bytes_stored, f.total_bytes_accessed;
    return v;
}

MemBoundModel fit(std::span<const MemBoundRecord> records, const std::string& kernel_name,
                  DType dtype, const std::string& train_device_id) {
    std::vector<const MemBoundRecord*> rows;
    for (const auto& r : records) {
        if (r.kernel_name == kernel_name && r.dtype == dtype) rows.push_back(&r);
    }
    const std::string label = kernel_name + "/" + std::string(to_string(dtype));
    if (rows.size() < kMinMemBoundRecords) {
        throw InsufficientData(label + ": " + std::to_string(rows.size()) + " records, need at least " +
                               std::to_string(kMinMemBoundRecords));
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    constexpr Eigen::Index p = kMemBoundFeatureCount + 1;
    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd latency(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = *rows[static_cast<std::size_t>(i)];
        validate(r.features);
        if (!(r.latency_us > 0) || !std::isfinite(r.latency_us)) {
            throw ValidationError(label + ": record " + std::to_string(i) + " latency must be positive");
        }
        design.row(i).head<5>() = as_vector(r.features).transpose();
        design(i, p - 1) = 1.0;
        latency(i) = r.latency_us;
    }

    // Byte counts and latencies differ by many orders of magnitude; solve in
    // unit-max column space and map back.
    Eigen::VectorXd column_scale = design.cwiseAbs().colwise().maxCoeff().transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (column_scale(j) == 0) column_scale(j) = 1;
    }
    const Eigen::MatrixXd scaled = design * column_scale.cwiseInverse().asDiagonal();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(scaled);
    Eigen::VectorXd coef = cod.solve(latency);
    // One step of iterative refinement tightens well-conditioned solves to ~1 ulp.
    coef += cod.solve(latency - scaled * coef);
    coef = coef.cwiseQuotient(column_scale);

    const bool constant_latency = (latency.array() == latency(0)).all();
    const bool varying_features =
        ((design.leftCols<5>().rowwise() - design.leftCols<5>().row(0)).array() != 0).any();
    if (constant_latency && varying_features) {
        warn(label + ": identical latency across records with varying features");
    }

    MemBoundModel model;
    model.kernel_name = kernel_name;
    model.dtype = dtype;
    for (std::size_t j = 0; j < kMemBoundFeatureCount; ++j) model.weights[j] = coef(static_cast<Eigen::Index>(j));
    model.intercept = coef(p - 1);
    model.train_device_id = train_device_id;

    const Eigen::VectorXd fitted = design * coef;
    const Eigen::ArrayXd rel = ((fitted - latency).array() / latency.array()).abs();
    model.residual_stats.max_rel_err = rel.maxCoeff();
    model.residual_stats.mean_rel_err = rel.mean();
    return model;
}

Prediction predict_membound(const MemBoundModel& model, const MemBoundFeatures& features,
                            double launch_floor_us) {
    const auto x = as_vector(features);
    double raw = model.intercept;
    for (std::size_t j = 0; j < kMemBoundFeatureCount; ++j) {
        raw += model.weights[j] * x(static_cast<Eigen::Index>(j));
    }
    Prediction p;
    p.kernel = model.key();
    p.breakdown.raw_latency_us = raw;
    p.breakdown.floored = !(raw >= launch_floor_us);
    p.latency_us = p.breakdown.floored ? launch_floor_us : raw;
    return p;
}

ScalingPolicy derive_policy(const DeviceProfile& ref, const DeviceProfile& target) {
    validate(ref);
    validate(target);
    ScalingPolicy policy;
    policy.byte_scale = ref.dram_bw_gbs / target.dram_bw_gbs;
    policy.instr_scale = (static_cast<double>(ref.cuda_cores) * ref.max_freq_ghz) /
                         (static_cast<double>(target.cuda_cores) * target.max_freq_ghz);
    policy.ref_device_id = ref.device_id;
    policy.target_device_id = target.device_id;
    return policy;
}

MemBoundFeatures scale_features(const MemBoundFeatures& f, const ScalingPolicy& policy) {
    return MemBoundFeatures{
        .flops = f.flops * policy.instr_scale,
        .int_ops = f.int_ops * policy.instr_scale,
        .bytes_loaded = f.bytes_loaded * policy.byte_scale,
        .bytes_stored = f.bytes_stored * policy.byte_scale,
        .total_bytes_accessed = f.total_bytes_accessed * policy.byte_scale,
    };
}

}  // namespace pm2lat
