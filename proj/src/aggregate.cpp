#include "pm2lat/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "pm2lat/error.hpp"
#include "pm2lat/log.hpp"

namespace pm2lat {

WaveModel default_wave_model(const DeviceProfile& device) { return {device.sm_count, 1}; }

std::vector<MemBoundModel> fit_all(const Dataset& dataset) {
    std::map<std::pair<std::string, DType>, std::size_t> counts;
    for (const auto& r : dataset.membound_records) ++counts[{r.kernel_name, r.dtype}];
    std::vector<MemBoundModel> models;
    for (const auto& [id, count] : counts) {
        if (count < kMinMemBoundRecords) {
            warn("skipping '" + id.first + "/" + std::string(to_string(id.second)) + "': only " +
                 std::to_string(count) + " records");
            continue;
        }
        models.push_back(fit(dataset.membound_records, id.first, id.second, dataset.device.device_id));
    }
    return models;
}

Predictor::Predictor(const Dataset& dataset, std::optional<WaveModel> wave_model, double launch_floor_us)
    : device_(dataset.device),
      wave_model_(wave_model.value_or(default_wave_model(dataset.device))),
      launch_floor_us_(launch_floor_us),
      curves_(dataset.curves),
      resolver_(dataset.config_map),
      fingerprint_(fingerprint(dataset)) {
    for (const auto& m : dataset.membound_models) models_.emplace(std::pair{m.kernel_name, m.dtype}, m);
    std::map<std::pair<std::string, DType>, std::size_t> counts;
    for (const auto& r : dataset.membound_records) {
        if (!models_.contains({r.kernel_name, r.dtype})) ++counts[{r.kernel_name, r.dtype}];
    }
    for (const auto& [id, count] : counts) {
        if (count < kMinMemBoundRecords) continue;
        models_.emplace(id, fit(dataset.membound_records, id.first, id.second, dataset.device.device_id));
    }
}

Prediction Predictor::predict_compute_instance(const Family& family, DType dtype, TransposeMode transpose,
                                               const KernelInstance& instance) const {
    const auto resolved = resolver_.resolve(family, dtype, transpose, resolution_shape(instance));
    auto it = curves_.find(resolved.key);
    if (it == curves_.end()) {
        throw UnknownKernel("resolved kernel " + to_string(resolved.key) + " has no throughput curve");
    }
    WaveModel wm = wave_model_;
    if (it->second.blocks_per_sm) wm.blocks_per_sm = *it->second.blocks_per_sm;
    auto p = predict_generic(instance, resolved.key, it->second, wm);
    p.breakdown.config_match = resolved.match;
    return p;
}

Prediction Predictor::predict_utility(const std::string& kernel_name, DType dtype,
                                      const MemBoundFeatures& features) const {
    auto it = models_.find({kernel_name, dtype});
    if (it == models_.end()) {
        throw UnknownKernel("no memory-bound model for '" + kernel_name + "/" + std::string(to_string(dtype)) + "'");
    }
    return predict_membound(it->second, features, launch_floor_us_);
}

Prediction Predictor::predict_layer(const LayerSpec& layer) const {
    try {
        if (layer.family.is_utility()) {
            const auto* features = std::get_if<MemBoundFeatures>(&layer.shape);
            if (features == nullptr) throw UnknownFamily("utility layer without features");
            return predict_utility(layer.family.utility_name, layer.dtype, *features);
        }
        KernelInstance instance;
        if (const auto* s = std::get_if<MatMulShape>(&layer.shape)) instance = *s;
        else if (const auto* s = std::get_if<VectorShape>(&layer.shape)) instance = *s;
        else if (const auto* s = std::get_if<AttentionShape>(&layer.shape)) instance = *s;
        else throw UnknownFamily(to_string(layer.family) + " layer carries memory-bound features");
        return predict_compute_instance(layer.family, layer.dtype,
                                        layer.transpose_mode.value_or(default_transpose(layer.family)), instance);
    } catch (const Error& e) {
        if (e.category() != ErrorCategory::Prediction) throw;
        throw UnresolvedLayer("layer '" + layer.layer_id + "' on " + device_.device_id + ": " + e.what());
    }
}

double quantize_latency(double latency_us) {
    return std::nearbyint(latency_us / kLatencyQuantumUs) * kLatencyQuantumUs;
}

std::string_view to_string(PredictorKind k) { return k == PredictorKind::Compute ? "compute" : "membound"; }

ModelPrediction predict_model(const ModelGraph& graph, const Predictor& predictor) {
    validate(graph);
    ModelPrediction out;
    out.model_name = graph.model_name;
    out.per_layer.reserve(graph.layers.size());
    for (const auto& layer : graph.layers) {
        auto p = predictor.predict_layer(layer);
        p.latency_us = quantize_latency(p.latency_us);
        const auto kind = layer.family.is_utility() ? PredictorKind::MemBound : PredictorKind::Compute;
        const auto& b = p.breakdown;
        if (b.config_match == ConfigMatch::Nearest) out.flags.push_back({layer.layer_id, "nearest_config"});
        if (b.below_range) out.flags.push_back({layer.layer_id, "below_range"});
        if (b.above_range) out.flags.push_back({layer.layer_id, "above_range"});
        if (b.floored) out.flags.push_back({layer.layer_id, "floored"});
        out.per_layer.push_back({layer.layer_id, std::move(p), kind});
    }
    double total = 0;
    for (const auto& lp : out.per_layer) total += lp.prediction.latency_us;
    out.total_latency_us = total;
    return out;
}

ModelPrediction predict_model(const ModelGraph& graph, const Dataset& dataset, const WaveModel& wm) {
    return predict_model(graph, Predictor(dataset, wm));
}

double relative_error(double measured_us, double predicted_us) {
    if (!(measured_us > 0)) throw ZeroMeasured("measured latency must be positive");
    return (predicted_us - measured_us) / measured_us;
}

std::size_t histogram_bucket(double abs_rel_err) {
    // Thresholds i / 20 round to the same doubles as the decimals 0.05, 0.1, ...
    // so 0.95 lands in the last bucket even though 0.95 / 0.05 < 19.
    const auto edge = [](std::size_t i) { return static_cast<double>(i) / 20.0; };
    for (std::size_t b = 0; b + 1 < kHistogramBuckets; ++b) {
        if (abs_rel_err < edge(b + 1)) return b;
    }
    return kHistogramBuckets - 1;
}

ErrorReport build_error_report(const std::vector<ErrorCase>& cases, const ErrorAxis& axis, std::size_t bins) {
    if (cases.empty()) throw EmptyInput("error report needs at least one record");
    if (bins == 0) throw EmptyInput("error report needs at least one bin");
    ErrorReport report;
    report.records.reserve(cases.size());
    for (const auto& c : cases) {
        const double x = axis ? axis(c) : c.axis;
        if (!std::isfinite(x)) throw ValidationError("case '" + c.case_id + "' has a non-finite axis value");
        report.records.push_back({c.case_id, c.measured_us, c.predicted_us, relative_error(c.measured_us, c.predicted_us), x});
    }
    auto [lo, hi] = std::minmax_element(report.records.begin(), report.records.end(),
                                        [](const ErrorRecord& a, const ErrorRecord& b) { return a.axis < b.axis; });
    report.axis_min = lo->axis;
    report.axis_max = hi->axis;
    const double width = (report.axis_max - report.axis_min) / static_cast<double>(bins);

    report.binned_max.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        report.binned_max[i].lo = report.axis_min + width * static_cast<double>(i);
        report.binned_max[i].hi = i + 1 == bins ? report.axis_max : report.axis_min + width * static_cast<double>(i + 1);
    }
    double sum_abs = 0;
    for (const auto& r : report.records) {
        const double e = std::abs(r.signed_rel_err);
        sum_abs += e;
        std::size_t bin = 0;
        if (width > 0) {
            const double pos = std::floor((r.axis - report.axis_min) / width);
            bin = std::min(bins - 1, static_cast<std::size_t>(std::max(pos, 0.0)));
        }
        auto& b = report.binned_max[bin];
        ++b.count;
        b.max_abs_rel_err = std::max(b.max_abs_rel_err.value_or(0.0), e);
        ++report.histogram[histogram_bucket(e)];
    }
    report.mean_abs_rel_err = sum_abs / static_cast<double>(report.records.size());
    return report;
}

}  // namespace pm2lat
