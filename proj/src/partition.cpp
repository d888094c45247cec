#include "pm2lat/partition.hpp"

#include <algorithm>

#include "pm2lat/error.hpp"

namespace pm2lat {

CutChoice best_cut(std::span<const double> latency_a, std::span<const double> latency_b,
                   std::span<const double> transfer_us) {
    const std::size_t layers = latency_a.size();
    if (latency_b.size() != layers) throw ValidationError("per-device latency lists differ in length");
    if (!transfer_us.empty() && transfer_us.size() != layers + 1) {
        throw ValidationError("transfer list must have one entry per cut");
    }

    std::vector<double> prefix_a(layers + 1, 0.0);
    for (std::size_t i = 0; i < layers; ++i) prefix_a[i + 1] = prefix_a[i] + latency_a[i];
    // suffix_b[c] = b[c] + b[c+1] + ... accumulated left to right.
    std::vector<double> suffix_b(layers + 1, 0.0);
    for (std::size_t c = 0; c < layers; ++c) {
        double s = 0;
        for (std::size_t i = c; i < layers; ++i) s += latency_b[i];
        suffix_b[c] = s;
    }

    CutChoice best;
    for (std::size_t c = 0; c <= layers; ++c) {
        const double transfer = (!transfer_us.empty() && c > 0 && c < layers) ? transfer_us[c] : 0.0;
        const double stage_b = transfer == 0.0 ? suffix_b[c] : suffix_b[c] + transfer;
        const double bottleneck = std::max(prefix_a[c], stage_b);
        if (c == 0 || bottleneck < best.bottleneck_us) {
            best = {c, prefix_a[c], stage_b, transfer, bottleneck};
        }
    }
    return best;
}

double activation_bytes(const LayerSpec& layer) {
    const double elem = layer.dtype == DType::FP32 ? 4.0 : 2.0;
    struct Visitor {
        double elem;
        double operator()(const MatMulShape& s) const {
            return elem * static_cast<double>(s.batch) * static_cast<double>(s.m) * static_cast<double>(s.n);
        }
        double operator()(const VectorShape& s) const {
            return elem * static_cast<double>(s.rows) * static_cast<double>(s.length);
        }
        double operator()(const AttentionShape& s) const {
            // Output is (batch, heads, q_len, head_dim); head_dim is not part of the shape, so
            // the kv length stands in for it.
            return elem * static_cast<double>(s.batch) * static_cast<double>(s.heads) *
                   static_cast<double>(s.q_len) * static_cast<double>(s.kv_len);
        }
        double operator()(const MemBoundFeatures& f) const { return f.bytes_stored; }
    };
    return std::visit(Visitor{elem}, layer.shape);
}

PartitionPlan partition_two_device(const ModelGraph& graph, const Predictor& device_a, const Predictor& device_b,
                                   const PartitionOptions& options) {
    PartitionPlan plan;
    plan.prediction_a = predict_model(graph, device_a);
    plan.prediction_b = predict_model(graph, device_b);

    const std::size_t layers = graph.layers.size();
    std::vector<double> a(layers), b(layers), transfer;
    for (std::size_t i = 0; i < layers; ++i) {
        a[i] = plan.prediction_a.per_layer[i].prediction.latency_us;
        b[i] = plan.prediction_b.per_layer[i].prediction.latency_us;
    }
    if (options.link_gbs > 0) {
        transfer.assign(layers + 1, 0.0);
        for (std::size_t c = 1; c < layers; ++c) {
            transfer[c] = activation_bytes(graph.layers[c - 1]) / (options.link_gbs * 1e3);  // GB/s -> bytes/us
        }
    }
    const auto choice = best_cut(a, b, transfer);
    plan.cut_after_layer_index = choice.cut;
    plan.stage_a_us = choice.stage_a_us;
    plan.stage_b_us = choice.stage_b_us;
    plan.transfer_us = choice.transfer_us;
    plan.bottleneck_us = choice.bottleneck_us;
    return plan;
}

PartitionPlan partition_two_device(const ModelGraph& graph, const Dataset& ds_a, const Dataset& ds_b,
                                   const WaveModel& wm_a, const WaveModel& wm_b, const PartitionOptions& options) {
    return partition_two_device(graph, Predictor(ds_a, wm_a), Predictor(ds_b, wm_b), options);
}

double throughput_estimate(const PartitionPlan& plan, std::int64_t num_requests) {
    if (num_requests < 1) throw ValidationError("num_requests must be >= 1");
    return plan.stage_a_us + plan.stage_b_us + static_cast<double>(num_requests - 1) * plan.bottleneck_us;
}

}  // namespace pm2lat
