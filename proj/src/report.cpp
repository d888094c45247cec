#include "pm2lat/report.hpp"

#include <charconv>
#include <sstream>

#include "pm2lat/error.hpp"

namespace pm2lat {

using nlohmann::json;

json to_json(const PredictionBreakdown& b) {
    return {
        {"base_duration_us", b.base_duration_us},
        {"wave_scale", b.wave_scale},
        {"interpolated_throughput", b.interpolated_throughput},
        {"ref_throughput", b.ref_throughput},
        {"waves", b.waves},
        {"ref_waves", b.ref_waves},
        {"varying_value", b.varying_value},
        {"below_range", b.below_range},
        {"above_range", b.above_range},
        {"config_match", to_string(b.config_match)},
        {"raw_latency_us", b.raw_latency_us},
        {"floored", b.floored},
    };
}

json to_json(const Prediction& p) {
    return {{"latency_us", p.latency_us}, {"kernel", to_json(p.kernel)}, {"breakdown", to_json(p.breakdown)}};
}

json to_json(const ModelPrediction& mp) {
    json layers = json::array();
    for (const auto& lp : mp.per_layer) {
        layers.push_back({{"layer_id", lp.layer_id},
                          {"predictor_kind", to_string(lp.kind)},
                          {"prediction", to_json(lp.prediction)}});
    }
    json flags = json::array();
    for (const auto& f : mp.flags) flags.push_back({{"layer_id", f.layer_id}, {"flag", f.flag}});
    return {{"model_name", mp.model_name},
            {"total_latency_us", mp.total_latency_us},
            {"per_layer", std::move(layers)},
            {"flags", std::move(flags)}};
}

json to_json(const ErrorReport& r) {
    json records = json::array();
    for (const auto& rec : r.records) {
        records.push_back({{"case_id", rec.case_id},
                           {"measured_us", rec.measured_us},
                           {"predicted_us", rec.predicted_us},
                           {"signed_rel_err", rec.signed_rel_err},
                           {"axis", rec.axis}});
    }
    json bins = json::array();
    for (const auto& b : r.binned_max) {
        json jb = {{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}};
        jb["max_abs_rel_err"] = b.max_abs_rel_err ? json(*b.max_abs_rel_err) : json(nullptr);
        bins.push_back(std::move(jb));
    }
    json hist = json::array();
    for (std::size_t i = 0; i < r.histogram.size(); ++i) {
        const double lo = kHistogramWidth * static_cast<double>(i);
        json h = {{"lo", lo}, {"count", r.histogram[i]}};
        h["hi"] = i + 1 == r.histogram.size() ? json(nullptr) : json(kHistogramWidth * static_cast<double>(i + 1));
        hist.push_back(std::move(h));
    }
    return {{"records", std::move(records)},
            {"summary", {{"count", r.records.size()}, {"mean_abs_rel_err", r.mean_abs_rel_err}}},
            {"axis_min", r.axis_min},
            {"axis_max", r.axis_max},
            {"binned_max", std::move(bins)},
            {"histogram", std::move(hist)}};
}

json to_json(const GridErrorReport& r) {
    json intervals = json::array();
    for (const auto& iv : r.intervals) {
        intervals.push_back(
            {{"lo", iv.lo}, {"hi", iv.hi}, {"max_rel_err", iv.max_rel_err}, {"argmax", iv.argmax_dim}});
    }
    return {{"max_rel_err", r.max_rel_err}, {"argmax", r.argmax_dim}, {"intervals", std::move(intervals)}};
}

json to_json(const PartitionPlan& plan) {
    return {{"cut_after_layer_index", plan.cut_after_layer_index},
            {"stage_a_us", plan.stage_a_us},
            {"stage_b_us", plan.stage_b_us},
            {"transfer_us", plan.transfer_us},
            {"bottleneck_us", plan.bottleneck_us},
            {"total_a_us", plan.prediction_a.total_latency_us},
            {"total_b_us", plan.prediction_b.total_latency_us}};
}

json to_json(const PrecomputeSummary& s) {
    return {{"count", s.count},
            {"skipped", s.skipped},
            {"elapsed_s", s.elapsed_s},
            {"mean_us_per_prediction", s.mean_us_per_prediction}};
}

json to_json(const RationalFit& f) {
    return {{"a", f.a},
            {"b", f.b},
            {"c", f.c},
            {"d", f.d},
            {"normalization", f.normalization == RationalNormalization::DenominatorConstant ? "d=1" : "c=1"},
            {"rms_rel_err", f.rms_rel_err},
            {"iterations", f.iterations}};
}

std::string shortest(double v) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, result.ptr);
}

std::string error_report_csv(const ErrorReport& r) {
    std::ostringstream out;
    out << "case_id,measured,predicted,rel_err\n";
    for (const auto& rec : r.records) {
        std::string id = rec.case_id;
        if (id.find_first_of(",\"\n") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : id) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            id = quoted + "\"";
        }
        out << id << ',' << shortest(rec.measured_us) << ',' << shortest(rec.predicted_us) << ','
            << shortest(rec.signed_rel_err) << '\n';
    }
    return out.str();
}

std::vector<CaseInput> cases_from_json(const json& j, const std::string& source) {
    if (!j.is_object() || !j.contains("cases") || !j.at("cases").is_array()) {
        throw SchemaError(source + ": expected an object with a \"cases\" array");
    }
    std::vector<CaseInput> out;
    const auto& cases = j.at("cases");
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        const auto where = source + ": /cases/" + std::to_string(i);
        CaseInput in;
        try {
            in.error_case.case_id = c.at("case_id").get<std::string>();
            in.error_case.measured_us = c.at("measured_us").get<double>();
            in.error_case.axis = c.value("axis", static_cast<double>(i));
            if (c.contains("predicted_us")) {
                in.error_case.predicted_us = c.at("predicted_us").get<double>();
            } else if (c.contains("layer")) {
                json wrapper = {{"model_name", in.error_case.case_id}, {"layers", json::array({c.at("layer")})}};
                in.layer = model_graph_from_json(wrapper, where).layers.front();
            } else {
                throw SchemaError(where + ": needs predicted_us or layer");
            }
        } catch (const json::exception& e) {
            throw SchemaError(where + ": " + e.what());
        }
        out.push_back(std::move(in));
    }
    return out;
}

}  // namespace pm2lat
