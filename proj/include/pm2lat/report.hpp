#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pm2lat/aggregate.hpp"
#include "pm2lat/curve_analysis.hpp"
#include "pm2lat/nas_cache.hpp"
#include "pm2lat/partition.hpp"

namespace pm2lat {

// Machine-readable forms of the result types. Doubles are written in
// shortest round-trip form, so re-parsing yields the same bits.
nlohmann::json to_json(const PredictionBreakdown& b);
nlohmann::json to_json(const Prediction& p);
nlohmann::json to_json(const ModelPrediction& mp);
nlohmann::json to_json(const ErrorReport& r);
nlohmann::json to_json(const GridErrorReport& r);
nlohmann::json to_json(const PartitionPlan& plan);
nlohmann::json to_json(const PrecomputeSummary& s);
nlohmann::json to_json(const RationalFit& f);

// Shortest decimal text that parses back to the same double.
std::string shortest(double v);

// One row per record: case_id,measured,predicted,rel_err.
std::string error_report_csv(const ErrorReport& r);

// A case either carries predicted_us directly or a "layer" object in the
// model-graph layer schema, to be predicted against a dataset.
struct CaseInput {
    ErrorCase error_case;
    std::optional<LayerSpec> layer;
};

// {"cases": [{"case_id", "measured_us", "predicted_us"?, "axis"?, "layer"?}]}
std::vector<CaseInput> cases_from_json(const nlohmann::json& j, const std::string& source = "cases");

}  // namespace pm2lat
