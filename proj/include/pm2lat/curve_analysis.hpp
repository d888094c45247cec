#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pm2lat/core.hpp"

namespace pm2lat {

enum class RationalNormalization { DenominatorConstant, DenominatorSlope };  // d = 1, c = 1

// y = (a x + b) / (c x + d)
struct RationalFit {
    double a = 0;
    double b = 0;
    double c = 0;
    double d = 1;
    RationalNormalization normalization = RationalNormalization::DenominatorConstant;
    double rms_rel_err = 0;
    int iterations = 0;

    double operator()(double x) const { return (a * x + b) / (c * x + d); }
};

struct Point2 {
    double x = 0;
    double y = 0;
};

// Linearized least squares on y (c x + d) = a x + b, followed by up to
// max_iterations damped Gauss-Newton steps on the true residuals.
// Throws SingularSystem on < 4 samples, repeated x or non-positive y, and
// PoleInRange when the denominator changes sign over the sample range.
RationalFit fit_rational(std::span<const Point2> samples, int max_iterations = 50);

struct IntervalError {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    double max_rel_err = 0;
    std::int64_t argmax_dim = 0;
};

struct GridErrorReport {
    double max_rel_err = 0;
    std::int64_t argmax_dim = 0;
    std::vector<IntervalError> intervals;
};

using ThroughputOracle = std::function<double(std::int64_t)>;

// Scans every integer dim in [min sample, ref_dim_value] (or every `stride`-th
// one plus interval endpoints) and measures |oracle(d) / interp(d) - 1|: the
// relative latency error that piecewise-linear throughput induces, since
// latency scales with 1 / throughput.
GridErrorReport grid_error_report(const ThroughputCurve& curve, const ThroughputOracle& oracle,
                                  std::int64_t stride = 1);

}  // namespace pm2lat
