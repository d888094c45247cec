#include "pm2lat/curve_analysis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "pm2lat/compute.hpp"
#include "pm2lat/error.hpp"

namespace pm2lat {

namespace {

// Denominator magnitude past which d = 1 is numerically meaningless.
constexpr double kUnderflowRatio = 1e12;

Eigen::VectorXd solve_scaled(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs, Eigen::Index* rank) {
    Eigen::VectorXd scale = a.cwiseAbs().colwise().maxCoeff().transpose();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
        if (scale(j) == 0) scale(j) = 1;
    }
    const Eigen::MatrixXd scaled = a * scale.cwiseInverse().asDiagonal();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(scaled);
    if (rank != nullptr) *rank = cod.rank();
    Eigen::VectorXd x = cod.solve(rhs);
    x += cod.solve(rhs - scaled * x);
    return x.cwiseQuotient(scale);
}

bool pole_free(const RationalFit& f, double x_lo, double x_hi) {
    return f.c * x_lo + f.d > 0 && f.c * x_hi + f.d > 0;
}

double sse(const RationalFit& f, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    double s = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double r = f(x(i)) - y(i);
        s += r * r;
    }
    return s;
}

void set_free(RationalFit& f, const Eigen::Vector3d& p) {
    f.a = p(0);
    f.b = p(1);
    if (f.normalization == RationalNormalization::DenominatorConstant) {
        f.c = p(2);
    } else {
        f.d = p(2);
    }
}

Eigen::Vector3d get_free(const RationalFit& f) {
    return {f.a, f.b, f.normalization == RationalNormalization::DenominatorConstant ? f.c : f.d};
}

}  // namespace

RationalFit fit_rational(std::span<const Point2> samples, int max_iterations) {
    if (samples.size() < 4) throw SingularSystem("rational fit needs at least 4 samples");
    std::vector<Point2> pts(samples.begin(), samples.end());
    std::sort(pts.begin(), pts.end(), [](const Point2& p, const Point2& q) { return p.x < q.x; });
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!std::isfinite(pts[i].x) || !std::isfinite(pts[i].y) || !(pts[i].y > 0)) {
            throw SingularSystem("rational fit needs finite x and positive y");
        }
        if (i > 0 && pts[i].x == pts[i - 1].x) throw SingularSystem("repeated x in rational fit samples");
    }

    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i) = pts[static_cast<std::size_t>(i)].x;
        y(i) = pts[static_cast<std::size_t>(i)].y;
    }
    const double x_lo = x(0);
    const double x_hi = x(n - 1);
    const double x_mag = std::max(std::abs(x_lo), std::abs(x_hi));

    // a x + b - c x y = y  (d = 1)
    RationalFit fit;
    Eigen::MatrixXd lin(n, 3);
    lin.col(0) = x;
    lin.col(1).setOnes();
    lin.col(2) = -x.cwiseProduct(y);
    Eigen::Index rank = 0;
    Eigen::Vector3d p = solve_scaled(lin, y, &rank);
    if (rank == 0) throw SingularSystem("degenerate rational fit system");
    fit.a = p(0);
    fit.b = p(1);
    fit.c = p(2);
    fit.d = 1;

    if (std::abs(fit.c) * x_mag > kUnderflowRatio) {
        // a x + b - d y = x y  (c = 1)
        lin.col(2) = -y;
        p = solve_scaled(lin, x.cwiseProduct(y), &rank);
        if (rank == 0) throw SingularSystem("degenerate rational fit system");
        fit.normalization = RationalNormalization::DenominatorSlope;
        fit.a = p(0);
        fit.b = p(1);
        fit.c = 1;
        fit.d = p(2);
    }
    if (!pole_free(fit, x_lo, x_hi)) {
        throw PoleInRange("denominator changes sign within [" + std::to_string(x_lo) + ", " +
                          std::to_string(x_hi) + "]");
    }

    double best = sse(fit, x, y);
    Eigen::MatrixXd jac(n, 3);
    Eigen::VectorXd residual(n);
    for (int it = 0; it < max_iterations && best > 0; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double den = fit.c * x(i) + fit.d;
            const double num = fit.a * x(i) + fit.b;
            residual(i) = num / den - y(i);
            jac(i, 0) = x(i) / den;
            jac(i, 1) = 1.0 / den;
            const double dden = fit.normalization == RationalNormalization::DenominatorConstant ? x(i) : 1.0;
            jac(i, 2) = -dden * num / (den * den);
        }
        const Eigen::Vector3d step = solve_scaled(jac, -residual, nullptr);
        const Eigen::Vector3d base = get_free(fit);
        bool improved = false;
        for (double damping = 1.0; damping > 1e-10; damping *= 0.5) {
            RationalFit trial = fit;
            set_free(trial, base + damping * step);
            if (!pole_free(trial, x_lo, x_hi)) continue;
            const double s = sse(trial, x, y);
            if (s < best) {
                improved = best - s > best * 1e-15;
                fit = trial;
                best = s;
                break;
            }
        }
        fit.iterations = it + 1;
        if (!improved) break;
    }

    double rel = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = fit(x(i)) / y(i) - 1.0;
        rel += e * e;
    }
    fit.rms_rel_err = std::sqrt(rel / static_cast<double>(n));
    return fit;
}

GridErrorReport grid_error_report(const ThroughputCurve& curve, const ThroughputOracle& oracle,
                                  std::int64_t stride) {
    validate(curve);
    stride = std::max<std::int64_t>(stride, 1);
    GridErrorReport report;
    report.argmax_dim = curve.samples.front().dim_value;
    for (std::size_t i = 0; i + 1 < curve.samples.size(); ++i) {
        IntervalError iv;
        iv.lo = curve.samples[i].dim_value;
        iv.hi = curve.samples[i + 1].dim_value;
        iv.argmax_dim = iv.lo;
        auto probe = [&](std::int64_t d) {
            const double e = std::abs(oracle(d) / interpolate_throughput(curve, d).throughput - 1.0);
            if (e > iv.max_rel_err) {
                iv.max_rel_err = e;
                iv.argmax_dim = d;
            }
        };
        for (std::int64_t d = iv.lo; d < iv.hi; d += stride) probe(d);
        probe(iv.hi);
        if (iv.max_rel_err > report.max_rel_err) {
            report.max_rel_err = iv.max_rel_err;
            report.argmax_dim = iv.argmax_dim;
        }
        report.intervals.push_back(iv);
    }
    return report;
}

}  // namespace pm2lat
