#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcrl/error.hpp"

namespace fcrl {

struct TradeoffPoint {
    double beta = 0.0;
    double accuracy = 0.0;
    double parity = 0.0;
    std::string tag;

    void validate() const {
        if (!std::isfinite(beta) || !std::isfinite(accuracy) || !std::isfinite(parity))
            throw DataError("tradeoff point: non-finite field");
        if (accuracy < 0.0 || accuracy > 1.0) throw DataError("tradeoff point: accuracy outside [0,1]");
        if (parity < 0.0 || parity > 1.0) throw DataError("tradeoff point: parity outside [0,1]");
    }
};

// Joint label/group table driving the LP frontier: per group i,
// mass_y1[i] = P(y=1, c=i) and mass[i] = P(c=i).
struct JointTable {
    std::vector<double> mass_y1;
    std::vector<double> mass;

    void validate() const {
        if (mass.size() < 2 || mass.size() != mass_y1.size())
            throw DataError("joint table: need matching per-group masses, K >= 2");
        double total = 0.0;
        for (std::size_t i = 0; i < mass.size(); ++i) {
            if (!(mass[i] > 0.0)) throw DataError("joint table: group mass must be positive");
            if (mass_y1[i] < -1e-12 || mass_y1[i] > mass[i] + 1e-12)
                throw DataError("joint table: P(y=1,c=i) outside [0, P(c=i)]");
            total += mass[i];
        }
        if (std::abs(total - 1.0) > 1e-9) throw DataError("joint table: masses must sum to 1");
    }

    std::vector<double> rates() const {
        std::vector<double> r(mass.size());
        for (std::size_t i = 0; i < mass.size(); ++i) r[i] = mass_y1[i] / mass[i];
        return r;
    }
};

struct FrontierSpec {
    double delta_data = 0.0;      // parity of the true labels on the test split
    double baseline = 0.0;        // majority-class accuracy to subtract
    JointTable joint;             // drives the LP normalizer
    std::size_t grid_points = 200;

    void validate() const {
        if (delta_data < 0.0 || delta_data > 1.0)
            throw DataError("frontier spec: delta_data outside [0,1]");
        if (baseline < 0.0 || baseline > 1.0)
            throw DataError("frontier spec: baseline outside [0,1]");
        if (grid_points < 2) throw DataError("frontier spec: need at least 2 grid points");
        joint.validate();
    }
};

// ---------------------------------------------------------------------------
// Pareto filtering.

// Keeps points with parity <= delta_data that no other point dominates
// (dominator: parity <= and accuracy >=, at least one strict). Exact
// duplicates collapse to the first in input order. Result sorted by
// parity then accuracy, both ascending.
inline std::vector<TradeoffPoint> pareto_front(const std::vector<TradeoffPoint>& points,
                                               double delta_data) {
    if (points.empty()) throw DataError("pareto_front: no points");
    std::vector<TradeoffPoint> kept;
    for (std::size_t i = 0; i < points.size(); ++i) {
        points[i].validate();
        if (points[i].parity > delta_data) continue;
        bool drop = false;
        for (std::size_t j = 0; j < points.size() && !drop; ++j) {
            if (j == i || points[j].parity > delta_data) continue;
            const bool le = points[j].parity <= points[i].parity;
            const bool ge = points[j].accuracy >= points[i].accuracy;
            const bool strict =
                points[j].parity < points[i].parity || points[j].accuracy > points[i].accuracy;
            if (le && ge && strict) drop = true;
            // duplicate tie-break: only the earliest copy survives
            if (j < i && points[j].parity == points[i].parity &&
                points[j].accuracy == points[i].accuracy)
                drop = true;
        }
        if (!drop) kept.push_back(points[i]);
    }
    std::sort(kept.begin(), kept.end(), [](const TradeoffPoint& a, const TradeoffPoint& b) {
        if (a.parity != b.parity) return a.parity < b.parity;
        return a.accuracy < b.accuracy;
    });
    return kept;
}

// ---------------------------------------------------------------------------
// LP frontier: minimal label mass to flip so every pairwise selection-rate
// gap is at most delta.

// The optimal target rates project each group rate onto a shared window
// [a, a+delta]; total cost sum_i mass_i * dist(rate_i, window) is piecewise
// linear in a, so the minimum sits at a breakpoint {rate_i, rate_i - delta}.
inline double lp_frontier(const JointTable& joint, double delta) {
    joint.validate();
    if (delta < 0.0 || delta > 1.0) throw DataError("lp_frontier: delta outside [0,1]");
    const std::vector<double> r = joint.rates();
    auto cost_at = [&](double a) {
        double cost = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double t = std::min(std::max(r[i], a), a + delta);
            cost += joint.mass[i] * std::abs(r[i] - t);
        }
        return cost;
    };
    double best = cost_at(r[0]);
    for (double ri : r) {
        best = std::min(best, cost_at(ri));
        best = std::min(best, cost_at(ri - delta));
    }
    return best;
}

// ---------------------------------------------------------------------------
// AOPAC: baseline-subtracted area under the left-step accuracy bars,
// normalized by the same area under the LP-optimal frontier.

struct AopacResult {
    double raw_area = 0.0;
    double normalized_area = 0.0;
    std::vector<TradeoffPoint> pareto_points;
    std::size_t discarded = 0;
};

namespace detail {

// Left-step integral of max(acc - baseline, 0) over [p_1, delta_data].
inline double step_area(const std::vector<double>& parity, const std::vector<double>& acc,
                        double baseline, double delta_data) {
    double area = 0.0;
    for (std::size_t k = 0; k < parity.size(); ++k) {
        const double right = k + 1 < parity.size() ? std::min(parity[k + 1], delta_data)
                                                   : delta_data;
        const double width = right - parity[k];
        if (width <= 0.0) continue;
        area += width * std::max(acc[k] - baseline, 0.0);
    }
    return area;
}

}  // namespace detail

inline AopacResult aopac(const std::vector<TradeoffPoint>& points, const FrontierSpec& spec) {
    spec.validate();
    AopacResult out;
    if (points.empty()) return out;
    out.pareto_points = pareto_front(points, spec.delta_data);
    out.discarded = points.size() - out.pareto_points.size();
    if (out.pareto_points.empty()) return out;

    std::vector<double> parity, acc;
    for (const TradeoffPoint& pt : out.pareto_points) {
        parity.push_back(pt.parity);
        acc.push_back(pt.accuracy);
    }
    out.raw_area = detail::step_area(parity, acc, spec.baseline, spec.delta_data);

    // LP-optimal accuracy curve acc*(d) = 1 - lp_frontier(d), sampled on a
    // uniform grid over [0, delta_data]
    std::vector<double> gp(spec.grid_points), ga(spec.grid_points);
    for (std::size_t j = 0; j < spec.grid_points; ++j) {
        gp[j] = spec.delta_data * static_cast<double>(j) /
                static_cast<double>(spec.grid_points - 1);
        ga[j] = 1.0 - lp_frontier(spec.joint, gp[j]);
    }
    const double normalizer = detail::step_area(gp, ga, spec.baseline, spec.delta_data);
    out.normalized_area = normalizer > 0.0 ? out.raw_area / normalizer : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Serialization: frontier CSV in, AOPAC JSON out.

inline nlohmann::json aopac_to_json(const AopacResult& r) {
    nlohmann::json pts = nlohmann::json::array();
    for (const TradeoffPoint& pt : r.pareto_points)
        pts.push_back({{"beta", pt.beta},
                       {"accuracy", pt.accuracy},
                       {"parity", pt.parity},
                       {"tag", pt.tag}});
    return {{"raw_area", r.raw_area},
            {"normalized_area", r.normalized_area},
            {"pareto_points", pts},
            {"discarded", r.discarded}};
}

}  // namespace fcrl
