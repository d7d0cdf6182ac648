#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "fcrl/dataset.hpp"
#include "fcrl/error.hpp"
#include "fcrl/eval.hpp"
#include "fcrl/model.hpp"
#include "fcrl/objective.hpp"
#include "fcrl/rng.hpp"

namespace fcrl {

// ---------------------------------------------------------------------------
// Lower-bound machinery: KL >= f(V) with V the L1 (variational) distance.

// f(V) = max( log((2+V)/(2-V)) - 2V/(2+V),  V^2/2 + V^4/36 + V^6/288 ),
// defined on [0, 2). Strictly increasing, convex, f(0) = 0.
inline double f_lower(double V) {
    if (!(V >= 0.0 && V < 2.0))
        throw DomainError("f_lower: argument must lie in [0, 2), got " + std::to_string(V));
    const double log_branch = std::log((2.0 + V) / (2.0 - V)) - 2.0 * V / (2.0 + V);
    const double V2 = V * V;
    const double poly_branch = V2 / 2.0 + V2 * V2 / 36.0 + V2 * V2 * V2 / 288.0;
    return std::max(log_branch, poly_branch);
}

// Binary-group parity bound: I(z:c) >= g(pi, dp) with
// g(pi, dp) = (1-pi) f(pi dp) + pi f((1-pi) dp).
inline double g_bound(double pi, double dp) {
    if (!(pi > 0.0 && pi < 1.0))
        throw DomainError("g_bound: prior must lie in (0, 1), got " + std::to_string(pi));
    if (!(dp >= 0.0 && dp <= 1.0))
        throw DomainError("g_bound: parity must lie in [0, 1], got " + std::to_string(dp));
    return (1.0 - pi) * f_lower(pi * dp) + pi * f_lower((1.0 - pi) * dp);
}

// Multi-group version: f(alpha * dp) with alpha the smallest group prior.
inline double multinomial_bound(const std::vector<double>& priors, double dp) {
    if (priors.size() < 2) throw DomainError("multinomial_bound: need K >= 2 groups");
    double sum = 0.0, alpha = 1.0;
    for (double p : priors) {
        if (!(p > 0.0)) throw DomainError("multinomial_bound: priors must be positive");
        sum += p;
        alpha = std::min(alpha, p);
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw DomainError("multinomial_bound: priors must sum to 1");
    if (!(dp >= 0.0 && dp <= 1.0))
        throw DomainError("multinomial_bound: parity must lie in [0, 1]");
    return f_lower(alpha * dp);
}

// Group-aware bound dispatch: exact g for two groups, the alpha bound
// otherwise.
inline double parity_bound(const std::vector<double>& priors, double dp) {
    if (priors.size() == 2) return g_bound(priors[1], dp);
    return multinomial_bound(priors, dp);
}

// ---------------------------------------------------------------------------
// Empirical upper estimate of I(z:c): rate - contrastive at unit weights,
// averaged over full-data passes with fresh reparameterization noise.

// Contrastive estimator over the whole split, computed group by group in
// O(M d) memory (no full score matrix). Matches the batch estimator's
// value when run on the same rows.
inline double contrastive_term_streamed(const ScorerParams& scorer, const Matrix& Z,
                                        const Matrix& X, const std::vector<int>& c) {
    if (Z.rows() != X.rows() || Z.rows() != c.size() || c.empty())
        throw DimensionError("contrastive_term_streamed: row mismatch or empty");
    const std::size_t n = c.size();
    const std::size_t d = Z.cols();
    const Matrix E = embed(scorer, X);
    const Matrix Zw = matmul(Z, transpose(scorer.Wz));
    int K = 0;
    for (int ci : c) K = std::max(K, ci + 1);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i)
            if (c[i] == k) rows.push_back(i);
        if (rows.size() < 2) continue;  // singleton terms are identically zero
        const double M = static_cast<double>(rows.size());
        for (std::size_t i : rows) {
            // a = Wc[k]^T e(x_i)
            Vector a(d, 0.0);
            for (std::size_t m2 = 0; m2 < d; ++m2)
                for (std::size_t kk = 0; kk < d; ++kk)
                    a[kk] += scorer.Wc[static_cast<std::size_t>(k)](m2, kk) * E(i, m2);
            double own = 0.0, sum = 0.0;
            for (std::size_t j : rows) {
                double dot = 0.0;
                for (std::size_t kk = 0; kk < d; ++kk) dot += Zw(j, kk) * a[kk];
                const double s = softplus(dot);
                sum += s;
                if (j == i) own = s;
            }
            if (!(own > 0.0) || !(sum > 0.0))
                throw NumericError("contrastive_term_streamed: non-positive score");
            acc += std::log(own) - std::log(sum / M);
        }
    }
    return acc / static_cast<double>(n);
}

struct MiEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n_passes = 0;
};

// Upper estimate of I(z:c) = I(z:x) - I(x:z|c) <= rate - contrastive,
// always at unit weights regardless of any training lambda.
inline MiEstimate mi_upper_estimate(const FcrlModel& model, const Dataset& ds,
                                    std::uint64_t seed, std::size_t n_passes = 4) {
    if (n_passes < 1) throw DomainError("mi_upper_estimate: need at least one pass");
    ds.validate();
    const EncodeResult enc = encode(model, ds.X);
    const double rate = rate_term(enc.mu, enc.sigma);
    std::vector<double> vals;
    for (std::size_t pass = 0; pass < n_passes; ++pass) {
        Rng rng(derive_seed(seed, 9000 + pass));
        const Matrix Z = reparameterize(enc.mu, enc.sigma, rng);
        vals.push_back(rate - contrastive_term_streamed(model.scorer, Z, ds.X, ds.c));
    }
    MiEstimate est;
    est.n_passes = n_passes;
    for (double v : vals) est.mean += v;
    est.mean /= static_cast<double>(n_passes);
    if (n_passes > 1) {
        double var = 0.0;
        for (double v : vals) var += (v - est.mean) * (v - est.mean);
        var /= static_cast<double>(n_passes - 1);
        est.stderr_ = std::sqrt(var / static_cast<double>(n_passes));
    }
    return est;
}

// Refit only the scorer on frozen encoder representations, maximizing the
// contrastive estimator. A tighter I(x:z|c) lower bound shrinks the MI
// upper estimate.
inline ScorerParams refit_scorer(const FcrlModel& model, const Dataset& ds, std::uint64_t seed,
                                 std::size_t epochs = 30, std::size_t batch_size = 128) {
    FcrlModel work = model;
    AdamState opt({.lr = 1e-3});
    const std::size_t n_scorer = 5 + work.dims.K;
    std::vector<std::size_t> order(ds.n());
    for (std::size_t e = 0; e < epochs; ++e) {
        Rng rng(derive_seed(seed, 7000 + e));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(order.size(), start + batch_size);
            if (stop - start < 2) continue;
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            Batch batch = gather_batch(ds, idx);
            // beta = lambda = 1: the scorer gradient is exactly the
            // negative contrastive gradient, so stepping maximizes it
            LossResult res = total_loss(work, batch, 1.0, 1.0, rng);
            auto ps = work.params();
            auto gs = static_cast<const FcrlModel&>(res.grads).params();
            std::vector<Matrix*> sp(ps.end() - static_cast<std::ptrdiff_t>(n_scorer), ps.end());
            std::vector<const Matrix*> sg(gs.end() - static_cast<std::ptrdiff_t>(n_scorer),
                                          gs.end());
            opt.step(sp, sg);
        }
    }
    return work.scorer;
}

inline MiEstimate mi_upper_estimate_refit(const FcrlModel& model, const Dataset& ds,
                                          std::uint64_t seed, std::size_t n_passes = 4,
                                          std::size_t refit_epochs = 30) {
    FcrlModel work = model;
    work.scorer = refit_scorer(model, ds, seed, refit_epochs);
    return mi_upper_estimate(work, ds, seed, n_passes);
}

// ---------------------------------------------------------------------------
// Bound check: measured parity vs the information the representation holds.

constexpr double kBoundSlackTolerance = -0.05;  // nats of estimator noise

struct BoundRow {
    std::string checkpoint;
    std::string probe;
    double dp = 0.0;
    double g_value = 0.0;
    double mi_upper = 0.0;
    double slack = 0.0;
    bool flagged = false;
};

struct BoundReport {
    std::vector<double> priors;   // train-split group priors
    MiEstimate estimate;          // trained-scorer estimate
    MiEstimate estimate_refit;    // refit-scorer estimate (tighter)
    std::vector<BoundRow> rows;
};

// For every probe spec: fit downstream probes, measure parity, compare
// g(pi, dp) against the (refit, tighter) MI upper estimate.
inline BoundReport bound_check(const FcrlModel& model, const Dataset& train, const Dataset& test,
                               const std::vector<ProbeSpec>& probes,
                               const std::string& checkpoint_name, std::uint64_t seed,
                               std::size_t n_passes = 4, std::size_t refit_epochs = 30) {
    if (probes.empty()) throw DomainError("bound_check: no probes given");
    BoundReport rep;
    rep.priors = train.group_priors();
    rep.estimate = mi_upper_estimate(model, train, seed, n_passes);
    rep.estimate_refit = mi_upper_estimate_refit(model, train, seed, n_passes, refit_epochs);
    const double mi = std::min(rep.estimate.mean, rep.estimate_refit.mean);
    for (const ProbeSpec& spec : probes) {
        const EvalResult r = evaluate(model, train, test, spec, Target::Label, seed);
        BoundRow row;
        row.checkpoint = checkpoint_name;
        row.probe = to_string(spec.kind) + "/" + to_string(spec.preprocess);
        row.dp = r.max_dp;
        row.g_value = parity_bound(rep.priors, r.max_dp);
        row.mi_upper = mi;
        row.slack = row.mi_upper - row.g_value;
        row.flagged = row.slack < kBoundSlackTolerance;
        rep.rows.push_back(row);
    }
    return rep;
}

inline void write_bound_csv(const std::vector<BoundRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f << "checkpoint,probe,delta_dp,g_value,mi_upper,slack,flag\n";
    for (const BoundRow& r : rows)
        f << r.checkpoint << "," << r.probe << "," << detail::format_double(r.dp) << ","
          << detail::format_double(r.g_value) << "," << detail::format_double(r.mi_upper) << ","
          << detail::format_double(r.slack) << "," << (r.flagged ? 1 : 0) << "\n";
}

}  // namespace fcrl
