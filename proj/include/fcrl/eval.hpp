#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "fcrl/adam.hpp"
#include "fcrl/dataset.hpp"
#include "fcrl/error.hpp"
#include "fcrl/matrix.hpp"
#include "fcrl/model.hpp"
#include "fcrl/rng.hpp"

namespace fcrl {

// ---------------------------------------------------------------------------
// Demographic parity gap.

// Max over group pairs of |selection rate_i - selection rate_j| where
// selection means prediction == 1.
inline double delta_dp(const std::vector<int>& predictions, const std::vector<int>& c) {
    if (predictions.size() != c.size() || c.empty())
        throw DimensionError("delta_dp: prediction/group length mismatch or empty");
    int K = 0;
    for (int ci : c) {
        if (ci < 0) throw DataError("delta_dp: negative group id");
        K = std::max(K, ci + 1);
    }
    std::vector<double> count(K, 0.0), selected(K, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        count[c[i]] += 1.0;
        selected[c[i]] += predictions[i] == 1 ? 1.0 : 0.0;
    }
    for (int k = 0; k < K; ++k)
        if (count[k] == 0.0) throw DataError("delta_dp: group " + std::to_string(k) + " is empty");
    double lo = 1.0, hi = 0.0;
    for (int k = 0; k < K; ++k) {
        const double rate = selected[k] / count[k];
        lo = std::min(lo, rate);
        hi = std::max(hi, rate);
    }
    return hi - lo;
}

// For multi-class predictions: worst gap over any predicted class treated
// as the "selected" outcome. Coincides with delta_dp for binary labels.
inline double delta_dp_multiclass(const std::vector<int>& predictions, const std::vector<int>& c,
                                  int n_classes) {
    double worst = 0.0;
    for (int m = 0; m < n_classes; ++m) {
        std::vector<int> sel(predictions.size());
        for (std::size_t i = 0; i < predictions.size(); ++i) sel[i] = predictions[i] == m ? 1 : 0;
        worst = std::max(worst, delta_dp(sel, c));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Probe classifiers: multinomial logistic regression and a one-hidden-
// layer MLP, both with a softmax output head.

enum class ProbeKind { LogReg, Mlp1 };
enum class Preprocess { None, StandardScale };
enum class Target { Label, Group };

inline std::string to_string(ProbeKind k) { return k == ProbeKind::LogReg ? "logreg" : "mlp1"; }
inline std::string to_string(Preprocess p) {
    return p == Preprocess::StandardScale ? "standard_scale" : "none";
}
inline std::string to_string(Target t) { return t == Target::Label ? "y" : "c"; }

struct ProbeSpec {
    ProbeKind kind = ProbeKind::LogReg;
    std::size_t hidden = 50;
    std::size_t max_epochs = 1000;
    std::size_t patience = 10;
    std::size_t seeds = 5;
    Preprocess preprocess = Preprocess::StandardScale;

    void validate() const {
        if (seeds < 1) throw DomainError("probe: seeds must be >= 1");
        if (patience < 1) throw DomainError("probe: patience must be >= 1");
        if (max_epochs < 1) throw DomainError("probe: max epochs must be >= 1");
        if (kind == ProbeKind::Mlp1 && hidden < 1)
            throw DomainError("probe: mlp hidden size must be >= 1");
    }
};

struct ProbeModel {
    bool has_hidden = false;
    Matrix W1, b1;  // hidden layer (mlp1 only)
    Matrix W2, b2;  // output layer, logits
    bool converged = true;

    Matrix logits(const Matrix& X) const {
        if (has_hidden) return affine(activation(Activation::Relu, affine(X, W1, b1)), W2, b2);
        return affine(X, W2, b2);
    }

    std::vector<int> predict(const Matrix& X) const {
        const Matrix L = logits(X);
        std::vector<int> out(L.rows());
        for (std::size_t i = 0; i < L.rows(); ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < L.cols(); ++j)
                if (L(i, j) > L(i, best)) best = j;
            out[i] = static_cast<int>(best);
        }
        return out;
    }
};

namespace detail {

// Mean cross-entropy of softmax(logits) against integer targets, with the
// logit gradient (P - onehot)/n written into *dlogits if non-null.
inline double softmax_xent(const Matrix& logits, const std::vector<int>& t,
                           const std::vector<std::size_t>& idx, Matrix* dlogits) {
    const std::size_t n = idx.size();
    const std::size_t C = logits.cols();
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = idx[r];
        double mx = logits(r, 0);
        for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, logits(r, j));
        double Zsum = 0.0;
        for (std::size_t j = 0; j < C; ++j) Zsum += std::exp(logits(r, j) - mx);
        const double logZ = mx + std::log(Zsum);
        loss += logZ - logits(r, static_cast<std::size_t>(t[i]));
        if (dlogits) {
            for (std::size_t j = 0; j < C; ++j) {
                double p = std::exp(logits(r, j) - logZ);
                if (j == static_cast<std::size_t>(t[i])) p -= 1.0;
                (*dlogits)(r, j) = p / static_cast<double>(n);
            }
        }
    }
    return loss / static_cast<double>(n);
}

inline Matrix gather_rows(const Matrix& X, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), X.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < X.cols(); ++j) out(r, j) = X(idx[r], j);
    return out;
}

// One forward/backward pass over the rows `idx`; applies an Adam step.
// Returns the pre-step loss.
inline double probe_step(ProbeModel& pm, AdamState& opt, const Matrix& X,
                         const std::vector<int>& t, const std::vector<std::size_t>& idx) {
    const Matrix Xb = gather_rows(X, idx);
    Matrix H, A;
    if (pm.has_hidden) {
        H = affine(Xb, pm.W1, pm.b1);
        A = activation(Activation::Relu, H);
    }
    const Matrix& inp = pm.has_hidden ? A : Xb;
    const Matrix L = affine(inp, pm.W2, pm.b2);
    Matrix dL(L.rows(), L.cols());
    const double loss = softmax_xent(L, t, idx, &dL);

    Matrix dW2 = matmul(transpose(inp), dL);
    Matrix db2(1, pm.b2.cols());
    for (std::size_t r = 0; r < dL.rows(); ++r)
        for (std::size_t j = 0; j < dL.cols(); ++j) db2(0, j) += dL(r, j);
    if (!pm.has_hidden) {
        opt.step({&pm.W2, &pm.b2}, {&dW2, &db2});
        return loss;
    }
    Matrix dA = matmul(dL, transpose(pm.W2));
    for (std::size_t k = 0; k < dA.size(); ++k)
        if (H.at_flat(k) <= 0.0) dA.at_flat(k) = 0.0;
    Matrix dW1 = matmul(transpose(Xb), dA);
    Matrix db1(1, pm.b1.cols());
    for (std::size_t r = 0; r < dA.rows(); ++r)
        for (std::size_t j = 0; j < dA.cols(); ++j) db1(0, j) += dA(r, j);
    opt.step({&pm.W1, &pm.b1, &pm.W2, &pm.b2}, {&dW1, &db1, &dW2, &db2});
    return loss;
}

inline double eval_loss(const ProbeModel& pm, const Matrix& X, const std::vector<int>& t,
                        const std::vector<std::size_t>& idx) {
    const Matrix Xb = gather_rows(X, idx);
    return softmax_xent(pm.logits(Xb), t, idx, nullptr);
}

}  // namespace detail

// Fit a probe on (Z, targets). LogReg: full-batch optimization from a zero
// start until the loss plateaus. Mlp1: mini-batch Adam with early stopping
// on a 20% validation split carved from a seeded shuffle of the rows.
inline ProbeModel fit_probe(const Matrix& Z, const std::vector<int>& targets,
                            const ProbeSpec& spec, int n_classes, std::uint64_t seed) {
    spec.validate();
    if (Z.rows() != targets.size() || Z.rows() == 0)
        throw DimensionError("fit_probe: row/target mismatch or empty input");
    if (n_classes < 2) throw DomainError("fit_probe: need at least 2 classes");
    for (int t : targets)
        if (t < 0 || t >= n_classes) throw DataError("fit_probe: target out of range");

    const std::size_t C = static_cast<std::size_t>(n_classes);
    ProbeModel pm;
    Rng rng(derive_seed(seed, 77));

    if (spec.kind == ProbeKind::LogReg) {
        pm.has_hidden = false;
        pm.W2 = Matrix(Z.cols(), C);
        pm.b2 = Matrix(1, C);
        AdamState opt({.lr = 0.1});
        std::vector<std::size_t> all(Z.rows());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        double prev = std::numeric_limits<double>::infinity();
        pm.converged = false;
        for (std::size_t e = 0; e < spec.max_epochs; ++e) {
            const double loss = detail::probe_step(pm, opt, Z, targets, all);
            if (std::abs(prev - loss) < 1e-8) {
                pm.converged = true;
                break;
            }
            prev = loss;
        }
        return pm;
    }

    // mlp1
    pm.has_hidden = true;
    pm.W1 = detail::glorot(Z.cols(), spec.hidden, rng);
    pm.b1 = Matrix(1, spec.hidden);
    pm.W2 = detail::glorot(spec.hidden, C, rng);
    pm.b2 = Matrix(1, C);
    AdamState opt({.lr = 1e-3});

    std::vector<std::size_t> order(Z.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t n_val = std::max<std::size_t>(1, order.size() / 5);
    std::vector<std::size_t> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
    std::vector<std::size_t> tr(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
    if (tr.empty()) throw DataError("fit_probe: too few rows for a validation split");

    const std::size_t batch = 64;
    double best_val = std::numeric_limits<double>::infinity();
    ProbeModel best = pm;
    std::size_t since_best = 0;
    pm.converged = false;
    for (std::size_t e = 0; e < spec.max_epochs; ++e) {
        rng.shuffle(tr);
        for (std::size_t start = 0; start < tr.size(); start += batch) {
            const std::size_t stop = std::min(tr.size(), start + batch);
            std::vector<std::size_t> idx(tr.begin() + static_cast<std::ptrdiff_t>(start),
                                         tr.begin() + static_cast<std::ptrdiff_t>(stop));
            detail::probe_step(pm, opt, Z, targets, idx);
        }
        const double vloss = detail::eval_loss(pm, Z, targets, val);
        if (vloss < best_val - 1e-12) {
            best_val = vloss;
            best = pm;
            best.converged = true;
            since_best = 0;
        } else if (++since_best >= spec.patience) {
            return best;
        }
    }
    // ran out of epochs: best-so-far with the warning flag cleared only if
    // the final epoch was still improving
    best.converged = since_best == 0;
    return best;
}

// ---------------------------------------------------------------------------
// Evaluation protocol: scale with train-only statistics, fit `seeds`
// probes, aggregate mean accuracy and worst-case parity on the test split.

struct SeedOutcome {
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double dp = 0.0;
    bool converged = true;
};

struct EvalResult {
    double mean_accuracy = 0.0;
    double max_dp = 0.0;
    std::vector<SeedOutcome> per_seed;
    ProbeSpec spec;
    Target target = Target::Label;
};

inline double accuracy_of(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw DimensionError("accuracy: length mismatch or empty");
    double hits = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
    return hits / static_cast<double>(pred.size());
}

// Core protocol over precomputed representations. Test rows never reach
// probe fitting; they only enter the final metrics.
inline EvalResult evaluate_representations(const Matrix& Ztrain, const std::vector<int>& t_train,
                                           const Matrix& Ztest, const std::vector<int>& t_test,
                                           const std::vector<int>& c_test, const ProbeSpec& spec,
                                           Target target, int n_classes,
                                           std::uint64_t seed = 0) {
    spec.validate();
    Matrix tr = Ztrain, te = Ztest;
    if (spec.preprocess == Preprocess::StandardScale) {
        const Scaler sc = fit_scaler(Ztrain);
        tr = sc.apply(Ztrain);
        te = sc.apply(Ztest);
    }
    EvalResult out;
    out.spec = spec;
    out.target = target;
    double acc_sum = 0.0;
    for (std::size_t s = 0; s < spec.seeds; ++s) {
        SeedOutcome so;
        so.seed = derive_seed(seed, 500 + s);
        ProbeModel pm;
        try {
            pm = fit_probe(tr, t_train, spec, n_classes, so.seed);
        } catch (const std::exception& e) {
            throw DataError("probe fit failed at seed index " + std::to_string(s) + ": " +
                            e.what());
        }
        const std::vector<int> pred = pm.predict(te);
        so.accuracy = accuracy_of(pred, t_test);
        so.dp = n_classes == 2 ? delta_dp(pred, c_test)
                               : delta_dp_multiclass(pred, c_test, n_classes);
        so.converged = pm.converged;
        acc_sum += so.accuracy;
        out.max_dp = std::max(out.max_dp, so.dp);
        out.per_seed.push_back(so);
    }
    out.mean_accuracy = acc_sum / static_cast<double>(spec.seeds);
    return out;
}

// Encoder-backed evaluation: representations are the encoder means.
inline EvalResult evaluate(const FcrlModel& model, const Dataset& train, const Dataset& test,
                           const ProbeSpec& spec, Target target, std::uint64_t seed = 0) {
    const Matrix Ztr = encode_mean(model, train.X);
    const Matrix Zte = encode_mean(model, test.X);
    const std::vector<int>& t_tr = target == Target::Label ? train.y : train.c;
    const std::vector<int>& t_te = target == Target::Label ? test.y : test.c;
    const int n_classes = target == Target::Label ? 2 : train.K;
    return evaluate_representations(Ztr, t_tr, Zte, t_te, test.c, spec, target, n_classes, seed);
}

// Raw-feature baseline: probes on X directly, no encoder.
inline EvalResult evaluate_raw(const Dataset& train, const Dataset& test, const ProbeSpec& spec,
                               Target target, std::uint64_t seed = 0) {
    const std::vector<int>& t_tr = target == Target::Label ? train.y : train.c;
    const std::vector<int>& t_te = target == Target::Label ? test.y : test.c;
    const int n_classes = target == Target::Label ? 2 : train.K;
    return evaluate_representations(train.X, t_tr, test.X, t_te, test.c, spec, target, n_classes,
                                    seed);
}

// ---------------------------------------------------------------------------
// Leakage probe: can c be read out of z, with and without scaling?

struct LeakageReport {
    EvalResult unscaled;
    EvalResult scaled;
    double majority_baseline = 0.0;  // most frequent group's test share
};

inline LeakageReport leakage_probe(const FcrlModel& model, const Dataset& train,
                                   const Dataset& test, ProbeSpec spec, std::uint64_t seed = 0) {
    LeakageReport rep;
    spec.preprocess = Preprocess::None;
    rep.unscaled = evaluate(model, train, test, spec, Target::Group, seed);
    spec.preprocess = Preprocess::StandardScale;
    rep.scaled = evaluate(model, train, test, spec, Target::Group, seed);
    std::vector<double> share(train.K, 0.0);
    for (int ci : test.c) share[ci] += 1.0;
    for (double& v : share) v /= static_cast<double>(test.c.size());
    rep.majority_baseline = *std::max_element(share.begin(), share.end());
    return rep;
}

// ---------------------------------------------------------------------------
// Results CSV: one row per (target, probe, preprocess, seed), plus an
// aggregate row per result flagged in the last column.

inline void append_results_rows(std::ostream& f, const std::string& checkpoint,
                                const EvalResult& r) {
    const std::string head = checkpoint + "," + to_string(r.target) + "," +
                             to_string(r.spec.kind) + "," + to_string(r.spec.preprocess) + ",";
    for (const SeedOutcome& so : r.per_seed)
        f << head << so.seed << "," << detail::format_double(so.accuracy) << ","
          << detail::format_double(so.dp) << ",0\n";
    f << head << "aggregate," << detail::format_double(r.mean_accuracy) << ","
      << detail::format_double(r.max_dp) << ",1\n";
}

inline void write_results_csv(const std::vector<std::pair<std::string, EvalResult>>& results,
                              const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f << "checkpoint,target,probe,preprocess,seed,accuracy,delta_dp,aggregate\n";
    for (const auto& [ckpt, r] : results) append_results_rows(f, ckpt, r);
}

}  // namespace fcrl
