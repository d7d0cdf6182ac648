#pragma once

#include <cmath>
#include <vector>

#include "fcrl/dataset.hpp"
#include "fcrl/error.hpp"
#include "fcrl/matrix.hpp"
#include "fcrl/model.hpp"
#include "fcrl/rng.hpp"

namespace fcrl {

// One batch of training data.
struct Batch {
    Matrix X;
    std::vector<int> y;
    std::vector<int> c;
    std::size_t size() const { return y.size(); }
};

inline Batch gather_batch(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Batch b;
    b.X = Matrix(idx.size(), ds.p());
    b.y.resize(idx.size());
    b.c.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < ds.p(); ++j) b.X(i, j) = ds.X(idx[i], j);
        b.y[i] = ds.y[idx[i]];
        b.c[i] = ds.c[idx[i]];
    }
    return b;
}

// All three terms are reported positive-oriented (label/rate/contrastive
// in nats); `total` carries the minimization sign convention
// total = label + beta*rate - beta*lambda*contrastive.
struct LossBreakdown {
    double label_loss = 0.0;
    double rate = 0.0;
    double contrastive = 0.0;
    double total = 0.0;
    double beta = 0.0;
    double lambda = 1.0;
};

// Mean binary cross-entropy in nats. Probabilities must already be
// clamped into (0,1).
inline double label_loss(const Vector& probs, const std::vector<int>& y) {
    if (probs.size() != y.size() || probs.empty())
        throw DimensionError("label_loss: length mismatch or empty");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(probs[i] > 0.0 && probs[i] < 1.0))
            throw DomainError("label_loss: probability outside (0,1)");
        acc -= y[i] ? std::log(probs[i]) : std::log(1.0 - probs[i]);
    }
    return acc / static_cast<double>(y.size());
}

// Mean KL(q(z|x) || N(0, I)) in closed form:
//   1/2 sum_k (mu_k^2 + sigma_k^2 - 1 - 2 log sigma_k)
inline double rate_term(const Matrix& mu, const Matrix& sigma) {
    mu.require_same_shape(sigma, "rate_term");
    double acc = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const double m = mu.at_flat(k), s = sigma.at_flat(k);
        if (!(s > 0.0)) throw DomainError("rate_term: sigma must be positive");
        acc += 0.5 * (m * m + s * s - 1.0 - 2.0 * std::log(s));
    }
    return acc / static_cast<double>(mu.rows());
}

// InfoNCE-style conditional bound from an exp-score matrix S(j,i) =
// exp{f(z_j, x_i, c_i)}: for each i the negatives are the same-group
// samples (i included), so the per-sample bound never exceeds log M.
inline double contrastive_term_from_scores(const Matrix& S, const std::vector<int>& c) {
    if (S.rows() != S.cols() || S.rows() != c.size() || c.empty())
        throw DimensionError("contrastive_term: bad score matrix");
    const std::size_t B = c.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        double denom = 0.0;
        std::size_t m = 0;
        for (std::size_t j = 0; j < B; ++j) {
            if (c[j] != c[i]) continue;
            denom += S(j, i);
            ++m;
        }
        acc += std::log(S(i, i)) - std::log(denom / static_cast<double>(m));
    }
    return acc / static_cast<double>(B);
}

inline double contrastive_term(const ScorerParams& scorer, const Matrix& Z, const Matrix& X,
                               const std::vector<int>& c) {
    return contrastive_term_from_scores(exp_score_matrix(scorer, Z, X, c), c);
}

// ---------------------------------------------------------------------------
// Full training loss with analytic gradients (manual backprop).

struct LossResult {
    LossBreakdown breakdown;
    FcrlModel grads;  // same shapes as the model, gradient of `total`
};

namespace detail {

inline void add_outer(Matrix& dW, const Matrix& A, const Matrix& dB) {
    // dW += A^T dB
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t k = 0; k < A.cols(); ++k) {
            const double a = A(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < dB.cols(); ++j) dW(k, j) += a * dB(i, j);
        }
}

inline void add_colsum(Matrix& db, const Matrix& dB) {
    for (std::size_t i = 0; i < dB.rows(); ++i)
        for (std::size_t j = 0; j < dB.cols(); ++j) db(0, j) += dB(i, j);
}

}  // namespace detail

// Loss and gradients for a fixed reparameterization noise matrix. Keeping
// eps explicit makes the whole map differentiable in the parameters,
// which the finite-difference oracle relies on.
inline LossResult total_loss_with_eps(const FcrlModel& model, const Batch& batch, double beta,
                                      double lambda, const Matrix& eps) {
    if (!(beta >= 0.0)) throw DomainError("total_loss: beta must be >= 0");
    if (!(lambda > 0.0)) throw DomainError("total_loss: lambda must be > 0");
    const std::size_t B = batch.size();
    if (B == 0) throw DimensionError("total_loss: empty batch");
    const auto& dims = model.dims;
    if (eps.rows() != B || eps.cols() != dims.d)
        throw DimensionError("total_loss: eps shape " + eps.shape_str());

    // ---- forward, keeping caches
    const Matrix H1pre = affine(batch.X, model.enc.W1, model.enc.b1);
    const Matrix H1 = activation(Activation::Relu, H1pre);
    const Matrix Mu = affine(H1, model.enc.Wm, model.enc.bm);
    const Matrix Ls = affine(H1, model.enc.Ws, model.enc.bs);
    Matrix Sig(B, dims.d);
    Matrix sig_unclamped(B, dims.d);  // 1 where exp(ls) inside the clamp band
    for (std::size_t k = 0; k < Ls.size(); ++k) {
        const double raw = std::exp(Ls.at_flat(k));
        const double cl = std::min(kSigmaCeil, std::max(kSigmaFloor, raw));
        Sig.at_flat(k) = cl;
        sig_unclamped.at_flat(k) = (raw > kSigmaFloor && raw < kSigmaCeil) ? 1.0 : 0.0;
    }
    Matrix Z = Mu;
    for (std::size_t k = 0; k < Z.size(); ++k) Z.at_flat(k) += eps.at_flat(k) * Sig.at_flat(k);

    // predictor
    const std::size_t pin_cols = model.predictor_input();
    Matrix Pin(B, pin_cols);
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < dims.d; ++j) Pin(i, j) = Z(i, j);
        if (model.objective == Objective::O2) {
            const int ci = batch.c[i];
            if (ci < 0 || static_cast<std::size_t>(ci) >= dims.K)
                throw DimensionError("total_loss: group id out of range");
            Pin(i, dims.d + static_cast<std::size_t>(ci)) = 1.0;
        }
    }
    const Matrix H2pre = affine(Pin, model.pred.W1, model.pred.b1);
    const Matrix H2 = activation(Activation::Relu, H2pre);
    const Matrix logits = affine(H2, model.pred.W2, model.pred.b2);

    double lab = 0.0;
    Matrix dlogits(B, 1);
    for (std::size_t i = 0; i < B; ++i) {
        const double praw = sigmoid(logits(i, 0));
        const double p = std::min(1.0 - kProbClamp, std::max(kProbClamp, praw));
        lab -= batch.y[i] ? std::log(p) : std::log(1.0 - p);
        const bool clamped = praw <= kProbClamp || praw >= 1.0 - kProbClamp;
        dlogits(i, 0) = clamped ? 0.0 : (p - static_cast<double>(batch.y[i])) /
                                            static_cast<double>(B);
    }
    lab /= static_cast<double>(B);

    const double rate = rate_term(Mu, Sig);

    // scorer forward
    const Matrix HEpre = affine(batch.X, model.scorer.We1, model.scorer.be1);
    const Matrix HE = activation(Activation::Relu, HEpre);
    const Matrix E = affine(HE, model.scorer.We2, model.scorer.be2);
    const Matrix Zw = matmul(Z, transpose(model.scorer.Wz));
    Matrix A(B, dims.d);
    for (std::size_t i = 0; i < B; ++i) {
        const auto& Wc = model.scorer.Wc[static_cast<std::size_t>(batch.c[i])];
        for (std::size_t m2 = 0; m2 < dims.d; ++m2) {
            const double e = E(i, m2);
            if (e == 0.0) continue;
            for (std::size_t k = 0; k < dims.d; ++k) A(i, k) += Wc(m2, k) * e;
        }
    }
    // scores within groups; S holds exp{f} = softplus(s), Sdot sigmoid(s)
    Matrix S(B, B), Sdot(B, B);
    std::vector<double> denom(B, 0.0);
    std::vector<std::size_t> group_size(B, 0);
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < B; ++j) {
            if (batch.c[j] != batch.c[i]) continue;
            double dot = 0.0;
            for (std::size_t k = 0; k < dims.d; ++k) dot += Zw(j, k) * A(i, k);
            S(j, i) = softplus(dot);
            Sdot(j, i) = sigmoid(dot);
            denom[i] += S(j, i);
            ++group_size[i];
        }
    }
    double contr = 0.0;
    for (std::size_t i = 0; i < B; ++i)
        contr += std::log(S(i, i)) - std::log(denom[i] / static_cast<double>(group_size[i]));
    contr /= static_cast<double>(B);

    LossResult out;
    out.breakdown = {lab, rate, contr, lab + beta * rate - beta * lambda * contr, beta, lambda};
    if (!std::isfinite(out.breakdown.total)) {
        std::string term = !std::isfinite(lab)    ? "label"
                           : !std::isfinite(rate) ? "rate"
                                                  : "contrastive";
        throw NumericError("total_loss: non-finite " + term + " term");
    }
    out.grads = model.zeros_like();
    FcrlModel& g = out.grads;

    // ---- backward: predictor path
    Matrix dH2 = matmul(dlogits, transpose(model.pred.W2));
    for (std::size_t k = 0; k < dH2.size(); ++k)
        if (H2pre.at_flat(k) <= 0.0) dH2.at_flat(k) = 0.0;
    detail::add_outer(g.pred.W2, H2, dlogits);
    detail::add_colsum(g.pred.b2, dlogits);
    detail::add_outer(g.pred.W1, Pin, dH2);
    detail::add_colsum(g.pred.b1, dH2);
    const Matrix dPin = matmul(dH2, transpose(model.pred.W1));
    Matrix dZ(B, dims.d);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < dims.d; ++j) dZ(i, j) = dPin(i, j);

    // ---- backward: contrastive path (scaled by -beta*lambda)
    const double cscale = -beta * lambda / static_cast<double>(B);
    Matrix G(B, B);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < B; ++j) {
            if (batch.c[j] != batch.c[i]) continue;
            const double dlog = (j == i ? 1.0 / S(i, i) : 0.0) - 1.0 / denom[i];
            G(j, i) = cscale * dlog * Sdot(j, i);
        }
    const Matrix dZw = matmul(G, A);
    Matrix dA = matmul(transpose(G), Zw);
    dZ += matmul(dZw, model.scorer.Wz);
    detail::add_outer(g.scorer.Wz, dZw, Z);  // dWz = dZw^T Z
    Matrix dE(B, dims.d);
    for (std::size_t i = 0; i < B; ++i) {
        const std::size_t ci = static_cast<std::size_t>(batch.c[i]);
        const auto& Wc = model.scorer.Wc[ci];
        Matrix& dWc = g.scorer.Wc[ci];
        for (std::size_t m2 = 0; m2 < dims.d; ++m2) {
            double acc = 0.0;
            for (std::size_t k = 0; k < dims.d; ++k) {
                dWc(m2, k) += E(i, m2) * dA(i, k);
                acc += Wc(m2, k) * dA(i, k);
            }
            dE(i, m2) = acc;
        }
    }
    Matrix dHE = matmul(dE, transpose(model.scorer.We2));
    for (std::size_t k = 0; k < dHE.size(); ++k)
        if (HEpre.at_flat(k) <= 0.0) dHE.at_flat(k) = 0.0;
    detail::add_outer(g.scorer.We2, HE, dE);
    detail::add_colsum(g.scorer.be2, dE);
    detail::add_outer(g.scorer.We1, batch.X, dHE);
    detail::add_colsum(g.scorer.be1, dHE);

    // ---- backward: rate term and reparameterization
    Matrix dMu = dZ;
    Matrix dLs(B, dims.d);
    const double rscale = beta / static_cast<double>(B);
    for (std::size_t k = 0; k < dMu.size(); ++k) {
        const double s = Sig.at_flat(k);
        dMu.at_flat(k) += rscale * Mu.at_flat(k);
        double ds = dZ.at_flat(k) * eps.at_flat(k) + rscale * (s - 1.0 / s);
        dLs.at_flat(k) = ds * s * sig_unclamped.at_flat(k);
    }
    Matrix dH1 = matmul(dMu, transpose(model.enc.Wm));
    dH1 += matmul(dLs, transpose(model.enc.Ws));
    for (std::size_t k = 0; k < dH1.size(); ++k)
        if (H1pre.at_flat(k) <= 0.0) dH1.at_flat(k) = 0.0;
    detail::add_outer(g.enc.Wm, H1, dMu);
    detail::add_colsum(g.enc.bm, dMu);
    detail::add_outer(g.enc.Ws, H1, dLs);
    detail::add_colsum(g.enc.bs, dLs);
    detail::add_outer(g.enc.W1, batch.X, dH1);
    detail::add_colsum(g.enc.b1, dH1);
    return out;
}

// Draws fresh reparameterization noise from rng, then defers to the
// fixed-eps version.
inline LossResult total_loss(const FcrlModel& model, const Batch& batch, double beta,
                             double lambda, Rng& rng) {
    const Matrix eps = rng.normal_matrix(batch.size(), model.dims.d);
    return total_loss_with_eps(model, batch, beta, lambda, eps);
}

}  // namespace fcrl
