#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fcrl/matrix.hpp"

namespace fcrl {

// Adam with bias correction. beta1/beta2/eps are the ubiquitous defaults.
struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Optimizer state for one group of parameter tensors. Moments are lazily
// sized on the first step; the step counter is shared across tensors.
class AdamState {
public:
    explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    long step_count() const { return step_; }

    // One update over a parallel list of parameter/gradient tensors.
    void step(std::vector<Matrix*> params, const std::vector<const Matrix*>& grads) {
        if (params.size() != grads.size())
            throw DimensionError("adam: parameter/gradient list size mismatch");
        if (m_.empty()) {
            for (const Matrix* p : params) {
                m_.emplace_back(p->rows(), p->cols());
                v_.emplace_back(p->rows(), p->cols());
            }
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t t = 0; t < params.size(); ++t) {
            Matrix& p = *params[t];
            const Matrix& g = *grads[t];
            p.require_same_shape(g, "adam step");
            p.require_same_shape(m_[t], "adam state");
            for (std::size_t k = 0; k < p.size(); ++k) {
                double gk = g.at_flat(k);
                double& mk = m_[t].at_flat(k);
                double& vk = v_[t].at_flat(k);
                mk = cfg_.beta1 * mk + (1.0 - cfg_.beta1) * gk;
                vk = cfg_.beta2 * vk + (1.0 - cfg_.beta2) * gk * gk;
                const double mhat = mk / bc1;
                const double vhat = vk / bc2;
                p.at_flat(k) -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    void step(Matrix& param, const Matrix& grad) {
        step({&param}, {&grad});
    }

    // Checkpoint support: expose and restore the moment accumulators so a
    // resumed run continues bit-exactly.
    const std::vector<Matrix>& first_moments() const { return m_; }
    const std::vector<Matrix>& second_moments() const { return v_; }
    void restore(std::vector<Matrix> m, std::vector<Matrix> v, long step) {
        m_ = std::move(m);
        v_ = std::move(v);
        step_ = step;
    }

private:
    AdamConfig cfg_;
    long step_ = 0;
    std::vector<Matrix> m_, v_;
};

}  // namespace fcrl
