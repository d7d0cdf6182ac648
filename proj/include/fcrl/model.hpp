#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fcrl/error.hpp"
#include "fcrl/matrix.hpp"
#include "fcrl/rng.hpp"

namespace fcrl {

// Which information objective the predictor follows: O1 conditions the
// label predictor on z only, O2 additionally feeds one-hot(c).
enum class Objective { O1, O2 };

inline std::string to_string(Objective o) { return o == Objective::O1 ? "O1" : "O2"; }
inline Objective objective_from_string(const std::string& s) {
    if (s == "O1") return Objective::O1;
    if (s == "O2") return Objective::O2;
    throw DataError("unknown objective flag: " + s);
}

struct Dims {
    std::size_t p = 0;            // input features
    std::size_t d = 8;            // representation size
    std::size_t h = 50;           // encoder / embedding hidden width
    std::size_t K = 2;            // number of protected groups
    std::size_t pred_hidden = 50; // predictor hidden width

    bool operator==(const Dims&) const = default;
};

constexpr double kSigmaFloor = 1e-4;
constexpr double kSigmaCeil = 1e4;
constexpr double kProbClamp = 1e-7;

// Gaussian encoder: shared hidden layer, mean head, log-std head.
struct EncoderParams {
    Matrix W1, b1;  // p -> h
    Matrix Wm, bm;  // h -> d (mean)
    Matrix Ws, bs;  // h -> d (log std)
};

// Label predictor: (d [+K]) -> pred_hidden -> 1, sigmoid output.
struct PredictorParams {
    Matrix W1, b1;
    Matrix W2, b2;
};

// Contrastive scorer: embedding e(x) plus the bilinear form
// exp{f(z,x,c)} = softplus((Wz z)^T Wc[c]^T e(x)).
struct ScorerParams {
    Matrix We1, be1;  // p -> h
    Matrix We2, be2;  // h -> d
    Matrix Wz;        // d x d
    std::vector<Matrix> Wc;  // one d x d matrix per group
};

struct FcrlModel {
    Dims dims;
    Objective objective = Objective::O2;
    EncoderParams enc;
    PredictorParams pred;
    ScorerParams scorer;

    std::size_t predictor_input() const {
        return dims.d + (objective == Objective::O2 ? dims.K : 0);
    }

    // Fixed parameter order; everything that iterates parameters (Adam,
    // serialization, gradient packing) relies on it.
    std::vector<const Matrix*> params() const {
        std::vector<const Matrix*> out = {&enc.W1,  &enc.b1,  &enc.Wm,  &enc.bm, &enc.Ws,
                                          &enc.bs,  &pred.W1, &pred.b1, &pred.W2, &pred.b2,
                                          &scorer.We1, &scorer.be1, &scorer.We2, &scorer.be2,
                                          &scorer.Wz};
        for (const Matrix& w : scorer.Wc) out.push_back(&w);
        return out;
    }
    std::vector<Matrix*> params() {
        auto cp = static_cast<const FcrlModel*>(this)->params();
        std::vector<Matrix*> out;
        out.reserve(cp.size());
        for (const Matrix* m : cp) out.push_back(const_cast<Matrix*>(m));
        return out;
    }

    static std::vector<std::string> param_names(std::size_t K) {
        std::vector<std::string> out = {"enc.W1",  "enc.b1",  "enc.Wm",  "enc.bm", "enc.Ws",
                                        "enc.bs",  "pred.W1", "pred.b1", "pred.W2", "pred.b2",
                                        "scorer.We1", "scorer.be1", "scorer.We2", "scorer.be2",
                                        "scorer.Wz"};
        for (std::size_t k = 0; k < K; ++k) out.push_back("scorer.Wc" + std::to_string(k));
        return out;
    }

    FcrlModel zeros_like() const {
        FcrlModel g = *this;
        for (Matrix* m : g.params()) m->fill(0.0);
        return g;
    }

    std::vector<double> pack() const {
        std::vector<double> flat;
        for (const Matrix* m : params())
            flat.insert(flat.end(), m->data().begin(), m->data().end());
        return flat;
    }
    void unpack(const std::vector<double>& flat) {
        std::size_t off = 0;
        for (Matrix* m : params()) {
            if (off + m->size() > flat.size()) throw DimensionError("unpack: flat vector too short");
            std::copy(flat.begin() + off, flat.begin() + off + m->size(), m->data().begin());
            off += m->size();
        }
        if (off != flat.size()) throw DimensionError("unpack: flat vector too long");
    }
};

namespace detail {

inline Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-a, a);
    return m;
}

}  // namespace detail

// Glorot-uniform weights, zero biases. Initialization order is the
// params() order so a given seed always yields the same model.
inline FcrlModel init_model(const Dims& dims, Objective objective, Rng& rng) {
    FcrlModel m;
    m.dims = dims;
    m.objective = objective;
    const std::size_t pin = dims.d + (objective == Objective::O2 ? dims.K : 0);
    m.enc.W1 = detail::glorot(dims.p, dims.h, rng);
    m.enc.b1 = Matrix(1, dims.h);
    m.enc.Wm = detail::glorot(dims.h, dims.d, rng);
    m.enc.bm = Matrix(1, dims.d);
    m.enc.Ws = detail::glorot(dims.h, dims.d, rng);
    m.enc.bs = Matrix(1, dims.d);
    m.pred.W1 = detail::glorot(pin, dims.pred_hidden, rng);
    m.pred.b1 = Matrix(1, dims.pred_hidden);
    m.pred.W2 = detail::glorot(dims.pred_hidden, 1, rng);
    m.pred.b2 = Matrix(1, 1);
    m.scorer.We1 = detail::glorot(dims.p, dims.h, rng);
    m.scorer.be1 = Matrix(1, dims.h);
    m.scorer.We2 = detail::glorot(dims.h, dims.d, rng);
    m.scorer.be2 = Matrix(1, dims.d);
    m.scorer.Wz = detail::glorot(dims.d, dims.d, rng);
    for (std::size_t k = 0; k < dims.K; ++k)
        m.scorer.Wc.push_back(detail::glorot(dims.d, dims.d, rng));
    return m;
}

// ---------------------------------------------------------------------------
// Forward passes (evaluation path; the training loss keeps its own caches).

struct EncodeResult {
    Matrix mu;     // n x d
    Matrix sigma;  // n x d, clamped to [kSigmaFloor, kSigmaCeil]
};

inline EncodeResult encode(const FcrlModel& m, const Matrix& X) {
    if (X.cols() != m.dims.p)
        throw DimensionError("encode: input " + X.shape_str() + ", expected p=" +
                             std::to_string(m.dims.p));
    Matrix h = activation(Activation::Relu, affine(X, m.enc.W1, m.enc.b1));
    EncodeResult r;
    r.mu = affine(h, m.enc.Wm, m.enc.bm);
    r.sigma = affine(h, m.enc.Ws, m.enc.bs);
    for (double& v : r.sigma.data())
        v = std::min(kSigmaCeil, std::max(kSigmaFloor, std::exp(v)));
    return r;
}

// Z = mu + eps * sigma, eps ~ N(0, I) drawn row-major from rng.
inline Matrix reparameterize(const Matrix& mu, const Matrix& sigma, Rng& rng) {
    mu.require_same_shape(sigma, "reparameterize");
    for (double v : sigma.data())
        if (!(v > 0.0)) throw NumericError("reparameterize: sigma must be positive");
    Matrix z = mu;
    for (std::size_t k = 0; k < z.size(); ++k)
        z.at_flat(k) += rng.normal() * sigma.at_flat(k);
    return z;
}

// Deterministic encoding used for downstream evaluation.
inline Matrix encode_mean(const FcrlModel& m, const Matrix& X) { return encode(m, X).mu; }

// p(y=1 | z [, c]), clamped away from 0 and 1 for loss stability.
inline Vector predict(const FcrlModel& m, const Matrix& Z, const std::vector<int>& c) {
    if (Z.rows() != c.size()) throw DimensionError("predict: Z rows != c length");
    if (Z.cols() != m.dims.d) throw DimensionError("predict: Z has " + Z.shape_str());
    Matrix input = Z;
    if (m.objective == Objective::O2) {
        input = Matrix(Z.rows(), m.dims.d + m.dims.K);
        for (std::size_t i = 0; i < Z.rows(); ++i) {
            if (c[i] < 0 || static_cast<std::size_t>(c[i]) >= m.dims.K)
                throw DimensionError("predict: group id " + std::to_string(c[i]) +
                                     " out of range K=" + std::to_string(m.dims.K));
            for (std::size_t j = 0; j < m.dims.d; ++j) input(i, j) = Z(i, j);
            input(i, m.dims.d + static_cast<std::size_t>(c[i])) = 1.0;
        }
    }
    Matrix h = activation(Activation::Relu, affine(input, m.pred.W1, m.pred.b1));
    Matrix logits = affine(h, m.pred.W2, m.pred.b2);
    Vector out(Z.rows());
    for (std::size_t i = 0; i < Z.rows(); ++i)
        out[i] = std::min(1.0 - kProbClamp, std::max(kProbClamp, sigmoid(logits(i, 0))));
    return out;
}

// Embedding network e(x).
inline Matrix embed(const ScorerParams& s, const Matrix& X) {
    Matrix h = activation(Activation::Relu, affine(X, s.We1, s.be1));
    return affine(h, s.We2, s.be2);
}

// S(j,i) = exp{f(z_j, x_i, c_i)} = softplus((Wz z_j)^T Wc[c_i]^T e(x_i)).
// The estimator consumes exp{f} directly, so that is what we return.
inline Matrix exp_score_matrix(const ScorerParams& s, const Matrix& Z, const Matrix& X,
                               const std::vector<int>& c) {
    if (Z.rows() != X.rows() || Z.rows() != c.size())
        throw DimensionError("exp_score_matrix: row mismatch");
    const Matrix E = embed(s, X);
    const Matrix Zw = matmul(Z, transpose(s.Wz));  // rows are Wz z_j
    Matrix out(Z.rows(), Z.rows());
    for (std::size_t i = 0; i < Z.rows(); ++i) {
        const std::size_t ci = static_cast<std::size_t>(c[i]);
        if (ci >= s.Wc.size()) throw DimensionError("exp_score_matrix: group id out of range");
        // a = Wc[c_i]^T e(x_i)
        Vector a(Zw.cols(), 0.0);
        for (std::size_t m2 = 0; m2 < Zw.cols(); ++m2)
            for (std::size_t k = 0; k < Zw.cols(); ++k)
                a[k] += s.Wc[ci](m2, k) * E(i, m2);
        for (std::size_t j = 0; j < Z.rows(); ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < Zw.cols(); ++k) dot += Zw(j, k) * a[k];
            out(j, i) = softplus(dot);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON (de)serialization; round-trips bit-exactly.

constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const FcrlModel& m) {
    nlohmann::json j;
    j["version"] = kModelFormatVersion;
    j["dims"] = {{"p", m.dims.p},
                 {"d", m.dims.d},
                 {"h", m.dims.h},
                 {"K", m.dims.K},
                 {"pred_hidden", m.dims.pred_hidden}};
    j["objective"] = to_string(m.objective);
    nlohmann::json tensors = nlohmann::json::array();
    auto names = FcrlModel::param_names(m.dims.K);
    auto ps = m.params();
    for (std::size_t t = 0; t < ps.size(); ++t) {
        tensors.push_back({{"name", names[t]},
                           {"rows", ps[t]->rows()},
                           {"cols", ps[t]->cols()},
                           {"data", ps[t]->data()}});
    }
    j["tensors"] = std::move(tensors);
    return j;
}

inline FcrlModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j["version"].get<int>() != kModelFormatVersion)
        throw DataError("model: missing or unsupported format version");
    Dims dims;
    dims.p = j.at("dims").at("p").get<std::size_t>();
    dims.d = j.at("dims").at("d").get<std::size_t>();
    dims.h = j.at("dims").at("h").get<std::size_t>();
    dims.K = j.at("dims").at("K").get<std::size_t>();
    dims.pred_hidden = j.at("dims").at("pred_hidden").get<std::size_t>();
    FcrlModel m;
    Rng rng(0);
    m = init_model(dims, objective_from_string(j.at("objective").get<std::string>()), rng);
    auto names = FcrlModel::param_names(dims.K);
    auto ps = m.params();
    const auto& tensors = j.at("tensors");
    if (tensors.size() != ps.size()) throw DataError("model: wrong tensor count");
    for (std::size_t t = 0; t < ps.size(); ++t) {
        const auto& tj = tensors[t];
        if (tj.at("name").get<std::string>() != names[t])
            throw DataError("model: unexpected tensor " + tj.at("name").get<std::string>());
        const auto rows = tj.at("rows").get<std::size_t>();
        const auto cols = tj.at("cols").get<std::size_t>();
        if (rows != ps[t]->rows() || cols != ps[t]->cols())
            throw DataError("model: tensor " + names[t] + " has wrong shape");
        auto data = tj.at("data").get<std::vector<double>>();
        if (data.size() != ps[t]->size()) throw DataError("model: tensor data length mismatch");
        ps[t]->data() = std::move(data);
    }
    return m;
}

}  // namespace fcrl
