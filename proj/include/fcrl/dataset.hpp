#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fcrl/error.hpp"
#include "fcrl/matrix.hpp"
#include "fcrl/rng.hpp"

namespace fcrl {

// A labelled dataset with a protected group attribute. Features live in
// [0,1]; y is binary; c takes values 0..K-1.
struct Dataset {
    Matrix X;                  // n x p
    std::vector<int> y;        // {0,1}
    std::vector<int> c;        // {0..K-1}
    int K = 2;
    std::vector<std::string> feature_names;

    std::size_t n() const { return X.rows(); }
    std::size_t p() const { return X.cols(); }

    void validate() const {
        if (y.size() != n() || c.size() != n())
            throw DataError("dataset: row count mismatch between X, y, c");
        if (K < 2) throw DataError("dataset: K must be >= 2");
        for (int v : y)
            if (v != 0 && v != 1) throw DataError("dataset: non-binary label");
        for (int v : c)
            if (v < 0 || v >= K) throw DataError("dataset: group id out of range");
        for (double v : X.data())
            if (!(v >= 0.0 && v <= 1.0)) throw DataError("dataset: feature outside [0,1]");
    }

    std::vector<double> group_priors() const {
        std::vector<double> pi(static_cast<std::size_t>(K), 0.0);
        for (int v : c) pi[static_cast<std::size_t>(v)] += 1.0;
        for (double& v : pi) v /= static_cast<double>(n());
        return pi;
    }
};

// ---------------------------------------------------------------------------
// CSV format: header "f_0,...,f_{p-1},y,c", UTF-8, comma separated, LF.

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, std::size_t row, std::size_t col) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("non-numeric cell at row " + std::to_string(row) + ", column " +
                        std::to_string(col) + ": '" + s + "'");
    }
}

}  // namespace detail

inline void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    for (std::size_t j = 0; j < ds.p(); ++j) f << "f_" << j << ",";
    f << "y,c\n";
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < ds.p(); ++j)
            f << detail::format_double(ds.X(i, j)) << ",";
        f << ds.y[i] << "," << ds.c[i] << "\n";
    }
    if (!f) throw DataError("write failed: " + path);
}

// Load a dataset CSV. Features are required to lie in [0,1] unless
// `rescale` is set, in which case each feature column is min-max mapped.
inline Dataset load_csv(const std::string& path, bool rescale = false) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw DataError("empty file: " + path);
    auto header = detail::split_csv_line(line);
    if (header.size() < 3 || header[header.size() - 2] != "y" || header.back() != "c")
        throw DataError(path + ": header must end with columns y,c");
    const std::size_t p = header.size() - 2;
    for (std::size_t j = 0; j < p; ++j)
        if (header[j] != "f_" + std::to_string(j))
            throw DataError(path + ": expected column f_" + std::to_string(j) + ", got '" +
                            header[j] + "'");

    Dataset ds;
    std::vector<double> xdata;
    std::size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != p + 2)
            throw DataError(path + ": row " + std::to_string(row) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(p + 2));
        for (std::size_t j = 0; j < p; ++j)
            xdata.push_back(detail::parse_double(cells[j], row, j));
        const double yv = detail::parse_double(cells[p], row, p);
        if (yv != 0.0 && yv != 1.0)
            throw DataError(path + ": row " + std::to_string(row) + ": label must be 0 or 1");
        const double cv = detail::parse_double(cells[p + 1], row, p + 1);
        if (cv < 0.0 || cv != std::floor(cv))
            throw DataError(path + ": row " + std::to_string(row) +
                            ": group must be a non-negative integer");
        ds.y.push_back(static_cast<int>(yv));
        ds.c.push_back(static_cast<int>(cv));
    }
    const std::size_t n = ds.y.size();
    ds.X = Matrix(n, p, std::move(xdata));
    if (rescale) {
        for (std::size_t j = 0; j < p; ++j) {
            double lo = ds.X(0, j), hi = ds.X(0, j);
            for (std::size_t i = 1; i < n; ++i) {
                lo = std::min(lo, ds.X(i, j));
                hi = std::max(hi, ds.X(i, j));
            }
            const double span = hi - lo;
            for (std::size_t i = 0; i < n; ++i)
                ds.X(i, j) = span > 0.0 ? (ds.X(i, j) - lo) / span : 0.0;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j)
                if (!(ds.X(i, j) >= 0.0 && ds.X(i, j) <= 1.0))
                    throw DataError(path + ": feature value outside [0,1] at row " +
                                    std::to_string(i + 2) + ", column " + std::to_string(j) +
                                    " (pass rescale to min-max map)");
    }
    int kmax = 1;
    for (int v : ds.c) kmax = std::max(kmax, v);
    ds.K = kmax + 1;
    if (ds.K < 2) ds.K = 2;
    for (std::size_t j = 0; j < p; ++j) ds.feature_names.push_back("f_" + std::to_string(j));
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Standard scaling with train-only statistics. Population (1/n) standard
// deviation convention. Constant features scale to zero instead of
// dividing by zero.

struct Scaler {
    Vector mean;
    Vector inv_std;  // 0 for degenerate features

    Matrix apply(const Matrix& x) const {
        if (x.cols() != mean.size())
            throw DimensionError("scaler: fitted on " + std::to_string(mean.size()) +
                                 " features, applied to " + x.shape_str());
        Matrix out = x;
        for (std::size_t i = 0; i < out.rows(); ++i)
            for (std::size_t j = 0; j < out.cols(); ++j)
                out(i, j) = (out(i, j) - mean[j]) * inv_std[j];
        return out;
    }
};

inline Scaler fit_scaler(const Matrix& train) {
    if (train.rows() == 0) throw DataError("fit_scaler: empty matrix");
    Scaler s;
    s.mean.assign(train.cols(), 0.0);
    s.inv_std.assign(train.cols(), 0.0);
    const double n = static_cast<double>(train.rows());
    for (std::size_t j = 0; j < train.cols(); ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < train.rows(); ++i) m += train(i, j);
        m /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < train.rows(); ++i) {
            const double d = train(i, j) - m;
            var += d * d;
        }
        var /= n;
        s.mean[j] = m;
        const double sd = std::sqrt(var);
        s.inv_std[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic generators.

enum class SynthMode { GaussianBias, Xor };

// gaussian_bias: groups and labels with a tunable label-group rate gap;
// features are class/group-dependent Gaussian bumps squashed into [0,1].
// xor: y = x_bit XOR c, with x_bit carried noisily by feature 0.
struct SynthSpec {
    SynthMode mode = SynthMode::GaussianBias;
    std::size_t n = 1000;
    std::size_t p = 6;
    double group_prior = 0.5;   // pi = P(c=1)
    double rho_yc = 0.0;        // |P(y=1|c=1) - P(y=1|c=0)|
    double noise = 1.0;         // pre-squash noise scale
    std::uint64_t seed = 0;
    // gaussian_bias shape knobs
    double label_rate = 0.5;    // marginal P(y=1)
    double y_scale = 2.0;       // pre-squash label signal
    double c_scale = 2.0;       // pre-squash group signal

    void validate() const {
        if (!(group_prior > 0.0 && group_prior < 1.0))
            throw DomainError("synth: group prior must be in (0,1)");
        if (rho_yc < 0.0 || rho_yc > 1.0) throw DomainError("synth: rho_yc must be in [0,1]");
        if (n == 0 || p == 0) throw DomainError("synth: n and p must be positive");
    }
};

// First third of the feature columns carry the label signal, the second
// third the group signal, the rest are pure noise.
inline Dataset generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Dataset ds;
    ds.K = 2;
    ds.X = Matrix(spec.n, spec.p);
    ds.y.resize(spec.n);
    ds.c.resize(spec.n);

    const double pi = spec.group_prior;
    // P(y=1|c) = label_rate + rho*(c - pi), so the marginal stays at
    // label_rate and the group rate gap is exactly rho.
    auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
    const double q0 = clamp01(spec.label_rate - spec.rho_yc * pi);
    const double q1 = clamp01(spec.label_rate + spec.rho_yc * (1.0 - pi));

    const std::size_t n_y = spec.p / 3 == 0 ? 1 : spec.p / 3;
    const std::size_t n_c = spec.p >= 2 ? n_y : 0;

    for (std::size_t i = 0; i < spec.n; ++i) {
        const int ci = rng.uniform() < pi ? 1 : 0;
        ds.c[i] = ci;
        if (spec.mode == SynthMode::Xor) {
            const int x_bit = rng.uniform() < 0.5 ? 1 : 0;
            ds.y[i] = x_bit ^ ci;
            for (std::size_t j = 0; j < spec.p; ++j) {
                double v = spec.noise * rng.normal();
                if (j == 0) v += spec.y_scale * (2.0 * x_bit - 1.0);
                ds.X(i, j) = sigmoid(v);
            }
        } else {
            const int yi = rng.uniform() < (ci ? q1 : q0) ? 1 : 0;
            ds.y[i] = yi;
            for (std::size_t j = 0; j < spec.p; ++j) {
                double v = spec.noise * rng.normal();
                if (j < n_y)
                    v += spec.y_scale * (2.0 * yi - 1.0);
                else if (j < n_y + n_c)
                    v += spec.c_scale * (2.0 * ci - 1.0);
                ds.X(i, j) = sigmoid(v);
            }
        }
    }
    ds.feature_names.clear();
    for (std::size_t j = 0; j < spec.p; ++j) ds.feature_names.push_back("f_" + std::to_string(j));
    ds.validate();
    return ds;
}

// Plug-in mutual information (nats) between two discrete sequences.
inline double discrete_mi(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size() || a.empty())
        throw DimensionError("discrete_mi: length mismatch or empty");
    std::map<int, double> pa, pb;
    std::map<std::pair<int, int>, double> pab;
    const double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa[a[i]] += 1.0 / n;
        pb[b[i]] += 1.0 / n;
        pab[{a[i], b[i]}] += 1.0 / n;
    }
    double mi = 0.0;
    for (const auto& [key, pj] : pab)
        mi += pj * std::log(pj / (pa[key.first] * pb[key.second]));
    return mi;
}

}  // namespace fcrl
