#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fcrl/error.hpp"

namespace fcrl {

// Dense row-major matrix of doubles. Everything in this project is small
// enough that a plain vector-backed matrix is the right tool; no BLAS.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                                 " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& at_flat(std::size_t k) { return data_[k]; }
    double at_flat(std::size_t k) const { return data_[k]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }
    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void require_finite(const std::string& what) const {
        if (!all_finite()) throw NumericError("non-finite values in " + what);
    }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o, "+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    void require_same_shape(const Matrix& o, const std::string& op) const {
        if (!same_shape(o))
            throw DimensionError("shape mismatch in " + op + ": " + shape_str() + " vs " +
                                 o.shape_str());
    }

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

using Vector = std::vector<double>;

// out[i,j] = sum_k a[i,k] * b[k,j]
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: " + a.shape_str() + " x " + b.shape_str());
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

// out = input * weights + bias (bias broadcast over rows).
inline Matrix affine(const Matrix& input, const Matrix& weights, const Matrix& bias) {
    if (input.cols() != weights.rows())
        throw DimensionError("affine: input " + input.shape_str() + " vs weights " +
                             weights.shape_str());
    if (bias.rows() != 1 || bias.cols() != weights.cols())
        throw DimensionError("affine: bias " + bias.shape_str() + " vs weights " +
                             weights.shape_str());
    Matrix out = matmul(input, weights);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double* orow = out.row_ptr(i);
        for (std::size_t j = 0; j < out.cols(); ++j) orow[j] += bias(0, j);
    }
    return out;
}

enum class Activation { Relu, Sigmoid, Softplus, Exp };

inline double softplus(double x) {
    // for large x, log(1+e^x) == x to double precision
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double apply_activation(Activation kind, double x) {
    switch (kind) {
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Sigmoid: return sigmoid(x);
        case Activation::Softplus: return softplus(x);
        case Activation::Exp: return std::exp(x);
    }
    return x;
}

inline Matrix activation(Activation kind, const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data()) v = apply_activation(kind, v);
    return out;
}

}  // namespace fcrl
