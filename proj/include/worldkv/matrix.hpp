// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace worldkv {

/// Dense row-major float matrix. Rows are tokens, columns are feature dims.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::span<float> row(std::size_t i) {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    float& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    float at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

inline double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: dimension mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return s;
}

inline double vector_norm(std::span<const float> a) {
    return std::sqrt(dot(a, a));
}

inline double cosine(std::span<const float> a, std::span<const float> b) {
    const double na = vector_norm(a);
    const double nb = vector_norm(b);
    if (na < 1e-12 || nb < 1e-12) {
        throw std::invalid_argument("cosine: zero-norm vector");
    }
    return dot(a, b) / (na * nb);
}

}  // namespace worldkv
