#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace effgnn {

// Dense row-major matrix.
template <class T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }

    std::span<T> row(std::size_t r) noexcept { return {data.data() + r * cols, cols}; }
    std::span<const T> row(std::size_t r) const noexcept { return {data.data() + r * cols, cols}; }

    std::size_t size() const noexcept { return data.size(); }
    bool empty() const noexcept { return data.empty(); }

    void fill(T v) {
        for (auto& x : data) x = v;
    }

    bool operator==(const Matrix&) const = default;
};

template <class To, class From>
Matrix<To> matrix_cast(const Matrix<From>& m) {
    Matrix<To> out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = static_cast<To>(m.data[i]);
    return out;
}

}  // namespace effgnn
