#pragma once

#include <cstddef>
#include <vector>

#include "mdq/error.hpp"

namespace mdq {

// Dense row-major 2D array.
template <typename T>
struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> values;

    Grid() = default;
    Grid(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), values(r * c, fill) {}
    Grid(std::size_t r, std::size_t c, std::vector<T> v) : rows(r), cols(c), values(std::move(v)) {
        require(values.size() == r * c, Errc::shape_mismatch, "grid value count does not match rows*cols");
    }

    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }
    T& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    const T& at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    bool same_shape(const Grid& other) const { return rows == other.rows && cols == other.cols; }
    bool operator==(const Grid&) const = default;
};

} // namespace mdq
