#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dagfit/errors.hpp"

namespace dagfit {

/// Shape descriptor of a node output: a dense array of doubles that is either
/// a plain point set (rank 1 or 2) or a 1-d histogram carrying its bin edges.
struct DataType {
    enum class Kind { Points, Histogram };

    Kind kind = Kind::Points;
    std::vector<std::size_t> shape; // rank 1 or 2
    std::vector<double> edges;      // histogram only, size shape[0]+1, strictly increasing

    static DataType points(std::size_t n) { return DataType{Kind::Points, {n}, {}}; }
    static DataType points(std::size_t rows, std::size_t cols) {
        return DataType{Kind::Points, {rows, cols}, {}};
    }
    static DataType histogram(std::vector<double> bin_edges);
    static DataType scalar() { return points(1); }

    std::size_t rank() const { return shape.size(); }
    std::size_t size() const {
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        return shape.empty() ? 0 : n;
    }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return rank() < 2 ? 1 : shape[1]; }

    bool is_scalar() const { return rank() == 1 && shape[0] == 1 && kind == Kind::Points; }

    /// Throws TypeMismatch if the invariants do not hold.
    void validate() const;

    std::string to_string() const;

    bool operator==(const DataType& other) const = default;
};

/// Dense 64-bit float storage sized by a DataType.
struct DataBuffer {
    DataType dtype;
    std::vector<double> values;

    void allocate(const DataType& dt) {
        dtype = dt;
        values.assign(dt.size(), 0.0);
    }

    std::size_t size() const { return values.size(); }
    double& at(std::size_t i, std::size_t j) { return values[i * dtype.cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * dtype.cols() + j]; }
};

} // namespace dagfit
