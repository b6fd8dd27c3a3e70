#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace llfl {

// Dense row-major f64 tensor of rank 1 or 2.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor scalar(double v);
    static Tensor row_major(std::size_t rows, std::size_t cols, std::vector<double> d);
    static Tensor vec(std::vector<double> d);

    std::size_t rank() const { return shape.size(); }
    std::size_t numel() const;
    bool is_scalar() const { return numel() == 1; }

    // Rank-2 accessors; rank-1 tensors behave as a single row.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;
};

// Throws if any entry is not finite; context names the offending tensor.
void ensure_finite(const Tensor& t, const std::string& context);

} // namespace llfl
