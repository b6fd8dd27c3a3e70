#include "llfl/tensor.hpp"

#include "llfl/error.hpp"

#include <cmath>
#include <sstream>

namespace llfl {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (auto s : shape) p *= s;
    return p;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    require(rank() >= 1 && rank() <= 2, "Tensor: rank must be 1 or 2, got ", rank());
    for (auto dim : shape) require(dim > 0, "Tensor: zero-sized dimension in ", shape_str());
    require(product(shape) == data.size(), "Tensor: shape ", shape_str(), " does not match ",
            data.size(), " elements");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    const std::size_t n = product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) {
    return Tensor({1}, {v});
}

Tensor Tensor::row_major(std::size_t rows, std::size_t cols, std::vector<double> d) {
    return Tensor({rows, cols}, std::move(d));
}

Tensor Tensor::vec(std::vector<double> d) {
    const std::size_t n = d.size();
    return Tensor({n}, std::move(d));
}

std::size_t Tensor::numel() const {
    return product(shape);
}

std::size_t Tensor::rows() const {
    return rank() == 2 ? shape[0] : 1;
}

std::size_t Tensor::cols() const {
    return rank() == 2 ? shape[1] : shape[0];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    return data[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return data[r * cols() + c];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

void ensure_finite(const Tensor& t, const std::string& context) {
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        if (!std::isfinite(t.data[i])) {
            fail(context, ": non-finite value at flat index ", i);
        }
    }
}

} // namespace llfl
