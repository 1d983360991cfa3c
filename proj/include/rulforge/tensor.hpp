#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rulforge {

// Dense row-major 64-bit tensor. Rank 1 is a vector, rank 2 a matrix;
// higher ranks are used only as storage (window batches are B x W x F).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }

    // Rank-2 accessors.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool is_scalar() const { return size() == 1; }
    bool all_finite() const;

    void fill(double v);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);
std::size_t shape_product(const std::vector<std::size_t>& shape);

// Plain value-level matrix product, shared by the graph forward pass and
// its backward rules. a: m x k, b: k x n.
Tensor matmul_values(const Tensor& a, const Tensor& b);
Tensor transpose_values(const Tensor& a);

}  // namespace rulforge
