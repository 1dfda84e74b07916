#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace winsorcam {

using Shape = std::vector<std::size_t>;

std::size_t shape_volume(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major tensor of doubles. Every extent is positive.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // 2-D access (rank 2): row, col
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    // 3-D access (rank 3): channel, row, col
    double& at(std::size_t k, std::size_t r, std::size_t c) {
        return data_[(k * shape_[1] + r) * shape_[2] + c];
    }
    double at(std::size_t k, std::size_t r, std::size_t c) const {
        return data_[(k * shape_[1] + r) * shape_[2] + c];
    }

    // View of channel k of a rank-3 tensor as a contiguous H*W block.
    std::span<const double> channel(std::size_t k) const;
    std::span<double> channel(std::size_t k);

    Tensor reshaped(Shape shape) const;

    double min() const;
    double max() const;
    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

void require_rank(const Tensor& t, std::size_t rank, const char* what);

}  // namespace winsorcam
