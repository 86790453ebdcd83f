#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace onboard {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major float32 tensor. No broadcasting anywhere: every op
/// requires exact shapes.
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape. All dimensions must be positive.
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<float> data);

    /// Same as the (shape, data) constructor but additionally rejects
    /// NaN/Inf and magnitudes above `max_abs`. Use for anything read from disk.
    static Tensor from_external(Shape shape, std::vector<float> data, float max_abs = 1e6f);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    float operator[](std::size_t i) const { return data_[i]; }
    float& operator[](std::size_t i) { return data_[i]; }

    /// Same data, new shape with the same element count.
    Tensor reshaped(Shape shape) const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<float> data_;
};

// Cross-correlation (no kernel flip) with zero padding, the layout of the
// mainstream deep-learning stacks: input [Cin,H,W], kernel [Cout,Cin,kH,kW].
// Accumulates in double, rounds once to float per output element.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias,
              std::size_t stride, std::size_t padding);

// out[i] = sum_j weight[i,j] * x[j] + bias[i], weight is [m,n].
std::vector<float> linear(std::span<const float> x, const Tensor& weight,
                          std::span<const float> bias);

// Elementwise max(x, alpha * x).
Tensor leaky_relu(const Tensor& x, float alpha);
float leaky_relu(float x, float alpha);

// Never evaluates exp of a positive argument, so |x| up to ~700 stays finite.
double sigmoid(double x);
float sigmoid(float x);

}  // namespace onboard
