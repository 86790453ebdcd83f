#include "onboard/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "onboard/error.hpp"

namespace onboard {

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
    for (auto d : shape) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
    }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(element_count(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (element_count(shape_) != data_.size()) {
        throw DimensionError("shape " + shape_to_string(shape_) + " needs " +
                             std::to_string(element_count(shape_)) + " values, got " +
                             std::to_string(data_.size()));
    }
}

Tensor Tensor::from_external(Shape shape, std::vector<float> data, float max_abs) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            throw ValidationError("non-finite value at element " + std::to_string(i));
        }
        if (std::fabs(data[i]) > max_abs) {
            throw ValidationError("value out of range at element " + std::to_string(i));
        }
    }
    return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias,
              std::size_t stride, std::size_t padding) {
    if (input.rank() != 3) throw DimensionError("conv2d input must be [C,H,W], got " + shape_to_string(input.shape()));
    if (kernel.rank() != 4) throw DimensionError("conv2d kernel must be [Cout,Cin,kH,kW], got " + shape_to_string(kernel.shape()));
    if (stride == 0) throw ValidationError("conv2d stride must be positive");

    const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kernel.dim(1) != cin) {
        throw DimensionError("conv2d kernel expects " + std::to_string(kernel.dim(1)) +
                             " input channels, input has " + std::to_string(cin));
    }
    if (bias.size() != cout) {
        throw DimensionError("conv2d bias length " + std::to_string(bias.size()) +
                             " does not match " + std::to_string(cout) + " output channels");
    }
    if (h + 2 * padding < kh || w + 2 * padding < kw) {
        throw DimensionError("conv2d kernel larger than padded input");
    }

    const std::size_t oh = (h + 2 * padding - kh) / stride + 1;
    const std::size_t ow = (w + 2 * padding - kw) / stride + 1;
    Tensor out({cout, oh, ow});

    const float* in = input.data().data();
    const float* k = kernel.data().data();
    float* o = out.data().data();
    const auto pad = static_cast<std::ptrdiff_t>(padding);
    const auto ih = static_cast<std::ptrdiff_t>(h);
    const auto iw = static_cast<std::ptrdiff_t>(w);

    for (std::size_t oc = 0; oc < cout; ++oc) {
        const float* koc = k + oc * cin * kh * kw;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                const auto y0 = static_cast<std::ptrdiff_t>(oy * stride) - pad;
                const auto x0 = static_cast<std::ptrdiff_t>(ox * stride) - pad;
                for (std::size_t ic = 0; ic < cin; ++ic) {
                    const float* plane = in + ic * h * w;
                    const float* kic = koc + ic * kh * kw;
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const auto y = y0 + static_cast<std::ptrdiff_t>(ky);
                        if (y < 0 || y >= ih) continue;
                        const float* row = plane + y * iw;
                        const float* krow = kic + ky * kw;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const auto x = x0 + static_cast<std::ptrdiff_t>(kx);
                            if (x < 0 || x >= iw) continue;
                            acc += static_cast<double>(row[x]) * static_cast<double>(krow[kx]);
                        }
                    }
                }
                o[(oc * oh + oy) * ow + ox] = static_cast<float>(acc + static_cast<double>(bias[oc]));
            }
        }
    }
    return out;
}

std::vector<float> linear(std::span<const float> x, const Tensor& weight, std::span<const float> bias) {
    if (weight.rank() != 2) throw DimensionError("linear weight must be [m,n], got " + shape_to_string(weight.shape()));
    const std::size_t m = weight.dim(0), n = weight.dim(1);
    if (x.size() != n) {
        throw DimensionError("linear input length " + std::to_string(x.size()) + " does not match weight " +
                             shape_to_string(weight.shape()));
    }
    if (bias.size() != m) {
        throw DimensionError("linear bias length " + std::to_string(bias.size()) + " does not match weight " +
                             shape_to_string(weight.shape()));
    }
    std::vector<float> out(m);
    const float* wp = weight.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        const float* row = wp + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += static_cast<double>(row[j]) * static_cast<double>(x[j]);
        out[i] = static_cast<float>(acc + static_cast<double>(bias[i]));
    }
    return out;
}

float leaky_relu(float x, float alpha) {
    return std::max(x, alpha * x);
}

Tensor leaky_relu(const Tensor& x, float alpha) {
    if (alpha < 0.0f) throw ValidationError("leaky_relu alpha must be nonnegative");
    Tensor out = x;
    for (auto& v : out.data()) v = leaky_relu(v, alpha);
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

float sigmoid(float x) {
    return static_cast<float>(sigmoid(static_cast<double>(x)));
}

}  // namespace onboard
