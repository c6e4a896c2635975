#include "vidinr/layers.hpp"

#include <cmath>

#include "vidinr/inr.hpp"

namespace vidinr {

namespace F = torch::nn::functional;

EqualLinearImpl::EqualLinearImpl(std::int64_t in, std::int64_t out, bool with_bias, double gain)
    : scale_(gain / std::sqrt(static_cast<double>(in))) {
    weight = register_parameter("weight", torch::randn({out, in}));
    if (with_bias) bias = register_parameter("bias", torch::zeros({out}));
}

torch::Tensor EqualLinearImpl::forward(const torch::Tensor& x) {
    return F::linear(x, weight * scale_, bias.defined() ? bias : torch::Tensor());
}

EqualConv2dImpl::EqualConv2dImpl(std::int64_t in, std::int64_t out, std::int64_t kernel, bool with_bias)
    : scale_(1.0 / std::sqrt(static_cast<double>(in * kernel * kernel))), padding_(kernel / 2) {
    weight = register_parameter("weight", torch::randn({out, in, kernel, kernel}));
    if (with_bias) bias = register_parameter("bias", torch::zeros({out}));
}

torch::Tensor EqualConv2dImpl::forward(const torch::Tensor& x) {
    return F::conv2d(x, weight * scale_, F::Conv2dFuncOptions().bias(bias.defined() ? bias : torch::Tensor()).padding(padding_));
}

torch::Tensor scaled_lrelu(const torch::Tensor& x) {
    return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(kLeakySlope)) * std::sqrt(2.0);
}

}  // namespace vidinr
