#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace vidinr {

/// Linear layer with an equalized learning rate: the stored weight is N(0, 1)
/// and is scaled by gain/sqrt(fan_in) at every forward pass.
class EqualLinearImpl : public torch::nn::Module {
public:
    EqualLinearImpl(std::int64_t in, std::int64_t out, bool bias = true, double gain = 1.0);
    torch::Tensor forward(const torch::Tensor& x);
    double scale() const { return scale_; }

    torch::Tensor weight, bias;

private:
    double scale_;
};
TORCH_MODULE(EqualLinear);

/// Same-padded square convolution with an equalized learning rate.
class EqualConv2dImpl : public torch::nn::Module {
public:
    EqualConv2dImpl(std::int64_t in, std::int64_t out, std::int64_t kernel, bool bias = true);
    torch::Tensor forward(const torch::Tensor& x);

    torch::Tensor weight, bias;

private:
    double scale_;
    std::int64_t padding_;
};
TORCH_MODULE(EqualConv2d);

/// leaky_relu(x, 0.2) * sqrt(2), the variance-preserving activation paired
/// with equalized layers.
torch::Tensor scaled_lrelu(const torch::Tensor& x);

}  // namespace vidinr
