#pragma once

#include <torch/torch.h>

#include <cstdint>

#include "vidinr/clip.hpp"
#include "vidinr/generator.hpp"
#include "vidinr/layers.hpp"
#include "vidinr/rng.hpp"

namespace vidinr {

struct DiscriminatorConfig {
    std::int64_t resolution = 32;  // power of two, >= 4
    std::int64_t channels = 32;
    bool zero_init_output = false;

    void validate() const;
};

inline constexpr std::int64_t kImageChannels = 3;
inline constexpr std::int64_t kMotionChannels = 7;  // frame, frame, Δt plane

/// Residual downsampling block: two 3x3 convs, 2x average pool, 1x1 skip.
class ResBlockImpl : public torch::nn::Module {
public:
    ResBlockImpl(std::int64_t in, std::int64_t out);
    torch::Tensor forward(const torch::Tensor& x);

private:
    EqualConv2d conv0_{nullptr}, conv1_{nullptr}, skip_{nullptr};
};
TORCH_MODULE(ResBlock);

/// StyleGAN2-style residual classifier producing one logit per input.
class ConvDiscriminatorImpl : public torch::nn::Module {
public:
    ConvDiscriminatorImpl(std::int64_t in_channels, const DiscriminatorConfig& cfg);
    torch::Tensor forward(const torch::Tensor& x);  // [B, C, H, W] -> [B]
    std::int64_t in_channels() const { return in_channels_; }

private:
    std::int64_t in_channels_;
    std::int64_t resolution_;
    EqualConv2d from_rgb_{nullptr};
    torch::nn::Sequential blocks_{nullptr};
    EqualLinear fc_{nullptr}, out_{nullptr};
};
TORCH_MODULE(ConvDiscriminator);

/// D_I judges single frames, D_M judges (frame, frame, Δt) triplets.
class DiscriminatorNetsImpl : public torch::nn::Module {
public:
    explicit DiscriminatorNetsImpl(const DiscriminatorConfig& cfg);
    const DiscriminatorConfig& config() const { return cfg_; }

    ConvDiscriminator image{nullptr};
    ConvDiscriminator motion{nullptr};

private:
    DiscriminatorConfig cfg_;
};
TORCH_MODULE(DiscriminatorNets);

struct TimePair {
    double t1 = 0.0;
    double t2 = 0.0;
    double delta_t = 0.0;
};

/// t1 ~ Beta(2,1), t2 ~ Beta(1,2), Δt = |t1 - t2|.
TimePair sample_time_pair(Rng& rng);

/// Frames are [3, H, W].
struct Triplet {
    torch::Tensor frame_a;
    torch::Tensor frame_b;
    double delta_t = 0.0;
};

/// Nearest frame index of time t on a canonical grid of `frames` samples.
std::int64_t nearest_frame_index(std::int64_t frames, double t);

/// Real branch: nearest stored frames.
Triplet build_triplet(const VideoClip& clip, double t1, double t2);
/// Generated branch: both frames decoded from one latent draw (batch 1).
Triplet build_triplet(GeneratorNets& nets, const LatentPair& z, std::int64_t height, std::int64_t width, double t1,
                      double t2);

/// [B,3,H,W] x2 + Δt [B] -> [B,7,H,W] with Δt broadcast as a constant plane.
torch::Tensor motion_input(const torch::Tensor& frame_a, const torch::Tensor& frame_b, const torch::Tensor& delta_t);

double motion_logit(DiscriminatorNets& nets, const Triplet& trip);
double image_logit(DiscriminatorNets& nets, const torch::Tensor& frame);

}  // namespace vidinr
