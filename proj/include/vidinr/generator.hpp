#pragma once

#include <torch/torch.h>

#include <cmath>
#include <cstdint>
#include <utility>

#include "vidinr/clip.hpp"
#include "vidinr/coords.hpp"
#include "vidinr/inr.hpp"
#include "vidinr/layers.hpp"
#include "vidinr/rng.hpp"

namespace vidinr {

struct GeneratorConfig {
    std::int64_t dim_zI = 64;
    std::int64_t dim_zM = 64;
    std::int64_t hidden = 64;          // INR width d_hidden (also f_M width)
    std::int64_t body_layers = 2;      // hidden->hidden modulated layers
    std::int64_t mod_rank = 4;
    std::int64_t mapping_hidden = 128;
    std::int64_t progressive_stages = 1;
    double sigma_x = std::sqrt(10.0);
    double sigma_y = std::sqrt(10.0);
    double sigma_t = 0.25;
    bool use_small_sigma_t = true;
    bool use_z_M = true;
    bool use_f_M = true;

    /// σt actually used: sigma_t, or sigma_x when the small time frequency is
    /// ablated away.
    double effective_sigma_t() const { return use_small_sigma_t ? sigma_t : sigma_x; }
    MotionFlags flags() const { return {use_small_sigma_t, use_z_M, use_f_M}; }
    void validate() const;
};

/// Content and motion latents, each [B, dim].
struct LatentPair {
    torch::Tensor z_content;
    torch::Tensor z_motion;

    std::int64_t batch() const { return z_content.size(0); }
    LatentPair select(std::int64_t i) const { return {z_content.narrow(0, i, 1), z_motion.narrow(0, i, 1)}; }
};

LatentPair sample_latents(Rng& rng, std::int64_t batch, const GeneratorConfig& cfg);

/// Hypernetwork output head: a linear map whose bias holds the target
/// parameter's initial value and whose weight starts scaled down.
class HyperHeadImpl : public torch::nn::Module {
public:
    HyperHeadImpl(std::int64_t in, std::vector<std::int64_t> shape, torch::Tensor init_bias, double gain);
    torch::Tensor forward(const torch::Tensor& h);  // [B, in] -> [B, shape...]

private:
    std::vector<std::int64_t> shape_;
    EqualLinear linear_{nullptr};
};
TORCH_MODULE(HyperHead);

/// G_I maps z_I to the content parameters; G_M maps (z_I, z_M) to the motion head.
class GeneratorNetsImpl : public torch::nn::Module {
public:
    explicit GeneratorNetsImpl(const GeneratorConfig& cfg);

    std::pair<VideoINRParams, MotionHead> forward(const LatentPair& z);
    const GeneratorConfig& config() const { return cfg_; }

private:
    GeneratorConfig cfg_;
    torch::nn::Sequential content_mapping_{nullptr};
    torch::nn::Sequential motion_mapping_{nullptr};
    HyperHead head_wx_{nullptr}, head_wy_{nullptr}, head_b_{nullptr};
    std::vector<HyperHead> head_a_, head_b_mod_, head_bias_;
    std::vector<torch::Tensor> base_;  // N(0, 1), scaled at use (equalized learning rate)
    std::vector<double> base_scale_;
    HyperHead head_wt_{nullptr}, head_fm_in_{nullptr}, head_fm_out_{nullptr};
};
TORCH_MODULE(GeneratorNets);

std::pair<VideoINRParams, MotionHead> generate_params(GeneratorNets& nets, const LatentPair& z);

/// Decodes a single latent pair (batch 1) on `grid`.
VideoClip synthesize(GeneratorNets& nets, const LatentPair& z, const CoordinateGrid& grid);

/// Deep copy of a generator (same config, cloned parameters).
GeneratorNets clone_generator(const GeneratorNets& nets);

}  // namespace vidinr
