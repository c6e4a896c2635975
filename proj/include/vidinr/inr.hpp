#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "vidinr/clip.hpp"
#include "vidinr/coords.hpp"

namespace vidinr {

inline constexpr double kLeakySlope = 0.2;

/// Spatial half of the sinusoidal first layer; tensors carry a leading batch
/// dimension B so one struct can hold a whole minibatch of INRs.
struct FirstLayerParams {
    torch::Tensor w_x;  // [B, d]
    torch::Tensor w_y;  // [B, d]
    torch::Tensor b;    // [B, d]
    double sigma_x = 1.0;
    double sigma_y = 1.0;

    std::int64_t hidden() const { return w_x.size(1); }
};

/// Linear layer whose weight is base ⊙ (A·B) with per-sample low-rank factors.
struct ModulatedLayer {
    torch::Tensor base;   // [out, in], shared across the batch
    torch::Tensor mod_a;  // [B, out, r]
    torch::Tensor mod_b;  // [B, r, in]
    torch::Tensor bias;   // [B, out]

    std::int64_t fan_in() const { return base.size(1); }
    std::int64_t fan_out() const { return base.size(0); }
    std::int64_t rank() const { return mod_a.size(2); }
    torch::Tensor effective_weight() const;  // [B, out, in]
};

struct BodyParams {
    std::vector<ModulatedLayer> layers;  // hidden -> hidden, leaky-ReLU
    ModulatedLayer head;                 // hidden -> 3, tanh
    std::int64_t stages = 1;             // >1 enables coarse-to-fine evaluation
};

struct MotionFlags {
    bool use_small_sigma_t = true;
    bool use_z_M = true;
    bool use_f_M = true;
};

/// Time-dependent term of the first layer: w_t plus the bias-free mapping f_M.
struct MotionHead {
    torch::Tensor w_t;     // [B, d]
    torch::Tensor fm_in;   // [B, h, d]
    torch::Tensor fm_out;  // [B, d, h]
    double sigma_t = 0.25;
    MotionFlags flags;

    std::int64_t batch() const { return w_t.size(0); }
    MotionHead select(std::int64_t i) const;
};

/// Content parameters of a batch of video INRs (everything except w_t).
struct VideoINRParams {
    FirstLayerParams first;
    BodyParams body;

    std::int64_t batch() const { return first.w_x.size(0); }
    VideoINRParams select(std::int64_t i) const;
    void validate() const;
};

/// Motion feature at times `t` ([B, K]) -> [B, K, d]. Equals
/// f_M(σt·w_t·t) when f_M is enabled, σt·w_t·t otherwise.
torch::Tensor motion_feature(const MotionHead& head, const torch::Tensor& t);

/// sin(σx·w_x·x + σy·w_y·y + motion + b) for one coordinate; motion is [B, d].
torch::Tensor first_layer(const FirstLayerParams& p, double x, double y, const torch::Tensor& motion);

/// Renders frames at arbitrary times on the spatial lattice (xs, ys).
/// xs: [W], ys: [H], times: [B, K]. Returns [B, K, 3, H, W]. Differentiable.
torch::Tensor render_frames(const VideoINRParams& params, const MotionHead& motion,
                            const torch::Tensor& xs, const torch::Tensor& ys, const torch::Tensor& times);

/// Decodes a single INR (batch 1) on `grid`, one frame at a time, without
/// gradient tracking.
VideoClip decode(const VideoINRParams& params, const MotionHead& motion, const CoordinateGrid& grid);

/// Same as decode but frames are distributed over `workers` threads.
VideoClip decode_parallel(const VideoINRParams& params, const MotionHead& motion, const CoordinateGrid& grid,
                          int workers);

torch::Tensor axis_tensor(const std::vector<double>& axis);

}  // namespace vidinr
