#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vidinr/clip.hpp"
#include "vidinr/coords.hpp"
#include "vidinr/embedder.hpp"
#include "vidinr/generator.hpp"
#include "vidinr/rng.hpp"

namespace vidinr {

/// Decodes `frames` samples spanning `t_range` on the canonical H x W lattice.
VideoClip time_resample(GeneratorNets& nets, const LatentPair& z, std::int64_t height, std::int64_t width,
                        std::int64_t frames, Range t_range);

/// Decodes an H_out x W_out lattice spanning `xy_range` on both axes, at
/// `frames` canonical times.
VideoClip space_resample(GeneratorNets& nets, const LatentPair& z, std::int64_t height, std::int64_t width,
                         std::int64_t frames, Range xy_range);

/// Zoom-out lattice size with the same pixel density as a canonical axis of
/// `n` samples: (n-1)*(hi-lo)+1 when that is an integer, else -1.
std::int64_t matched_density_size(std::int64_t n, Range range);

struct TargetFrame {
    double t = 0.0;
    torch::Tensor image;  // [3, H, W] in [-1, 1]
};

struct ProjectionOptions {
    std::int64_t iterations = 2000;
    double lr = 0.1;
    std::int64_t restarts = 3;
    double noise_strength = 0.05;  // initial latent noise, ramped to 0 by 75% of the run
    double prior_weight = 1e-4;    // weight of mean(z^2)
    Embedder* perceptual = nullptr;
    double perceptual_weight = 0.1;
    std::uint64_t seed = 0;
};

struct ProjectionResult {
    LatentPair z_hat;
    std::vector<double> loss_trace;  // loss at each iteration, plus the starting loss
    std::int64_t iterations = 0;
    double final_psnr = 0.0;
};

/// Optimizes (z_I, z_M) so that decoding at the target times reproduces the
/// target frames. Restart 0 starts from z = 0, later restarts from prior draws;
/// the best latent seen over all restarts is returned.
ProjectionResult project(GeneratorNets& nets, const std::vector<TargetFrame>& targets,
                         const ProjectionOptions& options = {});

/// Decodes the projected latent at arbitrary times.
VideoClip predict(GeneratorNets& nets, const ProjectionResult& proj, const std::vector<double>& query_times,
                  std::int64_t height, std::int64_t width);

struct MotionVariants {
    std::vector<VideoClip> clips;
    std::vector<VideoClip> differences;  // clips[i] - clips[0], i >= 1
    LatentPair latents;                  // [n, ...], z_content shared
};

/// `n` videos sharing the content latent with independently drawn motion latents.
MotionVariants resample_motion(GeneratorNets& nets, const torch::Tensor& z_content, std::int64_t n, Rng& rng,
                               const CoordinateGrid& grid);

VideoClip difference_clip(const VideoClip& a, const VideoClip& b);

/// (1-λ)·p1 + λ·p2 for every INR tensor, frequency and motion-head tensor.
std::pair<VideoINRParams, MotionHead> weight_interpolate(const VideoINRParams& p1, const MotionHead& m1,
                                                         const VideoINRParams& p2, const MotionHead& m2,
                                                         double lambda);

}  // namespace vidinr
