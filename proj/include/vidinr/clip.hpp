#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace vidinr {

/// Discrete RGB video, values nominally in [-1, 1]. Stored frame-major as a
/// float32 tensor of shape [T, 3, H, W].
struct VideoClip {
    torch::Tensor frames;

    VideoClip() = default;
    explicit VideoClip(torch::Tensor t);

    std::int64_t length() const { return frames.size(0); }
    std::int64_t height() const { return frames.size(2); }
    std::int64_t width() const { return frames.size(3); }
    bool empty() const { return !frames.defined() || frames.numel() == 0; }

    float at(std::int64_t t, std::int64_t y, std::int64_t x, std::int64_t c) const;
    torch::Tensor frame(std::int64_t k) const { return frames[k]; }
};

/// Stacks clips into a [B, T, 3, H, W] batch; all shapes must agree.
torch::Tensor stack_clips(const std::vector<VideoClip>& clips);

/// Concatenates clips along time.
VideoClip concat_time(const std::vector<VideoClip>& parts);

float max_abs_diff(const VideoClip& a, const VideoClip& b);

}  // namespace vidinr
