#include "vidinr/clip.hpp"

#include "vidinr/errors.hpp"

namespace vidinr {

VideoClip::VideoClip(torch::Tensor t) : frames(std::move(t)) {
    if (frames.dim() != 4 || frames.size(1) != 3)
        throw ShapeError("VideoClip expects a [T, 3, H, W] tensor");
    if (frames.scalar_type() != torch::kFloat32) frames = frames.to(torch::kFloat32);
    frames = frames.contiguous();
}

float VideoClip::at(std::int64_t t, std::int64_t y, std::int64_t x, std::int64_t c) const {
    const auto H = height(), W = width();
    return frames.data_ptr<float>()[((t * 3 + c) * H + y) * W + x];
}

torch::Tensor stack_clips(const std::vector<VideoClip>& clips) {
    if (clips.empty()) throw std::invalid_argument("stack_clips: no clips");
    std::vector<torch::Tensor> parts;
    parts.reserve(clips.size());
    for (const auto& c : clips) {
        if (!c.frames.sizes().equals(clips.front().frames.sizes()))
            throw ShapeError("stack_clips: clip shapes differ");
        parts.push_back(c.frames);
    }
    return torch::stack(parts);
}

VideoClip concat_time(const std::vector<VideoClip>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_time: no clips");
    std::vector<torch::Tensor> ts;
    for (const auto& p : parts) ts.push_back(p.frames);
    return VideoClip(torch::cat(ts, 0));
}

float max_abs_diff(const VideoClip& a, const VideoClip& b) {
    if (!a.frames.sizes().equals(b.frames.sizes())) throw ShapeError("max_abs_diff: shape mismatch");
    return (a.frames - b.frames).abs().max().item<float>();
}

}  // namespace vidinr
