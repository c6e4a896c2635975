#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vidinr/clip.hpp"
#include "vidinr/rng.hpp"

namespace vidinr {

struct ManifestEntry {
    std::string video_id;
    std::int64_t start = 0;
    std::int64_t frames = 0;
    std::int64_t stride = 1;

    std::string to_line() const;  // video_id<TAB>start<TAB>T<TAB>stride
    static ManifestEntry parse(const std::string& line);
};

struct Circle {
    double cx = 0, cy = 0;  // center in pixel units at frame 0
    double vx = 0, vy = 0;  // pixels per frame
    double radius = 1;
    std::array<float, 3> color{1, 1, 1};
};

struct ClipDataset {
    std::vector<VideoClip> clips;
    std::vector<std::int64_t> labels;  // empty when unlabeled
    std::vector<ManifestEntry> manifest;
    std::vector<std::string> notes;    // skipped videos etc.
    std::vector<std::array<Circle, 2>> circles;  // synthetic datasets only

    std::size_t size() const { return clips.size(); }
    /// [N, T, 3, H, W]
    torch::Tensor stacked() const;
};

enum class CropMode { center, none };

/// Slides a window of T frames (frame step `stride`) over every video
/// subdirectory of `frames_dir`; window starts advance by one frame.
ClipDataset extract_clips(const std::string& frames_dir, std::int64_t frames, std::int64_t stride, CropMode crop,
                          std::int64_t height, std::int64_t width);

inline constexpr std::int64_t kDirectionClasses = 4;

/// Center of `c` at frame k, reflecting at the borders of a width x height canvas.
std::array<double, 2> circle_center(const Circle& c, std::int64_t k, std::int64_t height, std::int64_t width);
/// Quantized direction (0 right, 1 down, 2 left, 3 up) of the faster circle.
std::int64_t dominant_direction(const std::array<Circle, 2>& circles);
VideoClip render_circles(const std::array<Circle, 2>& circles, std::int64_t height, std::int64_t width,
                         std::int64_t frames);

ClipDataset synth_two_circles(std::int64_t n_videos, std::int64_t height, std::int64_t width, std::int64_t frames,
                              Rng& rng);

/// Stores frame_%06d.png files plus manifest.tsv in `dir`.
void write_clip(const VideoClip& clip, const std::string& dir, const std::string& video_id = "clip");
VideoClip read_clip(const std::string& dir);

/// [-1, 1] <-> 8-bit mapping used by every image file.
std::uint8_t to_byte(float v);
float from_byte(std::uint8_t b);

}  // namespace vidinr
