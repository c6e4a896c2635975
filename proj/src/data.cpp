#include "vidinr/data.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vidinr/errors.hpp"

namespace fs = std::filesystem;

namespace vidinr {

std::string ManifestEntry::to_line() const {
    return video_id + "\t" + std::to_string(start) + "\t" + std::to_string(frames) + "\t" + std::to_string(stride);
}

ManifestEntry ManifestEntry::parse(const std::string& line) {
    std::istringstream is(line);
    ManifestEntry e;
    std::string start, frames, stride;
    if (!std::getline(is, e.video_id, '\t') || !std::getline(is, start, '\t') || !std::getline(is, frames, '\t') ||
        !std::getline(is, stride))
        throw ParseError("manifest line needs 4 tab-separated fields: '" + line + "'", 0);
    try {
        e.start = std::stoll(start);
        e.frames = std::stoll(frames);
        e.stride = std::stoll(stride);
    } catch (const std::exception&) {
        throw ParseError("manifest line has non-integer fields: '" + line + "'", 0);
    }
    return e;
}

torch::Tensor ClipDataset::stacked() const { return stack_clips(clips); }

std::uint8_t to_byte(float v) {
    const double b = std::round((static_cast<double>(v) + 1.0) * 127.5);
    return static_cast<std::uint8_t>(std::clamp(b, 0.0, 255.0));
}

float from_byte(std::uint8_t b) { return static_cast<float>(static_cast<double>(b) / 127.5 - 1.0); }

namespace {

std::string frame_name(std::int64_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%06lld.png", static_cast<long long>(k));
    return buf;
}

torch::Tensor image_to_tensor(const cv::Mat& bgr) {
    const auto H = bgr.rows, W = bgr.cols;
    auto out = torch::empty({3, H, W}, torch::kFloat32);
    auto* p = out.data_ptr<float>();
    for (int y = 0; y < H; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) p[(c * H + y) * W + x] = from_byte(row[x][2 - c]);
    }
    return out;
}

cv::Mat tensor_to_image(const torch::Tensor& frame) {
    auto f = frame.contiguous();
    const auto H = static_cast<int>(f.size(1)), W = static_cast<int>(f.size(2));
    cv::Mat img(H, W, CV_8UC3);
    const auto* p = f.data_ptr<float>();
    for (int y = 0; y < H; ++y) {
        auto* row = img.ptr<cv::Vec3b>(y);
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) row[x][2 - c] = to_byte(p[(c * H + y) * W + x]);
    }
    return img;
}

cv::Mat load_image(const fs::path& path) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("cannot read frame image " + path.string());
    return img;
}

cv::Mat preprocess(const cv::Mat& img, CropMode crop, std::int64_t height, std::int64_t width) {
    cv::Mat src = img;
    if (crop == CropMode::center) {
        const int side = std::min(img.rows, img.cols);
        src = img(cv::Rect((img.cols - side) / 2, (img.rows - side) / 2, side, side));
    }
    cv::Mat out;
    if (src.rows == height && src.cols == width) return src.clone();
    cv::resize(src, out, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_AREA);
    return out;
}

}  // namespace

ClipDataset extract_clips(const std::string& frames_dir, std::int64_t frames, std::int64_t stride, CropMode crop,
                          std::int64_t height, std::int64_t width) {
    if (frames < 1 || stride < 1) throw std::invalid_argument("extract_clips: T and stride must be >= 1");
    if (height < 1 || width < 1) throw std::invalid_argument("extract_clips: output size must be positive");
    if (!fs::is_directory(frames_dir)) throw std::invalid_argument("extract_clips: not a directory: " + frames_dir);

    std::vector<fs::path> videos;
    for (const auto& e : fs::directory_iterator(frames_dir))
        if (e.is_directory()) videos.push_back(e.path());
    std::sort(videos.begin(), videos.end());

    ClipDataset ds;
    const auto span = (frames - 1) * stride + 1;
    for (const auto& video : videos) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(video))
            if (e.is_regular_file() && e.path().filename().string().rfind("frame_", 0) == 0) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        const auto n = static_cast<std::int64_t>(files.size());
        const auto id = video.filename().string();
        if (n < span) {
            ds.notes.push_back("skipped " + id + ": " + std::to_string(n) + " frames < span " + std::to_string(span));
            continue;
        }
        std::vector<torch::Tensor> decoded(static_cast<std::size_t>(n));
        auto frame_at = [&](std::int64_t i) -> const torch::Tensor& {
            auto& slot = decoded[static_cast<std::size_t>(i)];
            if (!slot.defined()) slot = image_to_tensor(preprocess(load_image(files[i]), crop, height, width));
            return slot;
        };
        for (std::int64_t start = 0; start + span <= n; ++start) {
            std::vector<torch::Tensor> clip;
            for (std::int64_t k = 0; k < frames; ++k) clip.push_back(frame_at(start + k * stride));
            ds.clips.emplace_back(torch::stack(clip));
            ds.manifest.push_back({id, start, frames, stride});
        }
    }
    return ds;
}

std::array<double, 2> circle_center(const Circle& c, std::int64_t k, std::int64_t height, std::int64_t width) {
    // Unfold the motion, then fold it back into [r, extent - r] (triangle wave).
    auto fold = [&](double start, double v, double extent) {
        const double lo = c.radius, hi = extent - c.radius;
        const double u = start + static_cast<double>(k) * v;
        if (u >= lo && u <= hi) return u;
        const double len = hi - lo;
        if (len <= 0) return lo;
        double m = std::fmod(u - lo, 2 * len);
        if (m < 0) m += 2 * len;
        return m <= len ? lo + m : hi - (m - len);
    };
    return {fold(c.cx, c.vx, static_cast<double>(width - 1)), fold(c.cy, c.vy, static_cast<double>(height - 1))};
}

std::int64_t dominant_direction(const std::array<Circle, 2>& circles) {
    const auto& a = circles[0];
    const auto& b = circles[1];
    const auto& f = (a.vx * a.vx + a.vy * a.vy) >= (b.vx * b.vx + b.vy * b.vy) ? a : b;
    double angle = std::atan2(f.vy, f.vx);  // y grows downward
    if (angle < 0) angle += 2 * std::numbers::pi;
    return static_cast<std::int64_t>(std::floor(angle / (std::numbers::pi / 2) + 0.5)) % kDirectionClasses;
}

VideoClip render_circles(const std::array<Circle, 2>& circles, std::int64_t height, std::int64_t width,
                         std::int64_t frames) {
    auto out = torch::full({frames, 3, height, width}, -1.0f);
    auto* p = out.data_ptr<float>();
    for (std::int64_t k = 0; k < frames; ++k) {
        for (const auto& c : circles) {
            const auto [cx, cy] = circle_center(c, k, height, width);
            for (std::int64_t y = 0; y < height; ++y) {
                for (std::int64_t x = 0; x < width; ++x) {
                    const double dist = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
                    const double alpha = std::clamp(c.radius + 0.5 - dist, 0.0, 1.0);
                    if (alpha <= 0) continue;
                    for (int ch = 0; ch < 3; ++ch) {
                        auto& px = p[((k * 3 + ch) * height + y) * width + x];
                        px = static_cast<float>((1 - alpha) * px + alpha * c.color[ch]);
                    }
                }
            }
        }
    }
    return VideoClip(out);
}

ClipDataset synth_two_circles(std::int64_t n_videos, std::int64_t height, std::int64_t width, std::int64_t frames,
                              Rng& rng) {
    if (n_videos < 0 || height < 4 || width < 4 || frames < 1)
        throw std::invalid_argument("synth_two_circles: need n >= 0, H, W >= 4, T >= 1");
    ClipDataset ds;
    const double extent = static_cast<double>(std::min(height, width));
    for (std::int64_t i = 0; i < n_videos; ++i) {
        std::array<Circle, 2> circles;
        for (auto& c : circles) {
            c.radius = rng.uniform(extent / 8.0, extent / 4.0);
            c.cx = rng.uniform(c.radius, static_cast<double>(width - 1) - c.radius);
            c.cy = rng.uniform(c.radius, static_cast<double>(height - 1) - c.radius);
            const double speed = rng.uniform(0.5, 2.0) * extent / 32.0;
            const double angle = rng.uniform(0.0, 2 * std::numbers::pi);
            c.vx = speed * std::cos(angle);
            c.vy = speed * std::sin(angle);
            for (auto& ch : c.color) ch = static_cast<float>(rng.uniform(-0.2, 1.0));
        }
        ds.clips.push_back(render_circles(circles, height, width, frames));
        ds.labels.push_back(dominant_direction(circles));
        ds.manifest.push_back({"two_circles_" + std::to_string(i), 0, frames, 1});
        ds.circles.push_back(circles);
    }
    return ds;
}

void write_clip(const VideoClip& clip, const std::string& dir, const std::string& video_id) {
    if (clip.empty()) throw std::invalid_argument("write_clip: empty clip");
    fs::create_directories(dir);
    for (std::int64_t k = 0; k < clip.length(); ++k) {
        const auto path = (fs::path(dir) / frame_name(k)).string();
        if (!cv::imwrite(path, tensor_to_image(clip.frame(k)))) throw std::runtime_error("cannot write " + path);
    }
    std::ofstream manifest(fs::path(dir) / "manifest.tsv", std::ios::trunc);
    manifest << ManifestEntry{video_id, 0, clip.length(), 1}.to_line() << "\n";
    if (!manifest) throw std::runtime_error("cannot write manifest in " + dir);
}

VideoClip read_clip(const std::string& dir) {
    std::ifstream manifest(fs::path(dir) / "manifest.tsv");
    if (!manifest) throw ParseError("missing manifest.tsv in " + dir, 0);
    std::string line;
    if (!std::getline(manifest, line)) throw ParseError("empty manifest in " + dir, 0);
    const auto entry = ManifestEntry::parse(line);
    if (entry.frames < 1) throw ParseError("manifest declares no frames", 0);

    std::vector<std::int64_t> gaps;
    for (std::int64_t k = 0; k < entry.frames; ++k)
        if (!fs::exists(fs::path(dir) / frame_name(k))) gaps.push_back(k);
    if (!gaps.empty()) {
        std::string list;
        for (auto g : gaps) list += (list.empty() ? "" : ",") + std::to_string(g);
        throw ParseError("clip in " + dir + " is missing frames " + list, static_cast<std::uint64_t>(gaps.front()));
    }
    if (fs::exists(fs::path(dir) / frame_name(entry.frames)))
        throw ParseError("clip in " + dir + " has more frames than its manifest declares", static_cast<std::uint64_t>(entry.frames));
    std::vector<torch::Tensor> frames;
    for (std::int64_t k = 0; k < entry.frames; ++k) frames.push_back(image_to_tensor(load_image(fs::path(dir) / frame_name(k))));
    return VideoClip(torch::stack(frames));
}

}  // namespace vidinr
