#include "vidinr/discriminator.hpp"

#include <cmath>

#include "vidinr/errors.hpp"

namespace vidinr {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

void DiscriminatorConfig::validate() const {
    if (resolution < 4 || (resolution & (resolution - 1)) != 0)
        throw ConfigError("resolution: must be a power of two >= 4", "resolution");
    if (channels < 1) throw ConfigError("d_channels: must be >= 1", "d_channels");
}

ResBlockImpl::ResBlockImpl(std::int64_t in, std::int64_t out) {
    conv0_ = register_module("conv0", EqualConv2d(in, in, 3));
    conv1_ = register_module("conv1", EqualConv2d(in, out, 3));
    skip_ = register_module("skip", EqualConv2d(in, out, 1, false));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
    auto y = scaled_lrelu(conv0_->forward(x));
    y = scaled_lrelu(conv1_->forward(y));
    y = F::avg_pool2d(y, F::AvgPool2dFuncOptions(2));
    auto s = skip_->forward(F::avg_pool2d(x, F::AvgPool2dFuncOptions(2)));
    return (y + s) * (1.0 / std::sqrt(2.0));
}

ConvDiscriminatorImpl::ConvDiscriminatorImpl(std::int64_t in_channels, const DiscriminatorConfig& cfg)
    : in_channels_(in_channels), resolution_(cfg.resolution) {
    cfg.validate();
    const auto c = cfg.channels;
    from_rgb_ = register_module("from_rgb", EqualConv2d(in_channels, c, 1));
    blocks_ = register_module("blocks", nn::Sequential());
    for (auto r = cfg.resolution; r > 4; r /= 2) blocks_->push_back(ResBlock(c, c));
    fc_ = register_module("fc", EqualLinear(c * 16, c));
    out_ = register_module("out", EqualLinear(c, 1));
    if (cfg.zero_init_output) {
        torch::NoGradGuard no_grad;
        out_->weight.zero_();
        out_->bias.zero_();
    }
}

torch::Tensor ConvDiscriminatorImpl::forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != in_channels_ || x.size(2) != resolution_ || x.size(3) != resolution_)
        throw ShapeError("discriminator expects [B, " + std::to_string(in_channels_) + ", " +
                         std::to_string(resolution_) + ", " + std::to_string(resolution_) + "]");
    auto h = scaled_lrelu(from_rgb_->forward(x));
    if (!blocks_->is_empty()) h = blocks_->forward(h);
    h = scaled_lrelu(fc_->forward(h.flatten(1)));
    return out_->forward(h).squeeze(1);
}

DiscriminatorNetsImpl::DiscriminatorNetsImpl(const DiscriminatorConfig& cfg) : cfg_(cfg) {
    image = register_module("image", ConvDiscriminator(kImageChannels, cfg));
    motion = register_module("motion", ConvDiscriminator(kMotionChannels, cfg));
}

TimePair sample_time_pair(Rng& rng) {
    // Inverse CDFs: Beta(2,1) has F(t) = t^2, Beta(1,2) has F(t) = 1 - (1-t)^2.
    const double t1 = std::sqrt(rng.uniform());
    const double t2 = 1.0 - std::sqrt(1.0 - rng.uniform());
    return {t1, t2, std::abs(t1 - t2)};
}

std::int64_t nearest_frame_index(std::int64_t frames, double t) {
    if (frames < 1) throw std::invalid_argument("nearest_frame_index: empty clip");
    const auto idx = std::lround(t * static_cast<double>(frames - 1));
    return std::clamp<std::int64_t>(idx, 0, frames - 1);
}

Triplet build_triplet(const VideoClip& clip, double t1, double t2) {
    if (clip.empty()) throw std::invalid_argument("build_triplet: empty clip");
    const auto T = clip.length();
    return {clip.frame(nearest_frame_index(T, t1)), clip.frame(nearest_frame_index(T, t2)), std::abs(t1 - t2)};
}

Triplet build_triplet(GeneratorNets& nets, const LatentPair& z, std::int64_t height, std::int64_t width, double t1,
                      double t2) {
    torch::NoGradGuard no_grad;
    auto [params, head] = nets->forward(z);
    if (params.batch() != 1) throw ShapeError("build_triplet: expects a single latent pair");
    auto grid = make_grid(height, width, 1);
    auto times = torch::tensor({static_cast<float>(t1), static_cast<float>(t2)}).view({1, 2});
    auto frames = render_frames(params, head, axis_tensor(grid.xs()), axis_tensor(grid.ys()), times)[0];
    return {frames[0], frames[1], std::abs(t1 - t2)};
}

torch::Tensor motion_input(const torch::Tensor& frame_a, const torch::Tensor& frame_b, const torch::Tensor& delta_t) {
    if (frame_a.dim() != 4 || !frame_a.sizes().equals(frame_b.sizes()) || frame_a.size(1) != 3)
        throw ShapeError("motion_input: frames must both be [B, 3, H, W]");
    if (delta_t.dim() != 1 || delta_t.size(0) != frame_a.size(0)) throw ShapeError("motion_input: Δt must be [B]");
    auto plane = delta_t.to(frame_a.dtype()).view({-1, 1, 1, 1}).expand({-1, 1, frame_a.size(2), frame_a.size(3)});
    return torch::cat({frame_a, frame_b, plane}, 1);
}

double motion_logit(DiscriminatorNets& nets, const Triplet& trip) {
    torch::NoGradGuard no_grad;
    auto dt = torch::full({1}, static_cast<float>(trip.delta_t));
    return nets->motion->forward(motion_input(trip.frame_a.unsqueeze(0), trip.frame_b.unsqueeze(0), dt))
        .item<double>();
}

double image_logit(DiscriminatorNets& nets, const torch::Tensor& frame) {
    torch::NoGradGuard no_grad;
    if (frame.dim() != 3) throw ShapeError("image_logit: frame must be [3, H, W]");
    return nets->image->forward(frame.unsqueeze(0)).item<double>();
}

}  // namespace vidinr
