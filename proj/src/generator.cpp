#include "vidinr/generator.hpp"

#include <numbers>
#include <string>

#include "vidinr/errors.hpp"

namespace vidinr {

namespace nn = torch::nn;

void GeneratorConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what, key); };
    if (dim_zI < 1) fail("dim_zI", "must be >= 1");
    if (dim_zM < 1) fail("dim_zM", "must be >= 1");
    if (hidden < 1) fail("hidden", "must be >= 1");
    if (body_layers < 0) fail("body_layers", "must be >= 0");
    if (mod_rank < 1 || mod_rank > hidden) fail("mod_rank", "must be in [1, hidden]");
    if (mapping_hidden < 1) fail("mapping_hidden", "must be >= 1");
    if (progressive_stages < 1 || progressive_stages > std::max<std::int64_t>(1, body_layers))
        fail("progressive_stages", "must be in [1, max(1, body_layers)]");
    if (!(sigma_x > 0)) fail("sigma_x", "must be > 0");
    if (!(sigma_y > 0)) fail("sigma_y", "must be > 0");
    if (!(sigma_t > 0)) fail("sigma_t", "must be > 0");
    if (use_small_sigma_t && !(sigma_t < sigma_x && sigma_t < sigma_y))
        fail("sigma_t", "time frequency must be smaller than both spatial frequencies");
}

LatentPair sample_latents(Rng& rng, std::int64_t batch, const GeneratorConfig& cfg) {
    auto zi = rng.normal_vector(static_cast<std::size_t>(batch * cfg.dim_zI));
    auto zm = rng.normal_vector(static_cast<std::size_t>(batch * cfg.dim_zM));
    return {torch::from_blob(zi.data(), {batch, cfg.dim_zI}, torch::kFloat32).clone(),
            torch::from_blob(zm.data(), {batch, cfg.dim_zM}, torch::kFloat32).clone()};
}

HyperHeadImpl::HyperHeadImpl(std::int64_t in, std::vector<std::int64_t> shape, torch::Tensor init_bias, double gain)
    : shape_(std::move(shape)) {
    std::int64_t out = 1;
    for (auto s : shape_) out *= s;
    linear_ = register_module("linear", EqualLinear(in, out, true, gain));
    torch::NoGradGuard no_grad;
    linear_->bias.copy_(init_bias.reshape({out}));
}

torch::Tensor HyperHeadImpl::forward(const torch::Tensor& h) {
    std::vector<std::int64_t> shape{h.size(0)};
    shape.insert(shape.end(), shape_.begin(), shape_.end());
    return linear_->forward(h).view(shape);
}

namespace {

nn::Sequential mapping_mlp(std::int64_t in, std::int64_t width) {
    return nn::Sequential(EqualLinear(in, width), nn::Functional(scaled_lrelu), EqualLinear(width, width),
                          nn::Functional(scaled_lrelu));
}

constexpr double kHeadGain = 0.1;

}  // namespace

GeneratorNetsImpl::GeneratorNetsImpl(const GeneratorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto d = cfg_.hidden;
    const auto m = cfg_.mapping_hidden;
    content_mapping_ = register_module("content_mapping", mapping_mlp(cfg_.dim_zI, m));
    motion_mapping_ = register_module("motion_mapping", mapping_mlp(cfg_.dim_zI + cfg_.dim_zM, m));

    head_wx_ = register_module("head_wx", HyperHead(m, std::vector<std::int64_t>{d}, torch::randn({d}), 1.0));
    head_wy_ = register_module("head_wy", HyperHead(m, std::vector<std::int64_t>{d}, torch::randn({d}), 1.0));
    head_b_ = register_module(
        "head_b", HyperHead(m, std::vector<std::int64_t>{d}, torch::rand({d}) * (2 * std::numbers::pi) - std::numbers::pi,
                            1.0));

    // A·B starts at the all-ones matrix so base weights pass through unchanged.
    // Narrow layers (the RGB head) clamp the rank to min(fan_in, fan_out).
    auto add_layer = [&](std::int64_t in, std::int64_t out, const std::string& name) {
        const auto r = std::min({cfg_.mod_rank, in, out});
        const double ab_init = 1.0 / std::sqrt(static_cast<double>(r));
        base_.push_back(register_parameter(name + "_base", torch::randn({out, in})));
        base_scale_.push_back(std::sqrt(2.0 / static_cast<double>(in)));
        head_a_.push_back(register_module(
            name + "_mod_a", HyperHead(m, std::vector<std::int64_t>{out, r}, torch::full({out, r}, ab_init), kHeadGain)));
        head_b_mod_.push_back(register_module(
            name + "_mod_b", HyperHead(m, std::vector<std::int64_t>{r, in}, torch::full({r, in}, ab_init), kHeadGain)));
        head_bias_.push_back(register_module(
            name + "_bias", HyperHead(m, std::vector<std::int64_t>{out}, torch::zeros({out}), kHeadGain)));
    };
    for (std::int64_t i = 0; i < cfg_.body_layers; ++i) add_layer(d, d, "layer" + std::to_string(i));
    add_layer(d, 3, "output");

    head_wt_ = register_module("head_wt", HyperHead(m, std::vector<std::int64_t>{d}, torch::randn({d}), 1.0));
    head_fm_in_ = register_module(
        "head_fm_in",
        HyperHead(m, std::vector<std::int64_t>{d, d}, torch::randn({d, d}) * std::sqrt(2.0 / static_cast<double>(d)),
                  kHeadGain));
    head_fm_out_ = register_module(
        "head_fm_out",
        HyperHead(m, std::vector<std::int64_t>{d, d}, torch::randn({d, d}) * std::sqrt(1.0 / static_cast<double>(d)),
                  kHeadGain));
}

std::pair<VideoINRParams, MotionHead> GeneratorNetsImpl::forward(const LatentPair& z) {
    if (z.z_content.dim() != 2 || z.z_content.size(1) != cfg_.dim_zI)
        throw ShapeError("generate_params: z_I must be [B, " + std::to_string(cfg_.dim_zI) + "]");
    if (z.z_motion.dim() != 2 || z.z_motion.size(1) != cfg_.dim_zM || z.z_motion.size(0) != z.z_content.size(0))
        throw ShapeError("generate_params: z_M must be [B, " + std::to_string(cfg_.dim_zM) + "]");

    auto hc = content_mapping_->forward(z.z_content);
    auto zm = cfg_.use_z_M ? z.z_motion : torch::zeros_like(z.z_motion);
    auto hm = motion_mapping_->forward(torch::cat({z.z_content, zm}, 1));

    VideoINRParams params;
    params.first = {head_wx_->forward(hc), head_wy_->forward(hc), head_b_->forward(hc), cfg_.sigma_x, cfg_.sigma_y};
    const auto n = base_.size();
    for (std::size_t i = 0; i < n; ++i) {
        ModulatedLayer layer{base_[i] * base_scale_[i], head_a_[i]->forward(hc), head_b_mod_[i]->forward(hc), head_bias_[i]->forward(hc)};
        if (i + 1 < n)
            params.body.layers.push_back(std::move(layer));
        else
            params.body.head = std::move(layer);
    }
    params.body.stages = cfg_.progressive_stages;

    MotionHead head;
    head.w_t = head_wt_->forward(hm);
    head.fm_in = head_fm_in_->forward(hm);
    head.fm_out = head_fm_out_->forward(hm);
    head.sigma_t = cfg_.effective_sigma_t();
    head.flags = cfg_.flags();
    return {std::move(params), std::move(head)};
}

std::pair<VideoINRParams, MotionHead> generate_params(GeneratorNets& nets, const LatentPair& z) {
    return nets->forward(z);
}

VideoClip synthesize(GeneratorNets& nets, const LatentPair& z, const CoordinateGrid& grid) {
    torch::NoGradGuard no_grad;
    auto [params, head] = nets->forward(z);
    return decode(params, head, grid);
}

GeneratorNets clone_generator(const GeneratorNets& nets) {
    GeneratorNets copy(nets->config());
    torch::NoGradGuard no_grad;
    auto src = nets->named_parameters(true);
    auto dst = copy->named_parameters(true);
    for (auto& item : src) dst[item.key()].copy_(item.value());
    return copy;
}

}  // namespace vidinr
