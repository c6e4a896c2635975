#include "vidinr/inference.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "vidinr/errors.hpp"
#include "vidinr/metrics.hpp"

namespace vidinr {

VideoClip time_resample(GeneratorNets& nets, const LatentPair& z, std::int64_t height, std::int64_t width,
                        std::int64_t frames, Range t_range) {
    if (frames < 1) throw std::invalid_argument("time_resample: frames must be >= 1");
    return synthesize(nets, z, make_subgrid(height, width, frames, {0, 1}, {0, 1}, t_range));
}

VideoClip space_resample(GeneratorNets& nets, const LatentPair& z, std::int64_t height, std::int64_t width,
                         std::int64_t frames, Range xy_range) {
    if (height < 1 || width < 1) throw std::invalid_argument("space_resample: output size must be >= 1");
    return synthesize(nets, z, make_subgrid(height, width, frames, xy_range, xy_range, {0, 1}));
}

std::int64_t matched_density_size(std::int64_t n, Range range) {
    const double size = static_cast<double>(n - 1) * (range.hi - range.lo) + 1.0;
    const double rounded = std::round(size);
    return std::abs(size - rounded) < 1e-9 ? static_cast<std::int64_t>(rounded) : -1;
}

namespace {

struct Targets {
    torch::Tensor images;  // [1, K, 3, H, W]
    torch::Tensor times;   // [1, K]
    torch::Tensor xs, ys;
};

Targets stack_targets(const std::vector<TargetFrame>& targets) {
    if (targets.empty()) throw std::invalid_argument("project: need at least one target frame");
    const auto shape = targets.front().image.sizes();
    if (shape.size() != 3 || shape[0] != 3) throw ShapeError("project: target frames must be [3, H, W]");
    std::vector<torch::Tensor> images;
    std::vector<double> times;
    for (const auto& f : targets) {
        if (!f.image.sizes().equals(shape)) throw ShapeError("project: target frames differ in shape");
        if (!std::isfinite(f.t)) throw std::invalid_argument("project: non-finite target time");
        images.push_back(f.image.to(torch::kFloat32));
        times.push_back(f.t);
    }
    const auto grid = make_grid(shape[1], shape[2], 1);
    return {torch::stack(images).unsqueeze(0), axis_tensor(times).unsqueeze(0), axis_tensor(grid.xs()),
            axis_tensor(grid.ys())};
}

torch::Tensor gaussian_row(Rng& rng, std::int64_t n) {
    auto v = rng.normal_vector(static_cast<std::size_t>(n));
    return torch::from_blob(v.data(), {1, n}, torch::kFloat32).clone();
}

torch::Tensor render(GeneratorNets& nets, const LatentPair& z, const Targets& tg) {
    auto [params, head] = nets->forward(z);
    return render_frames(params, head, tg.xs, tg.ys, tg.times);
}

}  // namespace

ProjectionResult project(GeneratorNets& nets, const std::vector<TargetFrame>& targets, const ProjectionOptions& opt) {
    if (opt.iterations < 0) throw std::invalid_argument("project: iterations must be >= 0");
    if (opt.restarts < 1) throw std::invalid_argument("project: restarts must be >= 1");
    const auto tg = stack_targets(targets);
    const auto& cfg = nets->config();
    Rng rng = Rng::derive(opt.seed, "project");

    torch::Tensor target_feats;
    if (opt.perceptual) {
        torch::NoGradGuard no_grad;
        target_feats = opt.perceptual->features(tg.images).detach();
    }
    // Restore the caller's grad-mode and requires_grad flags on exit.
    std::vector<std::pair<torch::Tensor, bool>> frozen;
    for (auto& p : nets->parameters()) {
        frozen.emplace_back(p, p.requires_grad());
        p.requires_grad_(false);
    }
    struct Restore {
        std::vector<std::pair<torch::Tensor, bool>>& items;
        ~Restore() {
            for (auto& [p, flag] : items) p.requires_grad_(flag);
        }
    } restore{frozen};
    torch::AutoGradMode grad_on(true);

    auto loss_of = [&](const LatentPair& z) {
        auto frames = render(nets, z, tg);
        auto loss = (frames - tg.images).square().mean();
        if (opt.perceptual)
            loss = loss + opt.perceptual_weight * (opt.perceptual->features(frames) - target_feats).square().mean();
        const auto prior = 0.5 * (z.z_content.square().mean() + z.z_motion.square().mean());
        return loss + opt.prior_weight * prior;
    };

    ProjectionResult best;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::int64_t r = 0; r < opt.restarts; ++r) {
        LatentPair init = r == 0 ? LatentPair{torch::zeros({1, cfg.dim_zI}), torch::zeros({1, cfg.dim_zM})}
                                 : sample_latents(rng, 1, cfg);
        auto zi = init.z_content.clone().requires_grad_(true);
        auto zm = init.z_motion.clone().requires_grad_(true);
        torch::optim::Adam optim({zi, zm}, torch::optim::AdamOptions(opt.lr).betas({0.9, 0.999}));

        std::vector<double> trace;
        LatentPair run_best{init.z_content.clone(), init.z_motion.clone()};
        double run_best_loss = std::numeric_limits<double>::infinity();
        for (std::int64_t it = 0; it <= opt.iterations; ++it) {
            const double progress = opt.iterations > 0 ? static_cast<double>(it) / static_cast<double>(opt.iterations) : 1.0;
            const double ramp = std::max(0.0, 1.0 - progress / 0.75);
            const double noise = it == 0 ? 0.0 : opt.noise_strength * ramp * ramp;
            LatentPair z{zi, zm};
            if (noise > 0) {
                z = {zi + noise * gaussian_row(rng, cfg.dim_zI), zm + noise * gaussian_row(rng, cfg.dim_zM)};
            }
            auto loss = loss_of(z);
            const double value = loss.item<double>();
            if (!std::isfinite(value)) {
                std::string msg = "project: non-finite loss at restart " + std::to_string(r) + " iteration " +
                                  std::to_string(it) + "; trace tail:";
                for (std::size_t i = trace.size() > 5 ? trace.size() - 5 : 0; i < trace.size(); ++i)
                    msg += " " + std::to_string(trace[i]);
                throw std::runtime_error(msg);
            }
            trace.push_back(value);
            if (value < run_best_loss) {
                run_best_loss = value;
                run_best = {z.z_content.detach().clone(), z.z_motion.detach().clone()};
            }
            if (it == opt.iterations) break;
            const double lr = opt.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
            for (auto& group : optim.param_groups())
                static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
            optim.zero_grad();
            loss.backward();
            optim.step();
        }
        if (run_best_loss < best_loss) {
            best_loss = run_best_loss;
            best.z_hat = run_best;
            best.loss_trace = std::move(trace);
        }
    }
    best.iterations = opt.iterations;
    {
        torch::NoGradGuard no_grad;
        best.final_psnr = psnr(render(nets, best.z_hat, tg), tg.images);
    }
    return best;
}

VideoClip predict(GeneratorNets& nets, const ProjectionResult& proj, const std::vector<double>& query_times,
                  std::int64_t height, std::int64_t width) {
    if (!proj.z_hat.z_content.defined()) throw std::invalid_argument("predict: empty projection");
    if (query_times.empty()) throw std::invalid_argument("predict: no query times");
    return synthesize(nets, proj.z_hat, make_grid(height, width, 1).with_times(query_times));
}

VideoClip difference_clip(const VideoClip& a, const VideoClip& b) {
    if (!a.frames.sizes().equals(b.frames.sizes())) throw ShapeError("difference_clip: shape mismatch");
    return VideoClip(a.frames - b.frames);
}

MotionVariants resample_motion(GeneratorNets& nets, const torch::Tensor& z_content, std::int64_t n, Rng& rng,
                               const CoordinateGrid& grid) {
    if (n < 1) throw std::invalid_argument("resample_motion: n must be >= 1");
    const auto& cfg = nets->config();
    MotionVariants out;
    out.latents.z_content = z_content.reshape({1, cfg.dim_zI}).expand({n, cfg.dim_zI}).contiguous();
    out.latents.z_motion = sample_latents(rng, n, cfg).z_motion;
    for (std::int64_t i = 0; i < n; ++i) out.clips.push_back(synthesize(nets, out.latents.select(i), grid));
    for (std::int64_t i = 1; i < n; ++i) out.differences.push_back(difference_clip(out.clips[i], out.clips[0]));
    return out;
}

namespace {

torch::Tensor lerp(const torch::Tensor& a, const torch::Tensor& b, double lambda) {
    if (!a.sizes().equals(b.sizes())) throw ShapeError("weight_interpolate: parameter shapes differ");
    return (1.0 - lambda) * a + lambda * b;
}

double lerp(double a, double b, double lambda) { return (1.0 - lambda) * a + lambda * b; }

ModulatedLayer lerp(const ModulatedLayer& a, const ModulatedLayer& b, double lambda) {
    return {lerp(a.base, b.base, lambda), lerp(a.mod_a, b.mod_a, lambda), lerp(a.mod_b, b.mod_b, lambda),
            lerp(a.bias, b.bias, lambda)};
}

}  // namespace

std::pair<VideoINRParams, MotionHead> weight_interpolate(const VideoINRParams& p1, const MotionHead& m1,
                                                         const VideoINRParams& p2, const MotionHead& m2,
                                                         double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("weight_interpolate: lambda must be in [0, 1]");
    if (p1.body.layers.size() != p2.body.layers.size() || p1.body.stages != p2.body.stages)
        throw ShapeError("weight_interpolate: architectures differ");
    if (m1.flags.use_f_M != m2.flags.use_f_M || m1.flags.use_small_sigma_t != m2.flags.use_small_sigma_t ||
        m1.flags.use_z_M != m2.flags.use_z_M)
        throw ShapeError("weight_interpolate: motion heads use different settings");
    torch::NoGradGuard no_grad;
    VideoINRParams p;
    p.first.w_x = lerp(p1.first.w_x, p2.first.w_x, lambda);
    p.first.w_y = lerp(p1.first.w_y, p2.first.w_y, lambda);
    p.first.b = lerp(p1.first.b, p2.first.b, lambda);
    p.first.sigma_x = lerp(p1.first.sigma_x, p2.first.sigma_x, lambda);
    p.first.sigma_y = lerp(p1.first.sigma_y, p2.first.sigma_y, lambda);
    for (std::size_t i = 0; i < p1.body.layers.size(); ++i)
        p.body.layers.push_back(lerp(p1.body.layers[i], p2.body.layers[i], lambda));
    p.body.head = lerp(p1.body.head, p2.body.head, lambda);
    p.body.stages = p1.body.stages;
    MotionHead m;
    m.w_t = lerp(m1.w_t, m2.w_t, lambda);
    m.fm_in = lerp(m1.fm_in, m2.fm_in, lambda);
    m.fm_out = lerp(m1.fm_out, m2.fm_out, lambda);
    m.sigma_t = lerp(m1.sigma_t, m2.sigma_t, lambda);
    m.flags = m1.flags;
    return {p, m};
}

}  // namespace vidinr
