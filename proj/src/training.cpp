#include "vidinr/training.hpp"

#include <cmath>

#include "vidinr/archive.hpp"
#include "vidinr/errors.hpp"

namespace vidinr {

namespace F = torch::nn::functional;

// ----------------------------------------------------------------------------
// Adam
// ----------------------------------------------------------------------------

Adam::Adam(std::vector<torch::Tensor> params, Options opt) : params_(std::move(params)), opt_(opt) {
    for (const auto& p : params_) {
        m_.push_back(torch::zeros_like(p));
        v_.push_back(torch::zeros_like(p));
    }
}

void Adam::zero_grad() {
    for (auto& p : params_)
        if (p.grad().defined()) p.mutable_grad() = torch::Tensor();
}

void Adam::step() {
    torch::NoGradGuard no_grad;
    ++steps_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& g = params_[i].grad();
        if (!g.defined()) continue;
        m_[i].mul_(opt_.beta1).add_(g, 1.0 - opt_.beta1);
        v_[i].mul_(opt_.beta2).addcmul_(g, g, 1.0 - opt_.beta2);
        auto denom = (v_[i] / bc2).sqrt_().add_(opt_.eps);
        params_[i].addcdiv_(m_[i], denom, -opt_.lr / bc1);
    }
}

// ----------------------------------------------------------------------------
// Losses and regularization
// ----------------------------------------------------------------------------

GanLosses gan_losses(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
    return {F::softplus(-real_logits).mean() + F::softplus(fake_logits).mean(), F::softplus(-fake_logits).mean()};
}

torch::Tensor r1_penalty(const std::function<torch::Tensor(const torch::Tensor&)>& disc,
                         const torch::Tensor& real_inputs, double gamma) {
    if (gamma < 0) throw std::invalid_argument("r1_penalty: gamma must be >= 0");
    auto x = real_inputs.detach().requires_grad_(true);
    auto logits = disc(x);
    if (!logits.requires_grad())
        throw std::runtime_error("r1_penalty: discriminator output is not differentiable w.r.t. its input");
    auto grads = torch::autograd::grad({logits.sum()}, {x}, /*grad_outputs=*/{}, /*retain_graph=*/true,
                                       /*create_graph=*/true, /*allow_unused=*/true);
    if (!grads[0].defined()) return torch::zeros({}, real_inputs.options());
    auto sq = grads[0].square().flatten(1).sum(1);
    return sq.mean() * (gamma / 2.0);
}

double lazy_r1_weight(std::int64_t step, std::int64_t interval) {
    if (interval < 1) throw std::invalid_argument("lazy_r1_weight: interval must be >= 1");
    return step % interval == 0 ? static_cast<double>(interval) : 0.0;
}

// ----------------------------------------------------------------------------
// Differentiable augmentation
// ----------------------------------------------------------------------------

namespace {
constexpr double kTranslationRatio = 0.125;
}

AugmentParams draw_augment(Rng& rng, const std::set<std::string>& policy, std::int64_t height, std::int64_t width) {
    AugmentParams p;
    for (const auto& name : policy)
        if (name != "color" && name != "translation")
            throw std::invalid_argument("diffaug: unsupported policy '" + name + "'");
    if (policy.count("color")) {
        p.color = true;
        p.brightness = rng.uniform() - 0.5;
        p.saturation = rng.uniform() * 2.0;
        p.contrast = rng.uniform() + 0.5;
    }
    if (policy.count("translation")) {
        p.translation = true;
        const auto sx = static_cast<std::int64_t>(static_cast<double>(width) * kTranslationRatio + 0.5);
        const auto sy = static_cast<std::int64_t>(static_cast<double>(height) * kTranslationRatio + 0.5);
        p.shift_x = rng.integer(-sx, sx);
        p.shift_y = rng.integer(-sy, sy);
    }
    return p;
}

torch::Tensor apply_augment(const torch::Tensor& frames, const AugmentParams& p) {
    auto x = frames;
    if (p.color) {
        x = x + p.brightness;
        auto mean_c = x.mean(1, true);
        x = (x - mean_c) * p.saturation + mean_c;
        auto mean_all = x.mean({1, 2, 3}, true);
        x = (x - mean_all) * p.contrast + mean_all;
        x = x.clamp(-1.0, 1.0);
    }
    if (p.translation && (p.shift_x != 0 || p.shift_y != 0)) {
        const auto H = x.size(2), W = x.size(3);
        const auto px = std::abs(p.shift_x), py = std::abs(p.shift_y);
        auto padded = F::pad(x, F::PadFuncOptions({px, px, py, py}));
        // out(y, x) = in(y + shift_y, x + shift_x), zero outside
        x = padded.narrow(2, py + p.shift_y, H).narrow(3, px + p.shift_x, W);
    }
    return x;
}

torch::Tensor diffaug_video(const torch::Tensor& clips, Rng& rng, const std::set<std::string>& policy,
                            std::vector<AugmentParams>* log) {
    if (clips.dim() != 5) throw ShapeError("diffaug_video: expects [B, K, 3, H, W]");
    if (policy.empty()) return clips;
    std::vector<torch::Tensor> out;
    out.reserve(static_cast<std::size_t>(clips.size(0)));
    for (std::int64_t b = 0; b < clips.size(0); ++b) {
        const auto p = draw_augment(rng, policy, clips.size(3), clips.size(4));
        if (log) log->push_back(p);
        out.push_back(apply_augment(clips[b], p));
    }
    return torch::stack(out);
}

VideoClip diffaug_video(const VideoClip& clip, Rng& rng, const std::set<std::string>& policy) {
    return VideoClip(diffaug_video(clip.frames.unsqueeze(0), rng, policy)[0]);
}

// ----------------------------------------------------------------------------
// Train state
// ----------------------------------------------------------------------------

RngStreams RngStreams::from_seed(std::uint64_t seed) {
    return {Rng::derive(seed, "data"), Rng::derive(seed, "latent"), Rng::derive(seed, "time"),
            Rng::derive(seed, "augment")};
}

namespace {

std::vector<torch::Tensor> parameter_list(torch::nn::Module& m) { return m.parameters(true); }

void set_requires_grad(torch::nn::Module& m, bool flag) {
    for (auto& p : m.parameters(true)) p.set_requires_grad(flag);
}

void update_ema(GeneratorNets& ema, GeneratorNets& live, double beta) {
    torch::NoGradGuard no_grad;
    auto src = live->parameters(true);
    auto dst = ema->parameters(true);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].mul_(beta).add_(src[i], 1.0 - beta);
}

void require_finite(double v, const char* what, std::int64_t step) {
    if (!std::isfinite(v)) throw TrainingDiverged(std::string("non-finite ") + what + " at step " + std::to_string(step), step);
}

}  // namespace

TrainState make_train_state(const Config& config) {
    config.validate();
    TrainState s;
    s.config = config;
    torch::manual_seed(config.train.seed);
    s.generator = GeneratorNets(config.generator);
    s.discriminator = DiscriminatorNets(config.discriminator);
    s.generator_ema = clone_generator(s.generator);
    set_requires_grad(*s.generator_ema, false);
    const auto& t = config.train;
    s.opt_g = Adam(parameter_list(*s.generator), {t.lr_g, t.beta1, t.beta2, 1e-8});
    s.opt_d = Adam(parameter_list(*s.discriminator), {t.lr_d, t.beta1, t.beta2, 1e-8});
    s.rng = RngStreams::from_seed(t.seed);
    return s;
}

namespace {

struct FramePairs {
    torch::Tensor frames;  // [B, 2, 3, H, W]
    torch::Tensor delta;   // [B]
};

FramePairs real_pairs(const torch::Tensor& batch, Rng& rng) {
    const auto B = batch.size(0), T = batch.size(1);
    std::vector<torch::Tensor> pairs;
    std::vector<float> delta;
    for (std::int64_t b = 0; b < B; ++b) {
        const auto tp = sample_time_pair(rng);
        pairs.push_back(torch::stack({batch[b][nearest_frame_index(T, tp.t1)], batch[b][nearest_frame_index(T, tp.t2)]}));
        delta.push_back(static_cast<float>(tp.delta_t));
    }
    return {torch::stack(pairs), torch::tensor(delta)};
}

FramePairs fake_pairs(GeneratorNets& g, const LatentPair& z, Rng& rng, const torch::Tensor& xs, const torch::Tensor& ys) {
    const auto B = z.batch();
    auto times = torch::empty({B, 2}, torch::kFloat32);
    std::vector<float> delta;
    for (std::int64_t b = 0; b < B; ++b) {
        const auto tp = sample_time_pair(rng);
        times[b][0] = static_cast<float>(tp.t1);
        times[b][1] = static_cast<float>(tp.t2);
        delta.push_back(static_cast<float>(tp.delta_t));
    }
    auto [params, head] = g->forward(z);
    return {render_frames(params, head, xs, ys, times), torch::tensor(delta)};
}

struct HeadInputs {
    torch::Tensor image;   // [B, 3, H, W]
    torch::Tensor motion;  // [B, 7, H, W]
};

HeadInputs head_inputs(const torch::Tensor& pairs, const torch::Tensor& delta) {
    auto a = pairs.select(1, 0);
    auto b = pairs.select(1, 1);
    return {a, motion_input(a, b, delta)};
}

}  // namespace

StepStats train_step(TrainState& s, const torch::Tensor& real_batch) {
    const auto& cfg = s.config;
    const auto R = cfg.resolution();
    if (real_batch.dim() != 5 || real_batch.size(1) != cfg.train.frames || real_batch.size(2) != 3 ||
        real_batch.size(3) != R || real_batch.size(4) != R)
        throw ShapeError("train_step: real batch must be [B, " + std::to_string(cfg.train.frames) + ", 3, " +
                         std::to_string(R) + ", " + std::to_string(R) + "]");
    const auto B = real_batch.size(0);
    const auto grid = make_grid(R, R, 1);
    const auto xs = axis_tensor(grid.xs());
    const auto ys = axis_tensor(grid.ys());
    const auto& policy = cfg.train.diffaug;
    auto& D = s.discriminator;
    auto& G = s.generator;

    StepStats stats;
    stats.step = s.step;

    // Discriminator update.
    {
        set_requires_grad(*D, true);
        s.opt_d.zero_grad();
        auto real = real_pairs(real_batch, s.rng.time);
        FramePairs fake;
        {
            torch::NoGradGuard no_grad;
            fake = fake_pairs(G, sample_latents(s.rng.latent, B, cfg.generator), s.rng.time, xs, ys);
        }
        stats.frames_per_sample_d = fake.frames.size(1);
        auto real_in = head_inputs(diffaug_video(real.frames, s.rng.augment, policy), real.delta);
        auto fake_in = head_inputs(diffaug_video(fake.frames, s.rng.augment, policy), fake.delta);
        auto li = gan_losses(D->image->forward(real_in.image), D->image->forward(fake_in.image));
        auto lm = gan_losses(D->motion->forward(real_in.motion), D->motion->forward(fake_in.motion));
        auto loss = li.discriminator + lm.discriminator;
        stats.loss_d_image = li.discriminator.item<double>();
        stats.loss_d_motion = lm.discriminator.item<double>();
        const double w = cfg.train.r1_gamma > 0 ? lazy_r1_weight(s.step, cfg.train.r1_interval) : 0.0;
        if (w > 0) {
            auto r1 = r1_penalty([&](const torch::Tensor& x) { return D->image->forward(x); }, real_in.image.detach(),
                                 cfg.train.r1_gamma) +
                      r1_penalty([&](const torch::Tensor& x) { return D->motion->forward(x); },
                                 real_in.motion.detach(), cfg.train.r1_gamma);
            stats.r1 = r1.item<double>();
            loss = loss + r1 * w;
        }
        stats.loss_d = loss.item<double>();
        require_finite(stats.loss_d, "discriminator loss", s.step);
        loss.backward();
        s.opt_d.step();
    }

    // Generator update.
    {
        set_requires_grad(*D, false);
        s.opt_g.zero_grad();
        auto fake = fake_pairs(G, sample_latents(s.rng.latent, B, cfg.generator), s.rng.time, xs, ys);
        stats.frames_per_sample_g = fake.frames.size(1);
        stats.image_frames_per_sample = 1;
        auto fake_in = head_inputs(diffaug_video(fake.frames, s.rng.augment, policy), fake.delta);
        auto loss = F::softplus(-D->image->forward(fake_in.image)).mean() +
                    F::softplus(-D->motion->forward(fake_in.motion)).mean();
        stats.loss_g = loss.item<double>();
        require_finite(stats.loss_g, "generator loss", s.step);
        loss.backward();
        s.opt_g.step();
        set_requires_grad(*D, true);
    }

    const double steps_seen = static_cast<double>(s.step);
    const double beta = std::min(cfg.train.ema_decay, (1.0 + steps_seen) / (10.0 + steps_seen));
    update_ema(s.generator_ema, G, beta);
    ++s.step;
    return stats;
}

void train(TrainState& state, const torch::Tensor& dataset, std::int64_t steps,
           const std::function<void(const StepStats&)>& on_step) {
    if (dataset.dim() != 5 || dataset.size(0) < 1) throw ShapeError("train: dataset must be [N, T, 3, H, W]");
    const auto N = dataset.size(0);
    const auto B = state.config.train.batch_size;
    for (std::int64_t i = 0; i < steps; ++i) {
        auto idx = torch::empty({B}, torch::kLong);
        for (std::int64_t b = 0; b < B; ++b) idx[b] = state.rng.data.integer(0, N - 1);
        auto stats = train_step(state, dataset.index_select(0, idx));
        if (on_step) on_step(stats);
    }
}

// ----------------------------------------------------------------------------
// Checkpoints
// ----------------------------------------------------------------------------

namespace {

void add_module(TensorArchive& a, const std::string& prefix, const torch::nn::Module& m) {
    for (const auto& p : m.named_parameters(true)) a.records.push_back({prefix + p.key(), p.value().detach().clone()});
}

void add_optimizer(TensorArchive& a, const std::string& prefix, const Adam& opt) {
    a.records.push_back({prefix + "steps", torch::tensor({opt.steps()}, torch::kInt64)});
    for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
        a.records.push_back({prefix + "m/" + std::to_string(i), opt.first_moments()[i]});
        a.records.push_back({prefix + "v/" + std::to_string(i), opt.second_moments()[i]});
    }
}

void restore_module(const TensorArchive& a, const std::string& prefix, torch::nn::Module& m) {
    torch::NoGradGuard no_grad;
    for (auto& p : m.named_parameters(true)) {
        const auto name = prefix + p.key();
        if (!a.contains(name)) throw ParseError("checkpoint is missing tensor '" + name + "'", 0);
        const auto& src = a.at(name);
        if (!src.sizes().equals(p.value().sizes()) || src.scalar_type() != p.value().scalar_type())
            throw ParseError("checkpoint tensor '" + name + "' has the wrong shape", 0);
        p.value().copy_(src);
    }
}

void restore_optimizer(const TensorArchive& a, const std::string& prefix, Adam& opt) {
    torch::NoGradGuard no_grad;
    opt.set_steps(a.at(prefix + "steps").item<std::int64_t>());
    for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
        const auto& m = a.at(prefix + "m/" + std::to_string(i));
        const auto& v = a.at(prefix + "v/" + std::to_string(i));
        if (!m.sizes().equals(opt.first_moments()[i].sizes()) || !v.sizes().equals(opt.second_moments()[i].sizes()))
            throw ParseError("optimizer moment shape mismatch under '" + prefix + "'", 0);
        opt.first_moments()[i].copy_(m);
        opt.second_moments()[i].copy_(v);
    }
}

Config archive_config(const TensorArchive& a) {
    if (!a.contains("config")) throw ParseError("checkpoint has no config record", 0);
    auto cfg = Config::parse(tensor_text(a.at("config")));
    if (cfg.digest() != a.digest) throw ParseError("config digest mismatch", 12);
    return cfg;
}

}  // namespace

void save_checkpoint(const TrainState& s, const std::string& path) {
    TensorArchive a;
    a.digest = s.config.digest();
    a.records.push_back({"config", text_tensor(s.config.to_text())});
    a.records.push_back({"step", torch::tensor({s.step}, torch::kInt64)});
    a.records.push_back({"rng/data", text_tensor(s.rng.data.state())});
    a.records.push_back({"rng/latent", text_tensor(s.rng.latent.state())});
    a.records.push_back({"rng/time", text_tensor(s.rng.time.state())});
    a.records.push_back({"rng/augment", text_tensor(s.rng.augment.state())});
    add_module(a, "g/", *s.generator);
    add_module(a, "g_ema/", *s.generator_ema);
    add_module(a, "d/", *s.discriminator);
    add_optimizer(a, "opt_g/", s.opt_g);
    add_optimizer(a, "opt_d/", s.opt_d);
    write_archive(path, a);
}

TrainState load_checkpoint(const std::string& path) {
    const auto a = read_archive(path);
    auto s = make_train_state(archive_config(a));
    try {
        s.step = a.at("step").item<std::int64_t>();
        s.rng.data.set_state(tensor_text(a.at("rng/data")));
        s.rng.latent.set_state(tensor_text(a.at("rng/latent")));
        s.rng.time.set_state(tensor_text(a.at("rng/time")));
        s.rng.augment.set_state(tensor_text(a.at("rng/augment")));
        restore_optimizer(a, "opt_g/", s.opt_g);
        restore_optimizer(a, "opt_d/", s.opt_d);
    } catch (const std::out_of_range& e) {
        throw ParseError(std::string("incomplete checkpoint: ") + e.what(), 0);
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("bad checkpoint record: ") + e.what(), 0);
    }
    restore_module(a, "g/", *s.generator);
    restore_module(a, "g_ema/", *s.generator_ema);
    restore_module(a, "d/", *s.discriminator);
    return s;
}

GeneratorNets load_generator(const std::string& path, Config* config) {
    const auto a = read_archive(path);
    auto cfg = archive_config(a);
    GeneratorNets g(cfg.generator);
    restore_module(a, "g_ema/", *g);
    for (auto& p : g->parameters(true)) p.set_requires_grad(false);
    if (config) *config = cfg;
    return g;
}

DiscriminatorNets load_discriminator(const std::string& path) {
    const auto a = read_archive(path);
    auto cfg = archive_config(a);
    DiscriminatorNets d(cfg.discriminator);
    restore_module(a, "d/", *d);
    return d;
}

bool same_parameters(const torch::nn::Module& a, const torch::nn::Module& b) {
    auto pa = a.named_parameters(true);
    auto pb = b.named_parameters(true);
    if (pa.size() != pb.size()) return false;
    for (const auto& item : pa) {
        const auto* other = pb.find(item.key());
        if (!other || !torch::equal(item.value(), *other)) return false;
    }
    return true;
}

}  // namespace vidinr
