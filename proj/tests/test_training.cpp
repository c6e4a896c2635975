#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "helpers.hpp"
#include "vidinr/archive.hpp"
#include "vidinr/data.hpp"
#include "vidinr/errors.hpp"
#include "vidinr/training.hpp"

using namespace vidinr;
using vidinr::test::bitwise_equal;

namespace {

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

torch::Tensor tiny_dataset(const Config& cfg) {
    return torch::rand({4, cfg.train.frames, 3, cfg.resolution(), cfg.resolution()},
                       torch::TensorOptions().dtype(torch::kFloat32)) * 2 - 1;
}

torch::Tensor dataset_for(const Config& cfg) {
    torch::manual_seed(99);
    return tiny_dataset(cfg);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("logistic losses at zero logits") {
    auto l = gan_losses(torch::zeros({4}), torch::zeros({4}));
    CHECK(l.discriminator.item<double>() == doctest::Approx(2.0 * std::log(2.0)));
    CHECK(l.generator.item<double>() == doctest::Approx(std::log(2.0)));
}

TEST_CASE("discriminator loss vanishes at confident logits") {
    auto l = gan_losses(torch::full({3}, 60.0f), torch::full({3}, -60.0f));
    CHECK(l.discriminator.item<double>() < 1e-20);
}

TEST_CASE("losses match a scalar loop") {
    torch::manual_seed(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto real = torch::randn({5}) * 3, fake = torch::randn({5}) * 3;
        double d = 0.0, g = 0.0;
        for (int i = 0; i < 5; ++i) {
            d += softplus(-real[i].item<double>()) / 5 + softplus(fake[i].item<double>()) / 5;
            g += softplus(-fake[i].item<double>()) / 5;
        }
        auto l = gan_losses(real, fake);
        CHECK(l.discriminator.item<double>() == doctest::Approx(d).epsilon(1e-5));
        CHECK(l.generator.item<double>() == doctest::Approx(g).epsilon(1e-5));
    }
}

TEST_CASE("R1 of a constant discriminator is zero") {
    auto x = torch::rand({2, 3, 4, 4});
    auto c = torch::ones({}, torch::requires_grad());
    auto r1 = r1_penalty([&](const torch::Tensor& in) { return (in * 0).sum({1, 2, 3}) + c; }, x, 10.0);
    CHECK(r1.item<double>() == 0.0);
}

TEST_CASE("R1 of a linear discriminator is (γ/2)·‖a‖²") {
    torch::manual_seed(8);
    auto a = torch::randn({3, 4, 4});
    auto x = torch::rand({2, 3, 4, 4});
    const double gamma = 3.0;
    auto r1 = r1_penalty([&](const torch::Tensor& in) { return (in * a).sum({1, 2, 3}); }, x, gamma);
    CHECK(r1.item<double>() == doctest::Approx(gamma / 2.0 * a.square().sum().item<double>()).epsilon(1e-5));
}

TEST_CASE("R1 matches a central finite-difference gradient") {
    torch::manual_seed(9);
    torch::NoGradGuard outer;  // enable only where needed below
    DiscriminatorConfig cfg{4, 2, false};
    ConvDiscriminator d(kImageChannels, cfg);
    d->to(torch::kFloat64);
    auto x = (torch::rand({1, 3, 4, 4}, torch::kFloat64) * 2 - 1);
    torch::Tensor r1;
    {
        torch::AutoGradMode on(true);
        r1 = r1_penalty([&](const torch::Tensor& in) { return d->forward(in); }, x, 2.0);
    }
    const double h = 1e-5;
    double norm2 = 0.0;
    auto flat = x.view({-1});
    for (std::int64_t i = 0; i < flat.numel(); ++i) {
        auto xp = x.clone(), xm = x.clone();
        xp.view({-1})[i] += h;
        xm.view({-1})[i] -= h;
        const double g = (d->forward(xp).item<double>() - d->forward(xm).item<double>()) / (2 * h);
        norm2 += g * g;
    }
    CHECK(r1.item<double>() == doctest::Approx(norm2).epsilon(1e-4));
}

TEST_CASE("R1 rejects a non-differentiable path") {
    auto x = torch::rand({1, 3, 4, 4});
    CHECK_THROWS_AS(r1_penalty([](const torch::Tensor& in) { return in.detach().sum({1, 2, 3}); }, x, 1.0),
                    std::runtime_error);
}

TEST_CASE("lazy R1 weight") {
    CHECK(lazy_r1_weight(0, 16) == 16.0);
    CHECK(lazy_r1_weight(5, 16) == 0.0);
    CHECK(lazy_r1_weight(32, 16) == 16.0);
    CHECK(lazy_r1_weight(3, 1) == 1.0);
    CHECK_THROWS_AS(lazy_r1_weight(0, 0), std::invalid_argument);
}

TEST_CASE("empty augmentation policy is the identity") {
    Rng rng(1);
    auto clips = torch::rand({2, 4, 3, 8, 8});
    CHECK(bitwise_equal(diffaug_video(clips, rng, {}), clips));
}

TEST_CASE("a static clip stays static under augmentation") {
    Rng rng(2);
    auto frame = torch::rand({1, 1, 3, 8, 8}) * 2 - 1;
    auto clips = frame.expand({3, 16, 3, 8, 8}).contiguous();
    for (int trial = 0; trial < 10; ++trial) {
        auto out = diffaug_video(clips, rng, {"color", "translation"});
        for (std::int64_t b = 0; b < 3; ++b)
            for (std::int64_t k = 1; k < 16; ++k) REQUIRE(bitwise_equal(out[b][k], out[b][0]));
    }
}

TEST_CASE("one transform is applied to every frame of a clip") {
    Rng rng(3);
    auto clips = torch::rand({2, 16, 3, 8, 8}) * 2 - 1;
    std::vector<AugmentParams> log;
    auto out = diffaug_video(clips, rng, {"color", "translation"}, &log);
    REQUIRE(log.size() == 2);
    for (std::int64_t b = 0; b < 2; ++b) {
        CHECK(log[b].color);
        CHECK(log[b].translation);
        for (std::int64_t k = 0; k < 16; ++k)
            CHECK(bitwise_equal(out[b][k], apply_augment(clips[b][k].unsqueeze(0), log[b])[0]));
    }
    // Same seed, same draws.
    Rng again(3);
    std::vector<AugmentParams> log2;
    diffaug_video(clips, again, {"color", "translation"}, &log2);
    CHECK((log == log2));
    CHECK_THROWS_AS(diffaug_video(clips, rng, {"cutout"}), std::invalid_argument);
}

TEST_CASE("augmented values are differentiable and in range") {
    Rng rng(4);
    auto clips = (torch::rand({2, 4, 3, 8, 8}) * 2 - 1).requires_grad_(true);
    auto out = diffaug_video(clips, rng, {"color", "translation"});
    CHECK(out.min().item<double>() >= -1.0);
    CHECK(out.max().item<double>() <= 1.0);
    out.sum().backward();
    CHECK(clips.grad().defined());
}

TEST_CASE("zero learning rates leave parameters unchanged") {
    auto cfg = test::tiny_config();
    cfg.train.lr_g = 0.0;
    cfg.train.lr_d = 0.0;
    auto state = make_train_state(cfg);
    auto g0 = clone_generator(state.generator);
    DiscriminatorNets d0(cfg.discriminator);
    {
        torch::NoGradGuard no_grad;
        auto src = state.discriminator->parameters();
        auto dst = d0->parameters();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i].copy_(src[i]);
    }
    const auto data = dataset_for(cfg);
    train(state, data, 3);
    CHECK(state.step == 3);
    CHECK(same_parameters(*state.generator, *g0));
    CHECK(same_parameters(*state.discriminator, *d0));
    auto e = state.generator_ema->parameters(), g = g0->parameters();
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(test::max_abs(e[i] - g[i]) < 1e-6);
}

TEST_CASE("training steps report finite losses and the frame budget") {
    auto cfg = test::tiny_config();
    auto state = make_train_state(cfg);
    std::vector<StepStats> seen;
    train(state, dataset_for(cfg), 2, [&](const StepStats& s) { seen.push_back(s); });
    REQUIRE(seen.size() == 2);
    for (const auto& s : seen) {
        CHECK(std::isfinite(s.loss_d));
        CHECK(std::isfinite(s.loss_g));
        CHECK(s.frames_per_sample_d == 2);
        CHECK(s.frames_per_sample_g == 2);
    }
    CHECK(seen[0].r1 > 0.0);
    CHECK(seen[1].r1 == 0.0);
    CHECK_THROWS_AS(train_step(state, torch::zeros({2, 3, 3, 8, 8})), ShapeError);
}

TEST_CASE("EMA follows the live generator with the ramped decay") {
    auto cfg = test::tiny_config();
    auto state = make_train_state(cfg);
    auto before = clone_generator(state.generator_ema);
    train(state, dataset_for(cfg), 1);
    // step 0: β = min(decay, 1/10)
    auto live = state.generator->parameters();
    auto ema = state.generator_ema->parameters();
    auto old = before->parameters();
    for (std::size_t i = 0; i < live.size(); ++i)
        CHECK(test::max_abs(ema[i] - (old[i] * 0.1 + live[i] * 0.9)) < 1e-6);
}

TEST_CASE("fixed seed gives bitwise-identical training states") {
    auto cfg = test::tiny_config();
    const auto data = dataset_for(cfg);
    auto a = make_train_state(cfg);
    auto b = make_train_state(cfg);
    train(a, data, 3);
    train(b, data, 3);
    CHECK(same_parameters(*a.generator, *b.generator));
    CHECK(same_parameters(*a.generator_ema, *b.generator_ema));
    CHECK(same_parameters(*a.discriminator, *b.discriminator));
    test::TempDir dir("determinism");
    save_checkpoint(a, dir.str("a.ckpt"));
    save_checkpoint(b, dir.str("b.ckpt"));
    CHECK(read_file(dir.str("a.ckpt")) == read_file(dir.str("b.ckpt")));
}

TEST_CASE("checkpoint round trip and resume") {
    auto cfg = test::tiny_config();
    const auto data = dataset_for(cfg);
    test::TempDir dir("ckpt");
    auto uninterrupted = make_train_state(cfg);
    std::vector<StepStats> full;
    train(uninterrupted, data, 4, [&](const StepStats& s) { full.push_back(s); });

    auto first = make_train_state(cfg);
    train(first, data, 2);
    save_checkpoint(first, dir.str("mid.ckpt"));
    auto resumed = load_checkpoint(dir.str("mid.ckpt"));
    CHECK(resumed.step == 2);
    CHECK(same_parameters(*resumed.generator, *first.generator));
    CHECK(same_parameters(*resumed.generator_ema, *first.generator_ema));
    CHECK(same_parameters(*resumed.discriminator, *first.discriminator));
    CHECK(resumed.config.to_text() == cfg.to_text());
    std::vector<StepStats> rest;
    train(resumed, data, 2, [&](const StepStats& s) { rest.push_back(s); });
    CHECK(rest.back().loss_g == full.back().loss_g);
    CHECK(rest.back().loss_d == full.back().loss_d);
    CHECK(same_parameters(*resumed.generator, *uninterrupted.generator));

    Config loaded;
    auto g = load_generator(dir.str("mid.ckpt"), &loaded);
    CHECK(same_parameters(*g, *first.generator_ema));
    CHECK(loaded.digest() == cfg.digest());
}

TEST_CASE("truncated or corrupted checkpoints raise a parse error") {
    auto cfg = test::tiny_config();
    auto state = make_train_state(cfg);
    test::TempDir dir("corrupt");
    save_checkpoint(state, dir.str("ok.ckpt"));
    const auto bytes = read_file(dir.str("ok.ckpt"));
    for (const std::size_t keep : {std::size_t{0}, std::size_t{7}, bytes.size() / 2, bytes.size() - 1}) {
        std::ofstream(dir.str("bad.ckpt"), std::ios::binary) << bytes.substr(0, keep);
        CHECK_THROWS_AS(load_checkpoint(dir.str("bad.ckpt")), ParseError);
    }
    auto flipped = bytes;
    flipped[bytes.size() / 3] = static_cast<char>(flipped[bytes.size() / 3] ^ 0x5a);
    std::ofstream(dir.str("flip.ckpt"), std::ios::binary) << flipped;
    CHECK_THROWS_AS(load_checkpoint(dir.str("flip.ckpt")), ParseError);
}

TEST_CASE("Adam matches the closed-form first step") {
    auto p = torch::tensor({1.0f, -2.0f}).requires_grad_(true);
    Adam opt({p}, {0.1, 0.0, 0.99, 1e-8});
    (p * torch::tensor({3.0f, -0.5f})).sum().backward();
    opt.step();
    // First bias-corrected step moves each coordinate by lr·sign(g).
    CHECK(p[0].item<double>() == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(p[1].item<double>() == doctest::Approx(-1.9).epsilon(1e-6));
    CHECK(opt.steps() == 1);
}

}
