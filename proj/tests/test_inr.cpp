#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "vidinr/errors.hpp"
#include "vidinr/generator.hpp"
#include "vidinr/inr.hpp"

using namespace vidinr;
using vidinr::test::bitwise_equal;

namespace {

std::pair<VideoINRParams, MotionHead> random_inr(std::uint64_t seed, GeneratorConfig cfg = test::tiny_generator()) {
    torch::manual_seed(seed);
    GeneratorNets nets(cfg);
    Rng rng(seed);
    torch::NoGradGuard no_grad;
    return nets->forward(sample_latents(rng, 1, cfg));
}

double lrelu(double v) { return v >= 0 ? v : kLeakySlope * v; }

}  // namespace

TEST_SUITE("inr") {

TEST_CASE("first layer matches the scalar formula") {
    auto [p, m] = random_inr(1);
    const auto d = p.first.hidden();
    auto motion = torch::randn({1, d});
    const double x = 0.3, y = 0.8;
    const auto out = first_layer(p.first, x, y, motion);
    for (std::int64_t j = 0; j < d; ++j) {
        const double pre = p.first.sigma_x * p.first.w_x[0][j].item<double>() * x +
                           p.first.sigma_y * p.first.w_y[0][j].item<double>() * y + motion[0][j].item<double>() +
                           p.first.b[0][j].item<double>();
        CHECK(out[0][j].item<double>() == doctest::Approx(std::sin(pre)).epsilon(1e-5));
    }
}

TEST_CASE("motion feature matches f_M(sigma_t * w_t * t) by scalar loops") {
    auto [p, m] = random_inr(2);
    const auto d = m.w_t.size(1);
    const double t = 0.7;
    const auto f = motion_feature(m, torch::full({1, 1}, static_cast<float>(t)));
    std::vector<double> u(static_cast<std::size_t>(d)), h(static_cast<std::size_t>(d));
    for (std::int64_t j = 0; j < d; ++j) u[j] = m.sigma_t * m.w_t[0][j].item<double>() * t;
    for (std::int64_t i = 0; i < d; ++i) {
        double acc = 0;
        for (std::int64_t j = 0; j < d; ++j) acc += m.fm_in[0][i][j].item<double>() * u[j];
        h[i] = lrelu(acc);
    }
    for (std::int64_t i = 0; i < d; ++i) {
        double acc = 0;
        for (std::int64_t j = 0; j < d; ++j) acc += m.fm_out[0][i][j].item<double>() * h[j];
        CHECK(f[0][0][i].item<double>() == doctest::Approx(acc).epsilon(1e-4).scale(1e-5));
    }

    m.flags.use_f_M = false;
    const auto raw = motion_feature(m, torch::full({1, 1}, static_cast<float>(t)));
    for (std::int64_t j = 0; j < d; ++j) CHECK(raw[0][0][j].item<double>() == doctest::Approx(u[j]).epsilon(1e-5));
}

TEST_CASE("motion feature vanishes at t = 0") {
    auto [p, m] = random_inr(3);
    CHECK(test::max_abs(motion_feature(m, torch::zeros({1, 3}))) == 0.0);
}

TEST_CASE("zero body weights and zero output bias give an all-zero clip") {
    auto [p, m] = random_inr(4);
    for (auto& l : p.body.layers) l.base = torch::zeros_like(l.base);
    p.body.head.base = torch::zeros_like(p.body.head.base);
    p.body.head.bias = torch::zeros_like(p.body.head.bias);
    const auto clip = decode(p, m, make_subgrid(5, 7, 3, {-1, 2}, {0, 1}, {0, 3}));
    CHECK(test::max_abs(clip.frames) == 0.0);
}

TEST_CASE("decoded clips have the grid's shape and stay in [-1, 1]") {
    auto [p, m] = random_inr(5);
    const auto clip = decode(p, m, make_grid(6, 5, 4));
    CHECK(clip.frames.sizes().equals({4, 3, 6, 5}));
    CHECK(clip.frames.abs().max().item<float>() <= 1.0f);
    CHECK(torch::isfinite(clip.frames).all().item<bool>());
}

TEST_CASE("t = 0 frame does not depend on the motion head") {
    const auto cfg = test::tiny_generator();
    torch::manual_seed(6);
    GeneratorNets nets(cfg);
    Rng rng(6);
    torch::NoGradGuard no_grad;
    auto z = sample_latents(rng, 2, cfg);
    z.z_content[1].copy_(z.z_content[0]);
    auto [pb, mb] = nets->forward(z);
    const auto p = pb.select(0);
    const auto m1 = mb.select(0);
    const auto m2 = mb.select(1);
    CHECK(bitwise_equal(pb.select(1).first.w_x, p.first.w_x));
    const auto g = make_grid(8, 8, 3);
    const auto a = decode(p, m1, g);
    const auto b = decode(p, m2, g);
    CHECK(bitwise_equal(a.frame(0), b.frame(0)));
    CHECK_FALSE(bitwise_equal(a.frame(2), b.frame(2)));
}

TEST_CASE("coordinate subsets decode bitwise identically") {
    auto [p, m] = random_inr(8);
    const auto base = decode(p, m, make_grid(9, 9, 5));
    const auto up = decode(p, m, make_grid(17, 17, 5));
    using torch::indexing::Slice;
    CHECK(bitwise_equal(up.frames.index({Slice(), Slice(), Slice(0, 17, 2), Slice(0, 17, 2)}).contiguous(), base.frames));

    const auto zoom = decode(p, m, make_subgrid(13, 13, 5, {-0.25, 1.25}, {-0.25, 1.25}, {0, 1}));
    CHECK(bitwise_equal(zoom.frames.index({Slice(), Slice(), Slice(2, 11), Slice(2, 11)}).contiguous(), base.frames));

    const auto fine_t = decode(p, m, refine_time(make_grid(9, 9, 5), 4));
    CHECK(bitwise_equal(fine_t.frames.index({Slice(0, 17, 4)}).contiguous(), base.frames));

    const auto single = decode(p, m, make_grid(9, 9, 5).frame(3));
    CHECK(bitwise_equal(single.frame(0), base.frame(3)));
}

TEST_CASE("parallel decode equals serial decode") {
    auto [p, m] = random_inr(9);
    const auto g = make_grid(12, 12, 7);
    const auto serial = decode(p, m, g);
    for (int workers : {1, 2, 3, 8}) {
        const auto par = decode_parallel(p, m, g, workers);
        CHECK(max_abs_diff(serial, par) <= 1e-6f);
    }
}

TEST_CASE("batched rendering matches per-sample decode") {
    auto cfg = test::tiny_generator();
    torch::manual_seed(10);
    GeneratorNets nets(cfg);
    Rng rng(10);
    torch::NoGradGuard no_grad;
    const auto z = sample_latents(rng, 3, cfg);
    auto [p, m] = nets->forward(z);
    const auto g = make_grid(6, 6, 4);
    const auto batch = render_frames(p, m, axis_tensor(g.xs()), axis_tensor(g.ys()),
                                     axis_tensor(g.ts()).unsqueeze(0).expand({3, 4}).contiguous());
    for (std::int64_t i = 0; i < 3; ++i) {
        const auto single = decode(p.select(i), m.select(i), g);
        CHECK((batch[i] - single.frames).abs().max().item<float>() <= 1e-5f);
    }
}

TEST_CASE("progressive stages preserve shapes and subset identities") {
    auto cfg = test::tiny_generator();
    cfg.progressive_stages = 2;
    auto [p, m] = random_inr(11, cfg);
    const auto clip = decode(p, m, make_grid(8, 8, 2));
    CHECK(clip.frames.sizes().equals({2, 3, 8, 8}));
    CHECK(torch::isfinite(clip.frames).all().item<bool>());
    const auto single = decode(p, m, make_grid(8, 8, 2).frame(1));
    CHECK(bitwise_equal(single.frame(0), clip.frame(1)));
}

TEST_CASE("shape validation") {
    auto [p, m] = random_inr(12);
    CHECK_NOTHROW(p.validate());
    auto bad = p;
    bad.body.head.bias = torch::zeros({1, 4});
    CHECK_THROWS_AS(bad.validate(), ShapeError);
    auto chain = p;
    chain.body.layers[0].base = torch::zeros({16, 15});
    CHECK_THROWS_AS(chain.validate(), ShapeError);
    CHECK_THROWS_AS(first_layer(p.first, 0, 0, torch::zeros({1, 3})), ShapeError);
    CHECK_THROWS_AS(motion_feature(m, torch::zeros({2, 3})), ShapeError);
    auto batch2 = m;
    batch2.w_t = torch::cat({m.w_t, m.w_t});
    CHECK_THROWS_AS(decode(p, batch2, make_grid(2, 2, 2)), ShapeError);
}

TEST_CASE("modulated weight equals base times the low-rank product") {
    auto [p, m] = random_inr(13);
    const auto& l = p.body.layers[0];
    const auto w = l.effective_weight();
    for (int trial = 0; trial < 5; ++trial) {
        const auto o = trial * 3 % l.fan_out(), i = trial * 5 % l.fan_in();
        double ab = 0;
        for (std::int64_t r = 0; r < l.rank(); ++r) ab += l.mod_a[0][o][r].item<double>() * l.mod_b[0][r][i].item<double>();
        CHECK(w[0][o][i].item<double>() == doctest::Approx(l.base[o][i].item<double>() * ab).epsilon(1e-5));
    }
    CHECK(p.body.head.rank() <= 3);
}

}
