#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "vidinr/errors.hpp"
#include "vidinr/metrics.hpp"

using namespace vidinr;

namespace {

Matrix random_spd(Rng& rng, int d) {
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
    return a * a.transpose() + 0.1 * Matrix::Identity(d, d);
}

// Tr((Σ1Σ2)^{1/2}) as the sum of square roots of the (real, non-negative)
// eigenvalues of the non-symmetric product.
double trace_sqrt_product(const Matrix& s1, const Matrix& s2) {
    Eigen::EigenSolver<Matrix> es(s1 * s2);
    double tr = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
    return tr;
}

double cubic(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    const double v = dot / static_cast<double>(a.size()) + 1.0;
    return v * v * v;
}

// Naive SSIM: full 2D Gaussian window slid over every valid position.
double naive_ssim_plane(const torch::Tensor& x, const torch::Tensor& y, int win) {
    const auto H = x.size(0), W = x.size(1);
    std::vector<std::vector<double>> w(win, std::vector<double>(win));
    double sum = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double di = i - win / 2, dj = j - win / 2;
            w[i][j] = std::exp(-(di * di + dj * dj) / (2 * 1.5 * 1.5));
            sum += w[i][j];
        }
    const double c1 = std::pow(0.01 * 2, 2), c2 = std::pow(0.03 * 2, 2);
    auto xa = x.accessor<double, 2>(), ya = y.accessor<double, 2>();
    double total = 0.0;
    int count = 0;
    for (std::int64_t r = 0; r + win <= H; ++r)
        for (std::int64_t c = 0; c + win <= W; ++c) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double k = w[i][j] / sum, a = xa[r + i][c + j], b = ya[r + i][c + j];
                    mx += k * a;
                    my += k * b;
                    sxx += k * a * a;
                    syy += k * b * b;
                    sxy += k * a * b;
                }
            const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
            total += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / count;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("Fréchet distance closed forms") {
    Rng rng(1);
    const auto s = random_spd(rng, 4);
    Vector mu(4);
    mu << 0.5, -1, 2, 0;
    CHECK(std::abs(frechet_distance(mu, s, mu, s)) < 1e-8);
    Vector d(4);
    d << 1, 2, -2, 0.5;
    CHECK(frechet_distance(mu, s, mu + d, s) == doctest::Approx(d.squaredNorm()).epsilon(1e-8));
    // Diagonal covariances: Σ (√a − √b)².
    Matrix a = Vector::LinSpaced(3, 1, 3).asDiagonal(), b = Vector::LinSpaced(3, 4, 2).asDiagonal();
    double want = 0.0;
    for (int i = 0; i < 3; ++i) want += std::pow(std::sqrt(a(i, i)) - std::sqrt(b(i, i)), 2);
    CHECK(frechet_distance(Vector::Zero(3), a, Vector::Zero(3), b) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("Fréchet distance on random SPD pairs matches an eigenvalue route") {
    Rng rng(2);
    for (int trial = 0; trial < 25; ++trial) {
        const auto s1 = random_spd(rng, 5), s2 = random_spd(rng, 5);
        Vector m1(5), m2(5);
        for (int i = 0; i < 5; ++i) m1(i) = rng.normal(), m2(i) = rng.normal();
        const double want = (m1 - m2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * trace_sqrt_product(s1, s2);
        CHECK(frechet_distance(m1, s1, m2, s2) == doctest::Approx(want).epsilon(1e-7));
    }
}

TEST_CASE("matrix square root and symmetrized product") {
    Rng rng(3);
    const auto s = random_spd(rng, 6);
    const auto r = sqrtm_psd(s);
    CHECK((r * r - s).norm() < 1e-9 * s.norm());
    CHECK((r - r.transpose()).norm() < 1e-12);
    const auto s2 = random_spd(rng, 6);
    const auto p = symmetrized_product(s, s2);
    CHECK(p.trace() == doctest::Approx((s * s2).trace()).epsilon(1e-9));
    CHECK_THROWS_AS(frechet_distance(Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(3), Matrix::Identity(3, 3)),
                    ShapeError);
}

TEST_CASE("Gaussian fit uses the unbiased covariance") {
    Matrix f(3, 2);
    f << 1, 2, 3, 4, 5, 9;
    const auto g = fit_gaussian(f);
    CHECK(g.mean(0) == doctest::Approx(3.0));
    CHECK(g.mean(1) == doctest::Approx(5.0));
    CHECK(g.cov(0, 0) == doctest::Approx(4.0));
    CHECK(g.cov(1, 1) == doctest::Approx(13.0));
    CHECK(g.cov(0, 1) == doctest::Approx(7.0));
}

TEST_CASE("kernel distance of two point masses matches hand-computed sums") {
    const std::vector<double> a{1.0, 0.0}, b{0.0, -3.0};
    Matrix x(2, 2), y(2, 2);
    x << 1, 0, 1, 0;
    y << 0, -3, 0, -3;
    const double want = cubic(a, a) + cubic(b, b) - 2.0 * cubic(a, b);
    CHECK(kernel_distance(x, y) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("kernel distance of a set with itself") {
    SUBCASE("identical points give zero") {
        Matrix x = Matrix::Constant(100, 4, 0.3);
        CHECK(std::abs(kernel_distance(x, x)) < 1e-12);
    }
    SUBCASE("unbiased over identical-distribution draws") {
        Rng rng(4);
        std::vector<double> values;
        for (int trial = 0; trial < 60; ++trial) {
            Matrix x(100, 3), y(100, 3);
            for (int i = 0; i < 100; ++i)
                for (int j = 0; j < 3; ++j) x(i, j) = rng.normal(), y(i, j) = rng.normal();
            values.push_back(kernel_distance(x, y));
        }
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        const double se = std::sqrt(var / (values.size() - 1) / values.size());
        CHECK(std::abs(mean) < 4.0 * se);
    }
}

TEST_CASE("kernel distance is invariant to sample order") {
    Rng rng(5);
    Matrix x(40, 3), y(30, 3);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 3; ++j) x(i, j) = rng.normal() + 0.5;
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 3; ++j) y(i, j) = rng.normal();
    const double base = kernel_distance(x, y);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<int> px(40), py(30);
        std::iota(px.begin(), px.end(), 0);
        std::iota(py.begin(), py.end(), 0);
        std::shuffle(px.begin(), px.end(), rng.engine());
        std::shuffle(py.begin(), py.end(), rng.engine());
        Matrix xs(40, 3), ys(30, 3);
        for (int i = 0; i < 40; ++i) xs.row(i) = x.row(px[i]);
        for (int i = 0; i < 30; ++i) ys.row(i) = y.row(py[i]);
        CHECK(kernel_distance(xs, ys) == base);
    }
    CHECK_THROWS_AS(kernel_distance(x.topRows(1), y), std::invalid_argument);
}

TEST_CASE("inception score limits") {
    CHECK(inception_score(Matrix::Constant(5, 4, 0.25)) == doctest::Approx(1.0));
    Matrix onehot = Matrix::Zero(20, 10);
    for (int i = 0; i < 20; ++i) onehot(i, i % 10) = 1.0;
    CHECK(inception_score(onehot) == doctest::Approx(10.0));
    Matrix bad = Matrix::Constant(2, 2, 0.4);
    CHECK_THROWS_AS(inception_score(bad), std::invalid_argument);
}

TEST_CASE("inception score on random 6x3 matrices matches a KL loop") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix p(6, 3);
        for (int i = 0; i < 6; ++i) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += (p(i, k) = rng.uniform() + 1e-3);
            p.row(i) /= s;
        }
        double kl = 0.0;
        for (int i = 0; i < 6; ++i)
            for (int k = 0; k < 3; ++k) {
                double marginal = 0.0;
                for (int j = 0; j < 6; ++j) marginal += p(j, k) / 6.0;
                kl += p(i, k) * std::log(p(i, k) / marginal);
            }
        CHECK(inception_score(p) == doctest::Approx(std::exp(kl / 6.0)).epsilon(1e-10));
    }
}

TEST_CASE("SSIM identity and constant clips") {
    torch::manual_seed(7);
    VideoClip a(torch::rand({2, 3, 16, 16}) * 2 - 1);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    VideoClip c1(torch::full({1, 3, 12, 12}, 0.2)), c2(torch::full({1, 3, 12, 12}, -0.4));
    const double C1 = std::pow(0.01 * 2, 2);
    CHECK(ssim(c1, c2) == doctest::Approx((2 * 0.2 * -0.4 + C1) / (0.04 + 0.16 + C1)).epsilon(1e-6));
    CHECK_THROWS_AS(ssim(a, c1), ShapeError);
}

TEST_CASE("SSIM matches a sliding-window reference") {
    torch::manual_seed(8);
    for (const auto size : {16, 7}) {
        auto x = torch::rand({2, 3, size, size}, torch::kFloat64) * 2 - 1;
        auto y = (x + 0.3 * torch::randn_like(x)).clamp(-1, 1);
        const int win = size >= 11 ? 11 : (size % 2 ? size : size - 1);
        double want = 0.0;
        for (int k = 0; k < 2; ++k)
            for (int c = 0; c < 3; ++c) want += naive_ssim_plane(x[k][c], y[k][c], win) / 6.0;
        CHECK(ssim(VideoClip(x.to(torch::kFloat32)), VideoClip(y.to(torch::kFloat32))) ==
              doctest::Approx(want).epsilon(1e-5));
    }
}

TEST_CASE("PSNR") {
    auto a = torch::zeros({3, 4, 4});
    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, a + 0.02) == doctest::Approx(10.0 * std::log10(4.0 / 0.0004)).epsilon(1e-5));
    CHECK_THROWS_AS(psnr(a, torch::zeros({3, 4, 5})), ShapeError);
}

TEST_CASE("metric names") {
    CHECK(parse_metric("fvd") == Metric::fvd);
    CHECK(parse_metric("KVD") == Metric::kvd);
    CHECK(metric_name(parse_metric("is")) == "IS");
    CHECK_THROWS_AS(parse_metric("lpips"), std::invalid_argument);
}

TEST_CASE("score protocol is deterministic and runs=1 has zero spread") {
    auto cfg = test::tiny_generator();
    torch::manual_seed(9);
    GeneratorNets nets(cfg);
    RandomProjectionEmbedder emb(6, 1);
    auto gen = generator_source(nets, 8, 8, 4);
    auto real = pool_source(torch::rand({12, 4, 3, 8, 8}) * 2 - 1);
    const auto a = score_protocol(gen, real, emb, Metric::fvd, 3, 10, 5);
    const auto b = score_protocol(gen, real, emb, Metric::fvd, 3, 10, 5);
    CHECK(a == b);
    CHECK(a.runs == 3);
    CHECK(a.values.size() == 3);
    CHECK(a.std > 0.0);
    const auto one = score_protocol(gen, real, emb, Metric::kvd, 1, 10, 5);
    CHECK(one.std == 0.0);
    CHECK(one.mean == one.values[0]);
    CHECK(one.to_key_value().find("metric=KVD") != std::string::npos);
}

TEST_CASE("logit sweep with one delta equals the motion logit") {
    torch::manual_seed(10);
    DiscriminatorNets d(DiscriminatorConfig{8, 4, false});
    auto f0 = torch::rand({3, 8, 8}), f1 = torch::rand({3, 8, 8});
    const auto rows = logit_sweep(d, f0, f1, {0.4});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].second == motion_logit(d, {f0, f1, 0.4}));
    for (const auto& [dt, v] : logit_sweep(d, f0, f1, {0.0, 0.5, 1.0})) CHECK(std::isfinite(v));
    CHECK(table_csv(rows, "delta_t", "logit").rfind("delta_t,logit\n", 0) == 0);
}

TEST_CASE("motion PCA") {
    auto cfg = test::tiny_generator();
    torch::manual_seed(11);
    GeneratorNets nets(cfg);
    Rng rng(11);
    const auto zc = sample_latents(rng, 1, cfg).z_content;
    SUBCASE("variance ordering matches a covariance eigendecomposition") {
        Rng r1(3);
        const auto pca = motion_pca(nets, zc, 6, 8, r1);
        REQUIRE(pca.paths.size() == 6);
        REQUIRE(pca.paths[0].size() == 8);
        CHECK(pca.explained_variance[0] >= pca.explained_variance[1]);
        // Independent route: rebuild the features and take an SVD of the centered matrix.
        Rng r1b(3);
        torch::NoGradGuard no_grad;
        const auto zm = sample_latents(r1b, 6, cfg).z_motion;
        auto [params, head] = nets->forward({zc.expand({6, cfg.dim_zI}).contiguous(), zm});
        auto ts = torch::linspace(0, 1, 8).unsqueeze(0).expand({6, 8}).contiguous();
        auto f = motion_feature(head, ts).reshape({48, -1}).to(torch::kFloat64).contiguous();
        Matrix feats(48, f.size(1));
        for (int i = 0; i < 48; ++i)
            for (int j = 0; j < f.size(1); ++j) feats(i, j) = f[i][j].item<double>();
        const Matrix centered = feats.rowwise() - feats.colwise().mean();
        Eigen::JacobiSVD<Matrix> svd(centered);
        const auto sv = svd.singularValues();
        CHECK(pca.explained_variance[0] == doctest::Approx(sv(0) * sv(0) / 48.0).epsilon(1e-6));
        CHECK(pca.explained_variance[1] == doctest::Approx(sv(1) * sv(1) / 48.0).epsilon(1e-6));
        Matrix proj(48, 2);
        for (int i = 0; i < 6; ++i)
            for (int k = 0; k < 8; ++k) proj.row(i * 8 + k) << pca.paths[i][k][0], pca.paths[i][k][1];
        const auto g = fit_gaussian(proj);
        CHECK(g.cov(0, 0) >= g.cov(1, 1));
        CHECK(std::abs(g.cov(0, 1)) < 1e-6 * (1 + g.cov(0, 0)));
    }
    SUBCASE("linear head gives straight lines through the origin") {
        auto lin = cfg;
        lin.use_f_M = false;
        torch::manual_seed(12);
        GeneratorNets ln(lin);
        Rng r2(4);
        const auto pca = motion_pca(ln, zc, 4, 6, r2);
        for (const auto& path : pca.paths) {
            const auto& o = pca.origin;
            CHECK(path[0][0] == doctest::Approx(o[0]).epsilon(1e-5).scale(1));
            const double dx = path.back()[0] - o[0], dy = path.back()[1] - o[1];
            for (const auto& p : path) CHECK(std::abs((p[0] - o[0]) * dy - (p[1] - o[1]) * dx) < 1e-4);
        }
    }
    SUBCASE("a single time gives single points") {
        Rng r3(5);
        const auto pca = motion_pca(nets, zc, 3, 1, r3);
        for (const auto& p : pca.paths) CHECK(p.size() == 1);
        Rng r4(5);
        CHECK_THROWS_AS(motion_pca(nets, zc, 1, 1, r4), std::invalid_argument);
    }
}

TEST_CASE("throughput benchmark shape") {
    auto cfg = test::tiny_generator();
    GeneratorNets nets(cfg);
    CHECK(throughput_benchmark(nets, {}, 8, 1).empty());
    const auto rows = throughput_benchmark(nets, {2, 4}, 8, 1);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].length == 4);
    CHECK(rows[0].seconds > 0.0);
}

}
