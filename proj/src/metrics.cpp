#include "vidinr/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vidinr/errors.hpp"

namespace vidinr {

// ----------------------------------------------------------------------------
// Fréchet distance
// ----------------------------------------------------------------------------

Gaussian fit_gaussian(const Matrix& features) {
    if (features.rows() < 2) throw std::invalid_argument("fit_gaussian: need at least 2 samples");
    Gaussian g;
    g.mean = features.colwise().mean().transpose();
    const Matrix centered = features.rowwise() - g.mean.transpose();
    g.cov = centered.transpose() * centered / static_cast<double>(features.rows() - 1);
    return g;
}

Matrix sqrtm_psd(const Matrix& m) {
    if (m.rows() != m.cols()) throw ShapeError("sqrtm_psd: matrix must be square");
    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix symmetrized_product(const Matrix& cov1, const Matrix& cov2) {
    if (cov1.rows() != cov1.cols() || cov2.rows() != cov2.cols() || cov1.rows() != cov2.rows())
        throw ShapeError("covariances must be square with matching dimensions");
    const Matrix a = sqrtm_psd(cov1);
    const Matrix sym2 = 0.5 * (cov2 + cov2.transpose());
    Matrix p = a * sym2 * a;
    return 0.5 * (p + p.transpose());
}

double frechet_distance(const Vector& mu1, const Matrix& cov1, const Vector& mu2, const Matrix& cov2) {
    if (mu1.size() != mu2.size() || mu1.size() != cov1.rows()) throw ShapeError("frechet_distance: dimension mismatch");
    const Matrix s = sqrtm_psd(symmetrized_product(cov1, cov2));
    const double mean_term = (mu1 - mu2).squaredNorm();
    const double value = mean_term + cov1.trace() + cov2.trace() - 2.0 * s.trace();
    return std::max(0.0, value);
}

double frechet_distance(const Gaussian& a, const Gaussian& b) { return frechet_distance(a.mean, a.cov, b.mean, b.cov); }

// ----------------------------------------------------------------------------
// Kernel distance
// ----------------------------------------------------------------------------

namespace {

// Sorting before summation makes the result independent of sample order.
double sorted_sum(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    return std::accumulate(v.begin(), v.end(), 0.0);
}

double mmd2_unbiased(const Matrix& x, const Matrix& y) {
    const auto n = x.rows(), m = y.rows();
    const double d = static_cast<double>(x.cols());
    auto k = [d](const auto& a, const auto& b) {
        const double v = a.dot(b) / d + 1.0;
        return v * v * v;
    };
    std::vector<double> xx, yy, xy;
    xx.reserve(static_cast<std::size_t>(n * (n - 1)));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) xx.push_back(k(x.row(i), x.row(j)));
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            if (i != j) yy.push_back(k(y.row(i), y.row(j)));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) xy.push_back(k(x.row(i), y.row(j)));
    const double nn = static_cast<double>(n), mm = static_cast<double>(m);
    return sorted_sum(xx) / (nn * (nn - 1)) + sorted_sum(yy) / (mm * (mm - 1)) - 2.0 * sorted_sum(xy) / (nn * mm);
}

}  // namespace

double kernel_distance(const Matrix& feats_real, const Matrix& feats_fake, std::int64_t block_size) {
    if (feats_real.rows() < 2 || feats_fake.rows() < 2)
        throw std::invalid_argument("kernel_distance: need at least 2 samples per side");
    if (feats_real.cols() != feats_fake.cols()) throw ShapeError("kernel_distance: feature dimensions differ");
    if (block_size < 2) throw std::invalid_argument("kernel_distance: block size must be >= 2");
    const auto n = feats_real.rows(), m = feats_fake.rows();
    const auto blocks = std::max<Eigen::Index>(1, std::min(n, m) / block_size);
    double total = 0.0;
    for (Eigen::Index b = 0; b < blocks; ++b) {
        const auto r0 = b * n / blocks, r1 = (b + 1) * n / blocks;
        const auto f0 = b * m / blocks, f1 = (b + 1) * m / blocks;
        total += mmd2_unbiased(feats_real.middleRows(r0, r1 - r0), feats_fake.middleRows(f0, f1 - f0));
    }
    return total / static_cast<double>(blocks);
}

// ----------------------------------------------------------------------------
// Inception score
// ----------------------------------------------------------------------------

double inception_score(const Matrix& p) {
    if (p.rows() < 1 || p.cols() < 1) throw std::invalid_argument("inception_score: empty probability matrix");
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        if ((p.row(i).array() < 0).any()) throw std::invalid_argument("inception_score: negative probability");
        if (std::abs(p.row(i).sum() - 1.0) > 1e-6) throw std::invalid_argument("inception_score: row does not sum to 1");
    }
    const Vector marginal = p.colwise().mean().transpose();
    double kl_total = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        double kl = 0.0;
        for (Eigen::Index k = 0; k < p.cols(); ++k) {
            const double v = p(i, k);
            if (v > 0) kl += v * (std::log(v) - std::log(marginal(k)));
        }
        kl_total += kl;
    }
    const double score = std::exp(kl_total / static_cast<double>(p.rows()));
    return std::clamp(score, 1.0, static_cast<double>(p.cols()));
}

// ----------------------------------------------------------------------------
// SSIM / PSNR
// ----------------------------------------------------------------------------

namespace {

constexpr double kSsimK1 = 0.01, kSsimK2 = 0.03, kSsimSigma = 1.5, kDataRange = 2.0;
constexpr int kSsimWindow = 11;

std::vector<double> gaussian_kernel(int size) {
    std::vector<double> g(static_cast<std::size_t>(size));
    const int half = size / 2;
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        g[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
        sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
}

// Separable valid-mode filtering of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& img, int H, int W, const std::vector<double>& g) {
    const int n = static_cast<int>(g.size());
    const int oh = H - n + 1, ow = W - n + 1;
    std::vector<double> rows(static_cast<std::size_t>(H * ow));
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int k = 0; k < n; ++k) acc += g[k] * img[y * W + x + k];
            rows[y * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh * ow));
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int k = 0; k < n; ++k) acc += g[k] * rows[(y + k) * ow + x];
            out[y * ow + x] = acc;
        }
    return out;
}

}  // namespace

double ssim(const VideoClip& a, const VideoClip& b) {
    if (a.empty() || !a.frames.sizes().equals(b.frames.sizes())) throw ShapeError("ssim: clip shapes differ");
    const int H = static_cast<int>(a.height()), W = static_cast<int>(a.width());
    int win = std::min({kSsimWindow, H, W});
    if (win % 2 == 0) --win;
    const auto g = gaussian_kernel(win);
    const double c1 = (kSsimK1 * kDataRange) * (kSsimK1 * kDataRange);
    const double c2 = (kSsimK2 * kDataRange) * (kSsimK2 * kDataRange);
    const auto fa = a.frames.to(torch::kFloat64).contiguous();
    const auto fb = b.frames.to(torch::kFloat64).contiguous();
    const double* pa = fa.data_ptr<double>();
    const double* pb = fb.data_ptr<double>();
    const std::size_t plane = static_cast<std::size_t>(H * W);
    double total = 0.0;
    std::int64_t planes = 0;
    for (std::int64_t k = 0; k < a.length() * 3; ++k) {
        std::vector<double> x(pa + k * plane, pa + (k + 1) * plane), y(pb + k * plane, pb + (k + 1) * plane);
        std::vector<double> xx(plane), yy(plane), xy(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = filter_valid(x, H, W, g), my = filter_valid(y, H, W, g);
        const auto sxx = filter_valid(xx, H, W, g), syy = filter_valid(yy, H, W, g), sxy = filter_valid(xy, H, W, g);
        double acc = 0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += acc / static_cast<double>(mx.size());
        ++planes;
    }
    return total / static_cast<double>(planes);
}

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
    if (!a.sizes().equals(b.sizes())) throw ShapeError("psnr: shape mismatch");
    const double mse = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).square().mean().item<double>();
    if (mse <= 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(kDataRange * kDataRange / mse);
}

// ----------------------------------------------------------------------------
// Protocol
// ----------------------------------------------------------------------------

Metric parse_metric(const std::string& name) {
    if (name == "fvd" || name == "FVD") return Metric::fvd;
    if (name == "kvd" || name == "KVD") return Metric::kvd;
    if (name == "is" || name == "IS") return Metric::is;
    throw std::invalid_argument("unknown metric '" + name + "' (expected fvd, kvd or is)");
}

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::fvd: return "FVD";
        case Metric::kvd: return "KVD";
        case Metric::is: return "IS";
    }
    return "?";
}

std::string ScoreReport::to_table() const {
    std::ostringstream os;
    os.precision(10);
    os << "metric\tmean\tstd\truns\tn\n" << metric << "\t" << mean << "\t" << std << "\t" << runs << "\t"
       << samples_per_run << "\n";
    return os.str();
}

std::string ScoreReport::to_key_value() const {
    std::ostringstream os;
    os.precision(17);
    os << "metric=" << metric << "\nmean=" << mean << "\nstd=" << std << "\nruns=" << runs << "\nn=" << samples_per_run
       << "\nreal_resampled=" << (real_resampled ? "true" : "false") << "\nvalues=";
    for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
    os << "\n";
    return os.str();
}

torch::Tensor sample_videos(GeneratorNets& nets, std::int64_t n, std::int64_t height, std::int64_t width,
                            std::int64_t frames, Rng& rng) {
    torch::NoGradGuard no_grad;
    const auto grid = make_grid(height, width, frames);
    const auto xs = axis_tensor(grid.xs());
    const auto ys = axis_tensor(grid.ys());
    const auto ts = axis_tensor(grid.ts());
    constexpr std::int64_t kChunk = 8;
    std::vector<torch::Tensor> parts;
    for (std::int64_t i = 0; i < n; i += kChunk) {
        const auto b = std::min(kChunk, n - i);
        auto [params, head] = nets->forward(sample_latents(rng, b, nets->config()));
        parts.push_back(render_frames(params, head, xs, ys, ts.unsqueeze(0).expand({b, frames}).contiguous()));
    }
    return torch::cat(parts);
}

ClipSource generator_source(GeneratorNets& nets, std::int64_t height, std::int64_t width, std::int64_t frames) {
    return {[nets, height, width, frames](std::int64_t n, Rng& rng) mutable {
                return sample_videos(nets, n, height, width, frames, rng);
            },
            -1};
}

ClipSource pool_source(torch::Tensor pool) {
    const auto available = pool.size(0);
    return {[pool](std::int64_t n, Rng& rng) {
                auto idx = torch::empty({n}, torch::kLong);
                for (std::int64_t i = 0; i < n; ++i) idx[i] = rng.integer(0, pool.size(0) - 1);
                return pool.index_select(0, idx);
            },
            available};
}

ScoreReport score_protocol(const ClipSource& generated, const ClipSource& real, Embedder& embedder, Metric metric,
                           std::int64_t runs, std::int64_t n, std::uint64_t seed) {
    if (runs < 1) throw std::invalid_argument("score_protocol: runs must be >= 1");
    if (n < 2) throw std::invalid_argument("score_protocol: n must be >= 2");
    ScoreReport report;
    report.metric = metric_name(metric);
    report.runs = runs;
    report.samples_per_run = n;
    report.real_resampled = real.available >= 0 && real.available < n;
    for (std::int64_t r = 0; r < runs; ++r) {
        Rng gen_rng = Rng::derive(seed, "protocol/generated/" + std::to_string(r));
        Rng real_rng = Rng::derive(seed, "protocol/real/" + std::to_string(r));
        double value = 0.0;
        try {
            const auto fake = generated.draw(n, gen_rng);
            if (metric == Metric::is) {
                value = inception_score(embedder.class_probs(fake));
            } else {
                const auto ff = embedder.embed(fake);
                const auto fr = embedder.embed(real.draw(n, real_rng));
                value = metric == Metric::fvd ? frechet_distance(fit_gaussian(fr), fit_gaussian(ff))
                                              : kernel_distance(fr, ff);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("score_protocol run " + std::to_string(r) + ": " + e.what());
        }
        report.values.push_back(value);
    }
    const double mean = std::accumulate(report.values.begin(), report.values.end(), 0.0) / static_cast<double>(runs);
    double var = 0.0;
    for (double v : report.values) var += (v - mean) * (v - mean);
    report.mean = mean;
    report.std = std::sqrt(var / static_cast<double>(runs));
    return report;
}

// ----------------------------------------------------------------------------
// Analysis
// ----------------------------------------------------------------------------

std::vector<std::pair<double, double>> logit_sweep(DiscriminatorNets& nets, const torch::Tensor& frame0,
                                                   const torch::Tensor& frame1, const std::vector<double>& deltas) {
    std::vector<std::pair<double, double>> rows;
    for (double d : deltas) rows.emplace_back(d, motion_logit(nets, Triplet{frame0, frame1, d}));
    return rows;
}

std::string table_csv(const std::vector<std::pair<double, double>>& rows, const std::string& x_name,
                      const std::string& y_name) {
    std::ostringstream os;
    os.precision(10);
    os << x_name << "," << y_name << "\n";
    for (const auto& [x, y] : rows) os << x << "," << y << "\n";
    return os.str();
}

MotionTrajectories motion_pca(GeneratorNets& nets, const torch::Tensor& z_content, std::int64_t motion_samples,
                              std::int64_t times, Rng& rng) {
    if (motion_samples < 1 || times < 1 || motion_samples * times < 2)
        throw std::invalid_argument("motion_pca: need motion_samples * times >= 2");
    torch::NoGradGuard no_grad;
    const auto& cfg = nets->config();
    auto zi = z_content.reshape({1, cfg.dim_zI}).expand({motion_samples, cfg.dim_zI}).contiguous();
    auto zm = sample_latents(rng, motion_samples, cfg).z_motion;
    auto [params, head] = nets->forward({zi, zm});
    auto ts = axis_tensor(axis_samples(times, 0.0, 1.0)).unsqueeze(0).expand({motion_samples, times}).contiguous();
    const Matrix feats = to_eigen(motion_feature(head, ts).reshape({motion_samples * times, -1}));

    const Vector mean = feats.colwise().mean().transpose();
    const Matrix centered = feats.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(feats.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const auto d = cov.rows();
    MotionTrajectories out;
    out.components = Matrix(d, 2);
    for (int c = 0; c < 2; ++c) {
        const auto idx = std::max<Eigen::Index>(0, d - 1 - c);
        out.components.col(c) = eig.eigenvectors().col(idx);
        out.explained_variance[static_cast<std::size_t>(c)] = eig.eigenvalues()(idx);
    }
    const Matrix proj = centered * out.components;
    const Vector origin = -mean.transpose() * out.components;
    out.origin = {origin(0), origin(1)};
    out.paths.resize(static_cast<std::size_t>(motion_samples));
    for (std::int64_t s = 0; s < motion_samples; ++s)
        for (std::int64_t t = 0; t < times; ++t) {
            const auto row = s * times + t;
            out.paths[static_cast<std::size_t>(s)].push_back({proj(row, 0), proj(row, 1)});
        }
    return out;
}

std::vector<BenchRow> throughput_benchmark(GeneratorNets& nets, const std::vector<std::int64_t>& lengths,
                                           std::int64_t resolution, int trials, int workers, std::uint64_t seed) {
    std::vector<BenchRow> rows;
    if (lengths.empty()) return rows;
    if (trials < 1) throw std::invalid_argument("throughput_benchmark: trials must be >= 1");
    Rng rng = Rng::derive(seed, "bench");
    const auto z = sample_latents(rng, 1, nets->config());
    auto run_once = [&](std::int64_t length) {
        torch::NoGradGuard no_grad;
        const auto start = std::chrono::steady_clock::now();
        auto [params, head] = nets->forward(z);
        auto clip = decode_parallel(params, head, make_grid(resolution, resolution, length), workers);
        const auto stop = std::chrono::steady_clock::now();
        (void)clip;
        return std::chrono::duration<double>(stop - start).count();
    };
    for (auto length : lengths) {
        run_once(length);  // warm-up
        std::vector<double> times;
        for (int i = 0; i < trials; ++i) times.push_back(run_once(length));
        std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
        rows.push_back({length, times[times.size() / 2]});
    }
    return rows;
}

}  // namespace vidinr
