#pragma once

#include <Eigen/Dense>
#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vidinr/clip.hpp"
#include "vidinr/discriminator.hpp"
#include "vidinr/embedder.hpp"
#include "vidinr/generator.hpp"
#include "vidinr/rng.hpp"

namespace vidinr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Gaussian {
    Vector mean;
    Matrix cov;
};

/// Sample mean and unbiased covariance of the rows of `features` (n x d).
Gaussian fit_gaussian(const Matrix& features);

/// Square root of a symmetric PSD matrix; negative eigenvalues clipped to 0.
Matrix sqrtm_psd(const Matrix& m);

/// √Σ1 · Σ2 · √Σ1: symmetric PSD with the same spectrum as Σ1Σ2.
Matrix symmetrized_product(const Matrix& cov1, const Matrix& cov2);

/// ‖μ1−μ2‖² + Tr(Σ1 + Σ2 − 2(Σ1Σ2)^{1/2}), clamped at 0.
double frechet_distance(const Vector& mu1, const Matrix& cov1, const Vector& mu2, const Matrix& cov2);
double frechet_distance(const Gaussian& a, const Gaussian& b);

/// Unbiased MMD² with the cubic polynomial kernel (x·y/d + 1)³. Sets larger
/// than `block_size` are split into equal contiguous blocks and averaged.
double kernel_distance(const Matrix& feats_real, const Matrix& feats_fake, std::int64_t block_size = 1024);

/// exp(E_x KL(p(y|x) ‖ p(y))) for row-stochastic `class_probs` (n x K).
double inception_score(const Matrix& class_probs);

/// Mean SSIM over frames and channels; 11x11 Gaussian window (σ = 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 2 for [-1, 1] data. Frames smaller than
/// the window use the largest odd window that fits.
double ssim(const VideoClip& a, const VideoClip& b);

/// PSNR in dB for [-1, 1] data (peak-to-peak 2).
double psnr(const torch::Tensor& a, const torch::Tensor& b);

enum class Metric { fvd, kvd, is };
Metric parse_metric(const std::string& name);
std::string metric_name(Metric m);

struct ScoreReport {
    std::string metric;
    double mean = 0.0;
    double std = 0.0;
    std::int64_t runs = 0;
    std::int64_t samples_per_run = 0;
    bool real_resampled = false;  // real source drawn with replacement
    std::vector<double> values;

    std::string to_table() const;     // header + one tab-separated row
    std::string to_key_value() const;
    bool operator==(const ScoreReport&) const = default;
};

/// Produces `n` clips [n, T, 3, H, W] using the provided random stream.
struct ClipSource {
    std::function<torch::Tensor(std::int64_t n, Rng& rng)> draw;
    std::int64_t available = -1;  // finite pool size, or -1 when unbounded
};

ClipSource generator_source(GeneratorNets& nets, std::int64_t height, std::int64_t width, std::int64_t frames);
/// Uniform draws (with replacement) from a fixed clip pool.
ClipSource pool_source(torch::Tensor pool);

/// Batched, gradient-free decode of `n` random videos on the canonical grid.
torch::Tensor sample_videos(GeneratorNets& nets, std::int64_t n, std::int64_t height, std::int64_t width,
                            std::int64_t frames, Rng& rng);

ScoreReport score_protocol(const ClipSource& generated, const ClipSource& real, Embedder& embedder, Metric metric,
                           std::int64_t runs = 10, std::int64_t n = 2048, std::uint64_t seed = 0);

/// Motion-head logit of the fixed pair across Δt values.
std::vector<std::pair<double, double>> logit_sweep(DiscriminatorNets& nets, const torch::Tensor& frame0,
                                                   const torch::Tensor& frame1, const std::vector<double>& deltas);
std::string table_csv(const std::vector<std::pair<double, double>>& rows, const std::string& x_name,
                      const std::string& y_name);

struct MotionTrajectories {
    std::vector<std::vector<std::array<double, 2>>> paths;  // [motion_samples][times]
    std::array<double, 2> origin{};                         // projection of the zero feature
    std::array<double, 2> explained_variance{};
    Matrix components;                                      // d x 2
};

/// 2-component PCA of motion features f(t) for `motion_samples` z_M draws.
MotionTrajectories motion_pca(GeneratorNets& nets, const torch::Tensor& z_content, std::int64_t motion_samples,
                              std::int64_t times, Rng& rng);

struct BenchRow {
    std::int64_t length = 0;
    double seconds = 0.0;
};

/// Median wall-clock time (after one warm-up) to generate one video of each
/// length at `resolution`, decoding frames over `workers` threads.
std::vector<BenchRow> throughput_benchmark(GeneratorNets& nets, const std::vector<std::int64_t>& lengths,
                                           std::int64_t resolution, int trials = 5, int workers = 1,
                                           std::uint64_t seed = 0);

}  // namespace vidinr
