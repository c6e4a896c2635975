#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "vidinr/clip.hpp"
#include "vidinr/config.hpp"
#include "vidinr/discriminator.hpp"
#include "vidinr/generator.hpp"
#include "vidinr/rng.hpp"

namespace vidinr {

/// Adam with explicitly owned moment buffers (serializable).
class Adam {
public:
    struct Options {
        double lr = 1e-3;
        double beta1 = 0.0;
        double beta2 = 0.99;
        double eps = 1e-8;
    };

    Adam() = default;
    Adam(std::vector<torch::Tensor> params, Options opt);

    void zero_grad();
    void step();

    std::vector<torch::Tensor>& first_moments() { return m_; }
    std::vector<torch::Tensor>& second_moments() { return v_; }
    const std::vector<torch::Tensor>& first_moments() const { return m_; }
    const std::vector<torch::Tensor>& second_moments() const { return v_; }
    std::int64_t steps() const { return steps_; }
    void set_steps(std::int64_t s) { steps_ = s; }
    const Options& options() const { return opt_; }

private:
    std::vector<torch::Tensor> params_, m_, v_;
    Options opt_;
    std::int64_t steps_ = 0;
};

struct GanLosses {
    torch::Tensor discriminator;  // softplus(-real) + softplus(fake), batch mean
    torch::Tensor generator;      // softplus(-fake), batch mean
};

/// Non-saturating logistic losses for one discriminator head.
GanLosses gan_losses(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);

/// (γ/2)·E_batch ‖∇_x D(x)‖² at `real_inputs`. The graph is kept, so the
/// result can be back-propagated into D's parameters.
torch::Tensor r1_penalty(const std::function<torch::Tensor(const torch::Tensor&)>& disc,
                         const torch::Tensor& real_inputs, double gamma);

/// Weight of the R1 term at `step` under lazy regularization with period k:
/// k on multiples of k, else 0.
double lazy_r1_weight(std::int64_t step, std::int64_t interval);

/// One draw of augmentation parameters, shared by every frame of a clip.
struct AugmentParams {
    bool color = false;
    double brightness = 0.0;  // additive, in [-0.5, 0.5)
    double saturation = 1.0;  // in [0, 2)
    double contrast = 1.0;    // in [0.5, 1.5)
    bool translation = false;
    std::int64_t shift_x = 0;
    std::int64_t shift_y = 0;

    bool operator==(const AugmentParams&) const = default;
};

AugmentParams draw_augment(Rng& rng, const std::set<std::string>& policy, std::int64_t height, std::int64_t width);

/// Applies `p` to frames [K, 3, H, W] (differentiable; color results clamped to [-1, 1]).
torch::Tensor apply_augment(const torch::Tensor& frames, const AugmentParams& p);

/// Augments a batch [B, K, 3, H, W] with one parameter draw per clip.
torch::Tensor diffaug_video(const torch::Tensor& clips, Rng& rng, const std::set<std::string>& policy,
                            std::vector<AugmentParams>* log = nullptr);
VideoClip diffaug_video(const VideoClip& clip, Rng& rng, const std::set<std::string>& policy);

/// Named random streams fanned out from the master seed.
struct RngStreams {
    Rng data, latent, time, augment;
    static RngStreams from_seed(std::uint64_t seed);
};

struct TrainState {
    Config config;
    GeneratorNets generator{nullptr};
    GeneratorNets generator_ema{nullptr};
    DiscriminatorNets discriminator{nullptr};
    Adam opt_g, opt_d;
    std::int64_t step = 0;
    RngStreams rng;
};

TrainState make_train_state(const Config& config);

struct StepStats {
    std::int64_t step = 0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    double loss_d_image = 0.0;
    double loss_d_motion = 0.0;
    double r1 = 0.0;
    // Generated frames decoded per sample in each phase.
    std::int64_t frames_per_sample_d = 0;
    std::int64_t frames_per_sample_g = 0;
    std::int64_t image_frames_per_sample = 0;
};

/// One discriminator update (both heads, lazy R1) followed by one generator
/// update and an EMA refresh. `real_batch` is [B, T, 3, H, W].
StepStats train_step(TrainState& state, const torch::Tensor& real_batch);

/// Runs `steps` iterations drawing minibatches (with replacement) from
/// `dataset` [N, T, 3, H, W]. `on_step` is called after every step.
void train(TrainState& state, const torch::Tensor& dataset, std::int64_t steps,
           const std::function<void(const StepStats&)>& on_step = {});

void save_checkpoint(const TrainState& state, const std::string& path);
/// Restores a complete state. Throws ParseError on corrupt input; nothing is
/// returned unless every record was consumed successfully.
TrainState load_checkpoint(const std::string& path);

/// Loads only the EMA generator (and its config) from a checkpoint.
GeneratorNets load_generator(const std::string& path, Config* config = nullptr);
DiscriminatorNets load_discriminator(const std::string& path);

/// Parameter-wise bitwise equality of two modules.
bool same_parameters(const torch::nn::Module& a, const torch::nn::Module& b);

}  // namespace vidinr
