#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "vidinr/discriminator.hpp"
#include "vidinr/generator.hpp"

namespace vidinr {

struct TrainConfig {
    double r1_gamma = 1.0;
    std::int64_t r1_interval = 16;  // lazy R1 period k
    double lr_g = 2.5e-3;
    double lr_d = 2e-3;
    double beta1 = 0.0;
    double beta2 = 0.99;
    std::int64_t batch_size = 8;
    double ema_decay = 0.999;
    std::set<std::string> diffaug{"color", "translation"};
    std::int64_t total_steps = 500;
    std::int64_t frames = 16;  // clip length T
    std::uint64_t seed = 0;
};

struct DataConfig {
    std::string source = "two_circles";  // or "frames" (pre-extracted directory)
    std::string frames_dir;
    std::int64_t dataset_size = 256;
    std::int64_t stride = 1;
};

struct RunConfig {
    std::int64_t checkpoint_every = 100;
    std::int64_t sample_every = 250;
    std::int64_t eval_every = 250;
    std::int64_t eval_samples = 128;
    std::int64_t embedder_steps = 1000;
};

/// Full experiment configuration. Serialized as flat UTF-8 `key=value` lines;
/// unknown keys are rejected.
struct Config {
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    TrainConfig train;
    DataConfig data;
    RunConfig run;

    std::int64_t resolution() const { return discriminator.resolution; }

    /// Applies one `key=value` assignment. Throws ConfigError naming the key.
    void set(const std::string& key, const std::string& value);
    void validate() const;

    std::string to_text() const;
    std::uint64_t digest() const;

    static Config parse(const std::string& text);
    static Config load(const std::string& path);
    static const std::vector<std::string>& keys();
};

/// Desk-scale preset used by tests and the toy experiments.
Config desk_config();

}  // namespace vidinr
