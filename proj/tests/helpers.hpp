#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>

#include "vidinr/config.hpp"
#include "vidinr/generator.hpp"
#include "vidinr/rng.hpp"

namespace vidinr::test {

/// Small generator so property tests can afford many cases.
inline GeneratorConfig tiny_generator() {
    GeneratorConfig g;
    g.dim_zI = 8;
    g.dim_zM = 8;
    g.hidden = 16;
    g.body_layers = 2;
    g.mod_rank = 2;
    g.mapping_hidden = 16;
    return g;
}

inline Config tiny_config() {
    Config c = desk_config();
    c.generator = tiny_generator();
    c.discriminator.resolution = 8;
    c.discriminator.channels = 8;
    c.train.batch_size = 2;
    c.train.frames = 4;
    c.data.dataset_size = 8;
    c.run.eval_samples = 8;
    c.run.embedder_steps = 5;
    return c;
}

inline bool bitwise_equal(const torch::Tensor& a, const torch::Tensor& b) {
    return a.sizes().equals(b.sizes()) && a.dtype() == b.dtype() && torch::equal(a, b);
}

inline double max_abs(const torch::Tensor& t) { return t.abs().max().item<double>(); }

/// Fresh scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(static_cast<std::uint64_t>(std::hash<std::string>{}(tag)) ^
                static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)));
        path_ = std::filesystem::temp_directory_path() /
                ("vidinr_" + tag + "_" + std::to_string(rng.integer(0, 1'000'000'000)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& child = {}) const { return child.empty() ? path_.string() : (path_ / child).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace vidinr::test
