#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vidinr/config.hpp"
#include "vidinr/data.hpp"
#include "vidinr/embedder.hpp"
#include "vidinr/generator.hpp"
#include "vidinr/metrics.hpp"

namespace vidinr {

/// Training clips selected by the data keys of `cfg` (synthetic two-circles
/// drawn from the "data" stream, or an extracted frame directory).
ClipDataset load_training_data(const Config& cfg);

/// Held-out real clips and the toy embedder used for desk-scale scoring.
struct ToyBench {
    torch::Tensor held_out;  // [M, T, 3, H, W]
    std::shared_ptr<ToyEmbedder> embedder;
    ToyEmbedderReport embedder_report;
};

/// cfg.run.eval_samples synthetic clips from a stream independent of training data.
torch::Tensor make_held_out(const Config& cfg);

/// Builds the bench from an independent synthetic draw (seeded by cfg.seed
/// and a fixed stream name), so every model trained under cfg is scored
/// against the same reference set and feature extractor.
ToyBench make_toy_bench(const Config& cfg);

/// FVD/KVD/IS of the generator against the bench's held-out clips with
/// cfg.run.eval_samples samples per run.
ScoreReport toy_score(GeneratorNets& nets, const ToyBench& bench, const Config& cfg, Metric metric = Metric::fvd,
                      std::int64_t runs = 1, std::uint64_t seed = 0);

struct AblationFlags {
    bool use_small_sigma_t = false;
    bool use_z_M = false;
    bool use_f_M = false;

    std::string label() const;  // e.g. "(+,+,-)"
    bool operator==(const AblationFlags&) const = default;
};

enum class AblationPattern { cumulative, one_at_a_time };

/// cumulative: (-,-,-), (+,-,-), (+,+,-), (+,+,+).
/// one_at_a_time: (-,-,-), (+,-,-), (-,+,-), (-,-,+), (+,+,+).
std::vector<AblationFlags> ablation_rows(AblationPattern pattern);

/// `base` with only the three toggles (and the seed) replaced.
Config row_config(const Config& base, const AblationFlags& flags, std::uint64_t seed);

struct AblationRow {
    AblationFlags flags;
    ScoreReport report;  // mean/std over seeds; values ordered like the seeds
    bool failed = false;
    std::string error;
};

struct AblationMatrix {
    std::vector<AblationRow> rows;
    std::vector<std::uint64_t> seeds;
    std::int64_t steps = 0;

    std::string to_csv() const;   // row,flags,seed,fvd (one line per row and seed)
    std::string summary() const;  // human-readable table with mean ± std
};

struct AblationOptions {
    AblationPattern pattern = AblationPattern::cumulative;
    /// Explicit rows; overrides `pattern` when non-empty.
    std::vector<AblationFlags> rows;
    /// Called after each (row, seed) run with its FVD (NaN when it failed).
    std::function<void(const AblationFlags&, std::uint64_t seed, double fvd)> on_run;
};

/// Trains every row for `steps` steps per seed and scores the EMA generator
/// with the toy-embedder FVD. A diverging row is marked failed; the others
/// continue.
AblationMatrix run_ablation(const Config& base, std::int64_t steps, const std::vector<std::uint64_t>& seeds,
                            const ToyBench& bench, const AblationOptions& options = {});

}  // namespace vidinr
