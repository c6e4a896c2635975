#include "vidinr/ablation.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "vidinr/errors.hpp"
#include "vidinr/training.hpp"

namespace vidinr {

ClipDataset load_training_data(const Config& cfg) {
    const auto res = cfg.resolution();
    if (cfg.data.source == "frames")
        return extract_clips(cfg.data.frames_dir, cfg.train.frames, cfg.data.stride, CropMode::center, res, res);
    Rng rng = Rng::derive(cfg.train.seed, "data/synthetic");
    return synth_two_circles(cfg.data.dataset_size, res, res, cfg.train.frames, rng);
}

torch::Tensor make_held_out(const Config& cfg) {
    const auto res = cfg.resolution();
    Rng rng = Rng::derive(cfg.train.seed, "bench/held-out");
    return synth_two_circles(cfg.run.eval_samples, res, res, cfg.train.frames, rng).stacked();
}

ToyBench make_toy_bench(const Config& cfg) {
    const auto res = cfg.resolution();
    Rng rng = Rng::derive(cfg.train.seed, "bench/embedder");
    const auto labeled =
        synth_two_circles(std::max<std::int64_t>(4 * cfg.data.dataset_size, 64), res, res, cfg.train.frames, rng);
    ToyBench bench;
    bench.held_out = make_held_out(cfg);
    bench.embedder = std::make_shared<ToyEmbedder>(
        train_toy_embedder(labeled, cfg.run.embedder_steps, cfg.train.seed, &bench.embedder_report));
    return bench;
}

ScoreReport toy_score(GeneratorNets& nets, const ToyBench& bench, const Config& cfg, Metric metric,
                      std::int64_t runs, std::uint64_t seed) {
    const auto res = cfg.resolution();
    return score_protocol(generator_source(nets, res, res, cfg.train.frames), pool_source(bench.held_out),
                          *bench.embedder, metric, runs, cfg.run.eval_samples, seed);
}

std::string AblationFlags::label() const {
    std::string s = "(";
    s += use_small_sigma_t ? '+' : '-';
    s += ',';
    s += use_z_M ? '+' : '-';
    s += ',';
    s += use_f_M ? '+' : '-';
    return s + ")";
}

std::vector<AblationFlags> ablation_rows(AblationPattern pattern) {
    if (pattern == AblationPattern::cumulative)
        return {{false, false, false}, {true, false, false}, {true, true, false}, {true, true, true}};
    return {{false, false, false}, {true, false, false}, {false, true, false}, {false, false, true}, {true, true, true}};
}

Config row_config(const Config& base, const AblationFlags& flags, std::uint64_t seed) {
    Config c = base;
    c.generator.use_small_sigma_t = flags.use_small_sigma_t;
    c.generator.use_z_M = flags.use_z_M;
    c.generator.use_f_M = flags.use_f_M;
    c.train.seed = seed;
    c.validate();
    return c;
}

std::string AblationMatrix::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "row,use_small_sigma_t,use_z_M,use_f_M,seed,steps,fvd,failed\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const double v = s < row.report.values.size() ? row.report.values[s] : std::nan("");
            os << r << "," << row.flags.use_small_sigma_t << "," << row.flags.use_z_M << "," << row.flags.use_f_M
               << "," << seeds[s] << "," << steps << "," << v << "," << (std::isnan(v) ? 1 : 0) << "\n";
        }
    }
    return os.str();
}

std::string AblationMatrix::summary() const {
    std::ostringstream os;
    os.precision(6);
    os << "generator ablation: " << steps << " steps, seeds";
    for (auto s : seeds) os << " " << s;
    os << "\nsmall_sigma_t z_M f_M   FVD\n";
    for (const auto& row : rows) {
        os << "     " << (row.flags.use_small_sigma_t ? '+' : '-') << "         " << (row.flags.use_z_M ? '+' : '-')
           << "   " << (row.flags.use_f_M ? '+' : '-') << "    ";
        if (row.failed)
            os << "failed (" << row.error << ")";
        else
            os << row.report.mean << " ± " << row.report.std;
        os << "\n";
    }
    return os.str();
}

AblationMatrix run_ablation(const Config& base, std::int64_t steps, const std::vector<std::uint64_t>& seeds,
                            const ToyBench& bench, const AblationOptions& options) {
    if (seeds.empty()) throw std::invalid_argument("run_ablation: need at least one seed");
    if (steps < 0) throw std::invalid_argument("run_ablation: steps must be >= 0");
    AblationMatrix m;
    m.seeds = seeds;
    m.steps = steps;
    const auto rows = options.rows.empty() ? ablation_rows(options.pattern) : options.rows;
    for (const auto& flags : rows) {
        AblationRow row;
        row.flags = flags;
        row.report.metric = metric_name(Metric::fvd);
        row.report.samples_per_run = base.run.eval_samples;
        for (auto seed : seeds) {
            double fvd = std::nan("");
            if (!row.failed) {
                try {
                    const Config cfg = row_config(base, flags, seed);
                    const auto data = load_training_data(cfg).stacked();
                    auto state = make_train_state(cfg);
                    train(state, data, steps);
                    fvd = toy_score(state.generator_ema, bench, cfg, Metric::fvd, 1, seed).mean;
                } catch (const TrainingDiverged& e) {
                    row.failed = true;
                    row.error = e.what();
                }
            }
            row.report.values.push_back(fvd);
            if (options.on_run) options.on_run(flags, seed, fvd);
        }
        if (!row.failed) {
            const auto n = static_cast<double>(row.report.values.size());
            row.report.mean = std::accumulate(row.report.values.begin(), row.report.values.end(), 0.0) / n;
            double var = 0;
            for (double v : row.report.values) var += (v - row.report.mean) * (v - row.report.mean);
            row.report.std = std::sqrt(var / n);
            row.report.runs = static_cast<std::int64_t>(row.report.values.size());
        } else {
            row.report.mean = row.report.std = std::nan("");
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

}  // namespace vidinr
