#include "vidinr/cli.hpp"

#include <CLI11.hpp>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "vidinr/ablation.hpp"
#include "vidinr/archive.hpp"
#include "vidinr/data.hpp"
#include "vidinr/errors.hpp"
#include "vidinr/inference.hpp"
#include "vidinr/metrics.hpp"
#include "vidinr/training.hpp"

namespace vidinr {

namespace fs = std::filesystem;

// ----------------------------------------------------------------------------
// Run directory
// ----------------------------------------------------------------------------

RunDirectory::RunDirectory(fs::path root) : root_(std::move(root)) {
    fs::create_directories(checkpoints());
    fs::create_directories(samples());
    fs::create_directories(reports());
    const auto lock = root_ / ".lock";
    lock_fd_ = ::open(lock.c_str(), O_CREAT | O_RDWR, 0644);
    if (lock_fd_ < 0) throw std::runtime_error("cannot open lock file " + lock.string());
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(lock_fd_);
        lock_fd_ = -1;
        throw UsageError("run directory " + root_.string() + " is in use by another command");
    }
}

RunDirectory::~RunDirectory() {
    if (lock_fd_ >= 0) {
        ::flock(lock_fd_, LOCK_UN);
        ::close(lock_fd_);
    }
}

bool RunDirectory::has_snapshot() const { return fs::exists(config_path()); }

Config RunDirectory::load_snapshot() const {
    try {
        return Config::load(config_path().string());
    } catch (const ParseError& e) {
        throw UsageError(std::string("corrupt config snapshot: ") + e.what());
    }
}

void RunDirectory::snapshot(const Config& config) {
    const auto text = config.to_text();
    if (has_snapshot()) {
        const auto existing = load_snapshot().to_text();
        if (existing != text) {
            std::istringstream sa(existing), sb(text);
            std::string la, lb, key;
            while (std::getline(sa, la) && std::getline(sb, lb))
                if (la != lb) {
                    key = la.substr(0, la.find('='));
                    break;
                }
            throw ConfigError("configuration differs from the run's snapshot at key " + key, key);
        }
        return;
    }
    std::ofstream out(config_path(), std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + config_path().string());
    log(0, "config", "config.txt");
}

void RunDirectory::log(std::int64_t step, const std::string& event, const fs::path& file, const std::string& detail) {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    std::ofstream out(root_ / "log.txt", std::ios::app | std::ios::binary);
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << "Z"
        << "\tstep=" << step << "\tevent=" << event;
    if (!file.empty()) out << "\tfile=" << file.generic_string();
    if (!detail.empty()) out << "\t" << detail;
    out << "\n";
}

std::string checkpoint_name(std::int64_t step) {
    std::ostringstream os;
    os << "step_" << std::setw(6) << std::setfill('0') << step << ".ckpt";
    return os.str();
}

namespace {

// ----------------------------------------------------------------------------
// Shared helpers
// ----------------------------------------------------------------------------

std::string zero_pad(std::int64_t v, int width) {
    std::ostringstream os;
    os << std::setw(width) << std::setfill('0') << v;
    return os.str();
}

void require_cpu_device() {
    const char* dev = std::getenv("VIDINR_DEVICE");
    if (dev && std::string(dev) != "cpu" && std::string(dev) != "")
        throw UsageError(std::string("VIDINR_DEVICE=") + dev + " is not supported by this build (cpu only)");
}

void apply_overrides(Config& cfg, const std::vector<std::string>& extras) {
    for (const auto& arg : extras) {
        if (arg.rfind("--", 0) != 0 || arg.find('=') == std::string::npos)
            throw UsageError("unexpected argument '" + arg + "' (overrides are --key=value)");
        const auto eq = arg.find('=');
        cfg.set(arg.substr(2, eq - 2), arg.substr(eq + 1));
    }
}

Config load_config_file(const std::string& path) {
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    try {
        return Config::load(path);
    } catch (const ParseError& e) {
        throw UsageError(std::string("config file ") + path + ": " + e.what());
    }
}

Range check_range(const std::vector<double>& v, const std::string& flag) {
    if (v.size() != 2 || !std::isfinite(v[0]) || !std::isfinite(v[1]) || v[0] > v[1])
        throw UsageError(flag + " needs two finite values lo <= hi");
    return {v[0], v[1]};
}

std::string resolve_checkpoint(const RunDirectory& run, const std::string& flag) {
    const auto path = flag.empty() ? run.latest_checkpoint() : fs::path(flag);
    if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path.string());
    return path.string();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

fs::path relative(const RunDirectory& run, const fs::path& p) { return fs::relative(p, run.root()); }

/// Reference clips for scoring and analysis: held-out synthetic clips, or the
/// extracted frame dataset when the run trains on real frames.
torch::Tensor reference_clips(const Config& cfg, const ToyBench& bench) {
    if (cfg.data.source == "frames") return load_training_data(cfg).stacked();
    return bench.held_out;
}

/// The toy embedder is trained once per run directory and cached.
ToyBench bench_for(RunDirectory& run, const Config& cfg) {
    const auto cache = run.reports() / "toy_embedder.vinr";
    if (fs::exists(cache)) {
        ToyBench bench;
        bench.held_out = make_held_out(cfg);
        bench.embedder = std::make_shared<ToyEmbedder>(ToyEmbedder::load(cache.string()));
        return bench;
    }
    auto bench = make_toy_bench(cfg);
    bench.embedder->save(cache.string());
    std::ostringstream detail;
    detail << "train_accuracy=" << bench.embedder_report.train_accuracy;
    run.log(0, "embedder", relative(run, cache), detail.str());
    return bench;
}

void write_samples(RunDirectory& run, const TrainState& state, const fs::path& dir) {
    const auto& cfg = state.config;
    Rng rng = Rng::derive(cfg.train.seed, "samples");
    auto g = state.generator_ema;
    const auto clips = sample_videos(g, 2, cfg.resolution(), cfg.resolution(), cfg.train.frames, rng);
    for (std::int64_t i = 0; i < clips.size(0); ++i) {
        const auto clip_dir = dir / ("clip_" + zero_pad(i, 3));
        write_clip(VideoClip(clips[i]), clip_dir.string(), "clip_" + zero_pad(i, 3));
    }
    run.log(state.step, "samples", relative(run, dir));
}

// ----------------------------------------------------------------------------
// train
// ----------------------------------------------------------------------------

struct TrainArgs {
    std::string run_dir, config, resume;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& extras, std::ostream& out, std::ostream& err) {
    RunDirectory run(a.run_dir);
    Config cfg = !a.config.empty() ? load_config_file(a.config) : run.has_snapshot() ? run.load_snapshot() : desk_config();
    apply_overrides(cfg, extras);
    cfg.validate();
    run.snapshot(cfg);

    std::optional<ToyBench> bench;
    if (cfg.run.eval_every > 0) bench = bench_for(run, cfg);

    TrainState state;
    if (!a.resume.empty()) {
        const auto path = a.resume == "latest" ? run.latest_checkpoint().string() : a.resume;
        if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
        state = load_checkpoint(path);
        if (state.config.to_text() != cfg.to_text())
            throw ConfigError("checkpoint was written under a different configuration", "");
        run.log(state.step, "resume", fs::path(path).lexically_proximate(run.root()));
    } else {
        state = make_train_state(cfg);
    }
    const auto data = load_training_data(cfg).stacked();

    std::string last_checkpoint;
    auto checkpoint = [&] {
        const auto path = run.checkpoints() / checkpoint_name(state.step);
        save_checkpoint(state, path.string());
        save_checkpoint(state, run.latest_checkpoint().string());
        last_checkpoint = path.string();
        run.log(state.step, "checkpoint", relative(run, path));
    };
    auto evaluate = [&] {
        const auto report = toy_score(state.generator_ema, *bench, cfg, Metric::fvd, 1, cfg.train.seed);
        const auto path = run.reports() / ("fvd_step_" + zero_pad(state.step, 6) + ".txt");
        write_text(path, report.to_key_value());
        std::ostringstream detail;
        detail.precision(8);
        detail << "fvd=" << report.mean;
        run.log(state.step, "eval", relative(run, path), detail.str());
        out << "step " << state.step << " toy FVD " << report.mean << "\n";
    };
    auto due = [&](std::int64_t every) { return every > 0 && state.step % every == 0; };

    if (state.step == 0) {
        checkpoint();
        if (bench) evaluate();
    }
    try {
        while (state.step < cfg.train.total_steps) {
            train(state, data, 1, [&](const StepStats& s) {
                if (s.step % 10 == 0 || s.step + 1 == cfg.train.total_steps) {
                    std::ostringstream detail;
                    detail.precision(8);
                    detail << "loss_d=" << s.loss_d << "\tloss_g=" << s.loss_g << "\tr1=" << s.r1;
                    run.log(s.step, "step", {}, detail.str());
                }
            });
            const bool last = state.step == cfg.train.total_steps;
            if (due(cfg.run.checkpoint_every) || last) checkpoint();
            if (due(cfg.run.sample_every) || last)
                write_samples(run, state, run.samples() / ("step_" + zero_pad(state.step, 6)));
            if (bench && (due(cfg.run.eval_every) || last)) evaluate();
        }
    } catch (const TrainingDiverged& e) {
        run.log(e.step(), "diverged", last_checkpoint.empty() ? fs::path() : relative(run, last_checkpoint), e.what());
        err << "training diverged: " << e.what() << "\nlast checkpoint: " << last_checkpoint << "\n";
        return kExitRuntime;
    }
    out << "finished at step " << state.step << "; checkpoint " << last_checkpoint << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------------------
// sample
// ----------------------------------------------------------------------------

struct SampleArgs {
    std::string run_dir, checkpoint, name = "sample";
    std::int64_t n = 4, frames = -1, height = -1, width = -1, motion_variants = 0;
    std::vector<double> t_range{0.0, 1.0}, xy_range{0.0, 1.0};
    std::uint64_t seed = 0;
    int workers = 1;
};

int cmd_sample(const SampleArgs& a, std::ostream& out) {
    RunDirectory run(a.run_dir);
    const auto t_range = check_range(a.t_range, "--t-range");
    const auto xy_range = check_range(a.xy_range, "--xy-range");
    if (a.n < 1) throw UsageError("--n must be >= 1");
    if (a.workers < 1) throw UsageError("--workers must be >= 1");
    if (a.motion_variants < 0) throw UsageError("--motion-variants must be >= 0");
    Config cfg;
    auto nets = load_generator(resolve_checkpoint(run, a.checkpoint), &cfg);
    const auto frames = a.frames > 0 ? a.frames : cfg.train.frames;
    const auto height = a.height > 0 ? a.height : cfg.resolution();
    const auto width = a.width > 0 ? a.width : cfg.resolution();
    if (a.frames == 0 || a.height == 0 || a.width == 0) throw UsageError("sizes must be >= 1");
    const auto grid = make_subgrid(height, width, frames, xy_range, xy_range, t_range);

    Rng rng = Rng::derive(a.seed, "sample");
    const auto z = sample_latents(rng, a.n, nets->config());
    const auto dir = run.samples() / a.name;
    for (std::int64_t i = 0; i < a.n; ++i) {
        const auto clip_dir = dir / ("clip_" + zero_pad(i, 3));
        torch::NoGradGuard no_grad;
        auto [params, head] = nets->forward(z.select(i));
        const auto clip = decode_parallel(params, head, grid, a.workers);
        write_clip(clip, clip_dir.string(), "clip_" + zero_pad(i, 3));
        run.log(0, "sample", relative(run, clip_dir));
        if (a.motion_variants > 0) {
            Rng mrng = Rng::derive(a.seed, "motion/" + std::to_string(i));
            const auto variants = resample_motion(nets, z.select(i).z_content, a.motion_variants, mrng, grid);
            for (std::size_t k = 0; k < variants.clips.size(); ++k) {
                const auto vdir = clip_dir / ("variant_" + zero_pad(static_cast<std::int64_t>(k), 2));
                write_clip(variants.clips[k], vdir.string(), vdir.filename().string());
                run.log(0, "motion-variant", relative(run, vdir));
            }
            for (std::size_t k = 0; k < variants.differences.size(); ++k) {
                const auto ddir = clip_dir / ("difference_" + zero_pad(static_cast<std::int64_t>(k + 1), 2));
                write_clip(VideoClip(variants.differences[k].frames * 0.5), ddir.string(), ddir.filename().string());
                run.log(0, "motion-difference", relative(run, ddir));
            }
        }
    }
    out << "wrote " << a.n << " clips (" << frames << "x" << height << "x" << width << ") to " << dir.string() << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------------------
// project / predict
// ----------------------------------------------------------------------------

struct ProjectArgs {
    std::string run_dir, checkpoint, target, name = "projection";
    std::vector<std::int64_t> indices{6, 7, 8};
    std::int64_t iterations = 2000, restarts = 3, self_seed = -1;
    std::uint64_t seed = 0;
};

int cmd_project(const ProjectArgs& a, std::ostream& out) {
    RunDirectory run(a.run_dir);
    if (a.target.empty() == (a.self_seed < 0)) throw UsageError("give exactly one of --target or --self-seed");
    if (a.indices.empty()) throw UsageError("--indices must not be empty");
    if (a.iterations < 0 || a.restarts < 1) throw UsageError("--iterations must be >= 0 and --restarts >= 1");
    Config cfg;
    auto nets = load_generator(resolve_checkpoint(run, a.checkpoint), &cfg);

    VideoClip clip;
    if (!a.target.empty()) {
        if (!fs::exists(a.target)) throw UsageError("target clip not found: " + a.target);
        clip = read_clip(a.target);
    } else {
        Rng rng = Rng::derive(static_cast<std::uint64_t>(a.self_seed), "project/self");
        clip = synthesize(nets, sample_latents(rng, 1, nets->config()),
                          make_grid(cfg.resolution(), cfg.resolution(), cfg.train.frames));
    }
    const auto T = clip.length();
    std::vector<TargetFrame> targets;
    for (auto k : a.indices) {
        if (k < 0 || k >= T) throw UsageError("--indices value " + std::to_string(k) + " outside the clip");
        targets.push_back({T > 1 ? static_cast<double>(k) / static_cast<double>(T - 1) : 0.0, clip.frame(k)});
    }
    ProjectionOptions opt;
    opt.iterations = a.iterations;
    opt.restarts = a.restarts;
    opt.seed = a.seed;
    const auto result = project(nets, targets, opt);

    TensorArchive archive;
    archive.records.push_back({"z_content", result.z_hat.z_content});
    archive.records.push_back({"z_motion", result.z_hat.z_motion});
    archive.records.push_back({"height", torch::tensor({clip.height()}, torch::kInt64)});
    archive.records.push_back({"width", torch::tensor({clip.width()}, torch::kInt64)});
    const auto latent = run.reports() / (a.name + ".latent");
    write_archive(latent.string(), archive);

    std::ostringstream trace;
    trace.precision(10);
    trace << "iteration,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i) trace << i << "," << result.loss_trace[i] << "\n";
    const auto trace_path = run.reports() / (a.name + "_trace.csv");
    write_text(trace_path, trace.str());

    std::ostringstream summary;
    summary.precision(10);
    summary << "final_psnr=" << result.final_psnr << "\niterations=" << result.iterations << "\nrestarts=" << a.restarts
            << "\ntarget_times=";
    for (std::size_t i = 0; i < targets.size(); ++i) summary << (i ? "," : "") << targets[i].t;
    summary << "\nlatent=" << latent.filename().string() << "\ntrace=" << trace_path.filename().string() << "\n";
    const auto summary_path = run.reports() / (a.name + ".txt");
    write_text(summary_path, summary.str());
    run.log(0, "project", relative(run, latent));
    run.log(0, "project-trace", relative(run, trace_path));
    run.log(0, "project-summary", relative(run, summary_path));
    out << "projection PSNR " << result.final_psnr << " dB after " << result.iterations << " iterations\n";
    return kExitOk;
}

struct PredictArgs {
    std::string run_dir, checkpoint, projection, name = "prediction";
    std::vector<double> times;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    RunDirectory run(a.run_dir);
    if (a.times.empty()) throw UsageError("--times must list at least one time");
    for (double t : a.times)
        if (!std::isfinite(t)) throw UsageError("--times values must be finite");
    auto nets = load_generator(resolve_checkpoint(run, a.checkpoint));
    const auto path = a.projection.empty() ? run.reports() / "projection.latent" : fs::path(a.projection);
    if (!fs::exists(path)) throw UsageError("projection not found: " + path.string());
    const auto archive = read_archive(path.string());
    ProjectionResult proj;
    proj.z_hat = {archive.at("z_content"), archive.at("z_motion")};
    const auto clip = predict(nets, proj, a.times, archive.at("height").item<std::int64_t>(),
                              archive.at("width").item<std::int64_t>());
    const auto dir = run.samples() / a.name;
    write_clip(clip, dir.string(), a.name);
    run.log(0, "predict", relative(run, dir));
    out << "wrote " << clip.length() << " predicted frames to " << dir.string() << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------------------
// eval
// ----------------------------------------------------------------------------

struct EvalArgs {
    std::string run_dir, checkpoint, metric = "fvd", embedder = "toy";
    std::int64_t runs = 10, n = -1;
    std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    RunDirectory run(a.run_dir);
    Metric metric;
    try {
        metric = parse_metric(a.metric);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (a.runs < 1) throw UsageError("--runs must be >= 1");
    Config cfg;
    auto nets = load_generator(resolve_checkpoint(run, a.checkpoint), &cfg);
    const auto n = a.n > 0 ? a.n : cfg.run.eval_samples;
    if (n < 2) throw UsageError("--n must be >= 2");

    auto bench = bench_for(run, cfg);
    std::shared_ptr<Embedder> embedder;
    if (a.embedder == "toy") {
        embedder = bench.embedder;
    } else if (a.embedder == "random") {
        embedder = std::make_shared<RandomProjectionEmbedder>(64, a.seed);
    } else {
        if (!fs::exists(a.embedder)) throw UsageError("embedder weights not found: " + a.embedder);
        embedder = std::make_shared<ScriptedEmbedder>(a.embedder);
    }
    if (metric == Metric::is && !embedder->has_classes())
        throw UsageError("IS needs an embedder with a class head (use --embedder toy)");

    const auto res = cfg.resolution();
    ScoreReport report;
    try {
        report = score_protocol(generator_source(nets, res, res, cfg.train.frames),
                                pool_source(reference_clips(cfg, bench)), *embedder, metric, a.runs, n, a.seed);
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("metric failed: ") + e.what());
    }
    const auto stem = "eval_" + a.metric;
    const auto kv = run.reports() / (stem + ".txt");
    write_text(kv, report.to_key_value() + "embedder=" + embedder->name() + "\nprovenance=" + embedder->provenance() + "\n");
    const auto table = run.reports() / (stem + ".tsv");
    write_text(table, report.to_table());
    run.log(0, "eval", relative(run, kv));
    run.log(0, "eval-table", relative(run, table));
    out << report.metric << " " << report.mean << " ± " << report.std << " (" << report.runs << " runs, n=" << n
        << (report.real_resampled ? ", real clips resampled" : "") << ")\n";
    return kExitOk;
}

// ----------------------------------------------------------------------------
// analyze
// ----------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string run_dir, checkpoint;
    bool logit_sweep = false, pca = false;
    std::int64_t pairs = 10, motion_samples = 8, times = 16, points = 11;
    std::uint64_t seed = 0;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
    RunDirectory run(a.run_dir);
    if (!a.logit_sweep && !a.pca) throw UsageError("choose at least one of --logit-sweep, --pca");
    if (a.pairs < 1 || a.motion_samples < 1 || a.times < 1 || a.points < 2)
        throw UsageError("--pairs, --motion-samples, --times must be >= 1 and --points >= 2");
    const auto ckpt = resolve_checkpoint(run, a.checkpoint);
    Config cfg;
    auto nets = load_generator(ckpt, &cfg);

    if (a.logit_sweep) {
        auto disc = load_discriminator(ckpt);
        Rng rng = Rng::derive(a.seed, "analyze/pairs");
        const auto res = cfg.resolution();
        const auto clips = synth_two_circles(a.pairs, res, res, cfg.train.frames, rng);
        const auto deltas = axis_samples(a.points, 0.0, 1.0);
        std::vector<std::pair<double, double>> mean(deltas.size());
        for (std::size_t i = 0; i < deltas.size(); ++i) mean[i] = {deltas[i], 0.0};
        for (const auto& clip : clips.clips) {
            // Training triplets put the Beta(2,1) frame first, so a far pair arrives as (last, first).
            const auto rows = logit_sweep(disc, clip.frame(clip.length() - 1), clip.frame(0), deltas);
            for (std::size_t i = 0; i < rows.size(); ++i) mean[i].second += rows[i].second / static_cast<double>(a.pairs);
        }
        const auto path = run.reports() / "logit_sweep.csv";
        write_text(path, table_csv(mean, "delta_t", "mean_logit"));
        run.log(0, "logit-sweep", relative(run, path));
        out << "logit at dt=0: " << mean.front().second << ", at dt=1: " << mean.back().second << "\n";
    }
    if (a.pca) {
        Rng rng = Rng::derive(a.seed, "analyze/pca");
        const auto zi = sample_latents(rng, 1, nets->config()).z_content;
        const auto traj = motion_pca(nets, zi, a.motion_samples, a.times, rng);
        std::ostringstream csv;
        csv.precision(10);
        csv << "sample,time_index,pc1,pc2\n";
        for (std::size_t s = 0; s < traj.paths.size(); ++s)
            for (std::size_t t = 0; t < traj.paths[s].size(); ++t)
                csv << s << "," << t << "," << traj.paths[s][t][0] << "," << traj.paths[s][t][1] << "\n";
        const auto path = run.reports() / "motion_pca.csv";
        write_text(path, csv.str());
        std::ostringstream summary;
        summary.precision(10);
        summary << "origin=" << traj.origin[0] << "," << traj.origin[1] << "\nexplained_variance="
                << traj.explained_variance[0] << "," << traj.explained_variance[1] << "\n";
        const auto spath = run.reports() / "motion_pca.txt";
        write_text(spath, summary.str());
        run.log(0, "motion-pca", relative(run, path));
        run.log(0, "motion-pca-summary", relative(run, spath));
        out << "motion PCA written (" << traj.paths.size() << " trajectories)\n";
    }
    return kExitOk;
}

// ----------------------------------------------------------------------------
// bench
// ----------------------------------------------------------------------------

struct BenchArgs {
    std::string run_dir, checkpoint;
    std::vector<std::int64_t> lengths{16, 32, 64};
    std::int64_t resolution = -1;
    int trials = 5, workers = 1;
    std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    RunDirectory run(a.run_dir);
    if (a.lengths.empty() || a.trials < 1 || a.workers < 1) throw UsageError("need lengths, --trials >= 1, --workers >= 1");
    for (auto l : a.lengths)
        if (l < 1) throw UsageError("lengths must be >= 1");
    Config cfg;
    auto nets = load_generator(resolve_checkpoint(run, a.checkpoint), &cfg);
    const auto res = a.resolution > 0 ? a.resolution : cfg.resolution();
    const auto rows = throughput_benchmark(nets, a.lengths, res, a.trials, a.workers, a.seed);
    std::ostringstream csv;
    csv.precision(6);
    csv << "length,resolution,workers,seconds,frames_per_second\n";
    for (const auto& r : rows)
        csv << r.length << "," << res << "," << a.workers << "," << r.seconds << ","
            << static_cast<double>(r.length) / r.seconds << "\n";
    const auto path = run.reports() / "bench.csv";
    write_text(path, csv.str());
    run.log(0, "bench", relative(run, path));
    out << csv.str();
    return kExitOk;
}

// ----------------------------------------------------------------------------
// ablation
// ----------------------------------------------------------------------------

struct AblationArgs {
    std::string run_dir, config, pattern = "cumulative";
    std::int64_t steps = -1;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

int cmd_ablation(const AblationArgs& a, const std::vector<std::string>& extras, std::ostream& out) {
    RunDirectory run(a.run_dir);
    Config cfg = !a.config.empty() ? load_config_file(a.config) : run.has_snapshot() ? run.load_snapshot() : desk_config();
    apply_overrides(cfg, extras);
    cfg.validate();
    run.snapshot(cfg);
    if (a.seeds.empty()) throw UsageError("--seeds must list at least one seed");
    AblationOptions opt;
    if (a.pattern == "cumulative")
        opt.pattern = AblationPattern::cumulative;
    else if (a.pattern == "one-at-a-time")
        opt.pattern = AblationPattern::one_at_a_time;
    else
        throw UsageError("--pattern must be cumulative or one-at-a-time");
    const auto steps = a.steps >= 0 ? a.steps : cfg.train.total_steps;
    const auto bench = bench_for(run, cfg);
    opt.on_run = [&](const AblationFlags& f, std::uint64_t seed, double fvd) {
        std::ostringstream detail;
        detail.precision(8);
        detail << "row=" << f.label() << "\tseed=" << seed << "\tfvd=" << fvd;
        run.log(steps, "ablation-run", {}, detail.str());
        out << f.label() << " seed " << seed << ": FVD " << fvd << "\n";
    };
    const auto m = run_ablation(cfg, steps, a.seeds, bench, opt);
    const auto csv = run.reports() / "ablation.csv";
    const auto txt = run.reports() / "ablation.txt";
    write_text(csv, m.to_csv());
    write_text(txt, m.summary());
    run.log(steps, "ablation", relative(run, csv));
    run.log(steps, "ablation-summary", relative(run, txt));
    out << m.summary();
    return kExitOk;
}

}  // namespace

// ----------------------------------------------------------------------------
// Entry point
// ----------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Implicit-neural-representation video GAN toolkit"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train (or resume) a model in a run directory");
    train_cmd->add_option("--run-dir", train_args.run_dir, "Run directory")->required();
    train_cmd->add_option("--config", train_args.config, "key=value config file");
    train_cmd->add_option("--resume", train_args.resume, "Checkpoint to resume from, or 'latest'");
    train_cmd->allow_extras();
    train_cmd->footer("Any config key can be overridden with --key=value.");

    SampleArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "Decode clips, optionally on extended time/space ranges");
    sample_cmd->add_option("--run-dir", sample_args.run_dir)->required();
    sample_cmd->add_option("--checkpoint", sample_args.checkpoint, "Defaults to checkpoints/latest.ckpt");
    sample_cmd->add_option("--n", sample_args.n);
    sample_cmd->add_option("--frames", sample_args.frames);
    sample_cmd->add_option("--height", sample_args.height);
    sample_cmd->add_option("--width", sample_args.width);
    sample_cmd->add_option("--t-range", sample_args.t_range)->expected(2);
    sample_cmd->add_option("--xy-range", sample_args.xy_range)->expected(2);
    sample_cmd->add_option("--seed", sample_args.seed);
    sample_cmd->add_option("--motion-variants", sample_args.motion_variants);
    sample_cmd->add_option("--workers", sample_args.workers);
    sample_cmd->add_option("--name", sample_args.name);

    ProjectArgs project_args;
    auto* project_cmd = app.add_subcommand("project", "Project frames into the latent space");
    project_cmd->add_option("--run-dir", project_args.run_dir)->required();
    project_cmd->add_option("--checkpoint", project_args.checkpoint);
    project_cmd->add_option("--target", project_args.target, "Clip directory holding the frames");
    project_cmd->add_option("--self-seed", project_args.self_seed, "Project a clip the model generates from this seed");
    project_cmd->add_option("--indices", project_args.indices, "Frame indices to fit")->delimiter(',');
    project_cmd->add_option("--iterations", project_args.iterations);
    project_cmd->add_option("--restarts", project_args.restarts);
    project_cmd->add_option("--seed", project_args.seed);
    project_cmd->add_option("--name", project_args.name);

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "Decode a projected latent at arbitrary times");
    predict_cmd->add_option("--run-dir", predict_args.run_dir)->required();
    predict_cmd->add_option("--checkpoint", predict_args.checkpoint);
    predict_cmd->add_option("--projection", predict_args.projection, "Defaults to reports/projection.latent");
    predict_cmd->add_option("--times", predict_args.times)->delimiter(',')->required();
    predict_cmd->add_option("--name", predict_args.name);

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint with FVD, KVD or IS");
    eval_cmd->add_option("--run-dir", eval_args.run_dir)->required();
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint);
    eval_cmd->add_option("--metric", eval_args.metric, "fvd, kvd or is");
    eval_cmd->add_option("--runs", eval_args.runs);
    eval_cmd->add_option("--n", eval_args.n, "Samples per run (default: eval_samples)");
    eval_cmd->add_option("--embedder", eval_args.embedder, "toy, random, or a TorchScript file");
    eval_cmd->add_option("--seed", eval_args.seed);

    AnalyzeArgs analyze_args;
    auto* analyze_cmd = app.add_subcommand("analyze", "Discriminator logit sweep and motion-feature PCA");
    analyze_cmd->add_option("--run-dir", analyze_args.run_dir)->required();
    analyze_cmd->add_option("--checkpoint", analyze_args.checkpoint);
    analyze_cmd->add_flag("--logit-sweep", analyze_args.logit_sweep);
    analyze_cmd->add_flag("--pca", analyze_args.pca);
    analyze_cmd->add_option("--pairs", analyze_args.pairs);
    analyze_cmd->add_option("--points", analyze_args.points, "Number of delta-t values in [0, 1]");
    analyze_cmd->add_option("--motion-samples", analyze_args.motion_samples);
    analyze_cmd->add_option("--times", analyze_args.times);
    analyze_cmd->add_option("--seed", analyze_args.seed);

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Time video generation for several lengths");
    bench_cmd->add_option("--run-dir", bench_args.run_dir)->required();
    bench_cmd->add_option("--checkpoint", bench_args.checkpoint);
    bench_cmd->add_option("--lengths", bench_args.lengths)->delimiter(',');
    bench_cmd->add_option("--resolution", bench_args.resolution);
    bench_cmd->add_option("--trials", bench_args.trials);
    bench_cmd->add_option("--workers", bench_args.workers);
    bench_cmd->add_option("--seed", bench_args.seed);

    AblationArgs ablation_args;
    auto* ablation_cmd = app.add_subcommand("ablation", "Train and score the generator ablation rows");
    ablation_cmd->add_option("--run-dir", ablation_args.run_dir)->required();
    ablation_cmd->add_option("--config", ablation_args.config);
    ablation_cmd->add_option("--steps", ablation_args.steps, "Default: total_steps");
    ablation_cmd->add_option("--seeds", ablation_args.seeds)->delimiter(',');
    ablation_cmd->add_option("--pattern", ablation_args.pattern, "cumulative or one-at-a-time");
    ablation_cmd->allow_extras();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        require_cpu_device();
        if (*train_cmd) return cmd_train(train_args, train_cmd->remaining(), out, err);
        if (*sample_cmd) return cmd_sample(sample_args, out);
        if (*project_cmd) return cmd_project(project_args, out);
        if (*predict_cmd) return cmd_predict(predict_args, out);
        if (*eval_cmd) return cmd_eval(eval_args, out);
        if (*analyze_cmd) return cmd_analyze(analyze_args, out);
        if (*bench_cmd) return cmd_bench(bench_args, out);
        if (*ablation_cmd) return cmd_ablation(ablation_args, ablation_cmd->remaining(), out);
    } catch (const ConfigError& e) {
        err << "config error";
        if (!e.key().empty()) err << " [" << e.key() << "]";
        err << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace vidinr
