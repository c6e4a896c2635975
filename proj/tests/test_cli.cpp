#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "vidinr/cli.hpp"
#include "vidinr/rng.hpp"

using namespace vidinr;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "resolution=8\nd_channels=8\nhidden=16\nmapping_hidden=16\ndim_zI=8\ndim_zM=8\nmod_rank=2\n"
    "batch_size=2\nframes=4\ndataset_size=8\neval_samples=8\nembedder_steps=5\n"
    "checkpoint_every=10\nsample_every=0\neval_every=0\n";

struct Result {
    int code;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "vidinr");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string write_config(const test::TempDir& dir, const std::string& extra = {}) {
    const auto path = dir.str("tiny.cfg");
    std::ofstream(path) << kTinyConfig << extra;
    return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with code 2") {
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    CHECK(cli({"train"}).code == kExitUsage);
    CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("total_steps=0 writes the initial checkpoint") {
    test::TempDir dir("cli_zero");
    const auto r = cli({"train", "--run-dir", dir.str("run"), "--config", write_config(dir), "--total_steps=0"});
    CHECK(r.code == kExitOk);
    CHECK(fs::exists(dir.path() / "run" / "checkpoints" / "step_000000.ckpt"));
    CHECK(fs::exists(dir.path() / "run" / "checkpoints" / "latest.ckpt"));
    CHECK(fs::exists(dir.path() / "run" / "config.txt"));
    CHECK(slurp(dir.path() / "run" / "log.txt").find("event=checkpoint") != std::string::npos);
}

TEST_CASE("fixed seed, 50 steps, run twice gives identical checkpoints") {
    test::TempDir dir("cli_determinism");
    const auto cfg = write_config(dir, "total_steps=50\n");
    REQUIRE(cli({"train", "--run-dir", dir.str("a"), "--config", cfg}).code == kExitOk);
    REQUIRE(cli({"train", "--run-dir", dir.str("b"), "--config", cfg}).code == kExitOk);
    const auto a = slurp(dir.path() / "a" / "checkpoints" / "step_000050.ckpt");
    const auto b = slurp(dir.path() / "b" / "checkpoints" / "step_000050.ckpt");
    REQUIRE_FALSE(a.empty());
    CHECK(fnv1a64(a) == fnv1a64(b));

    SUBCASE("resuming from an intermediate checkpoint reaches the same state") {
        REQUIRE(cli({"train", "--run-dir", dir.str("c"), "--config", cfg, "--resume",
                     (dir.path() / "a" / "checkpoints" / "step_000020.ckpt").string()})
                    .code == kExitOk);
        CHECK(fnv1a64(slurp(dir.path() / "c" / "checkpoints" / "step_000050.ckpt")) == fnv1a64(a));
        CHECK(slurp(dir.path() / "c" / "log.txt").find("event=resume") != std::string::npos);
    }
}

TEST_CASE("config errors name the offending key") {
    test::TempDir dir("cli_config");
    auto r = cli({"train", "--run-dir", dir.str("run"), "--config", write_config(dir), "--no_such_key=3"});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("no_such_key") != std::string::npos);
    r = cli({"train", "--run-dir", dir.str("run2"), "--config", write_config(dir), "--batch_size=0"});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("batch_size") != std::string::npos);
}

TEST_CASE("a run directory refuses a different configuration") {
    test::TempDir dir("cli_snapshot");
    const auto cfg = write_config(dir, "total_steps=0\n");
    REQUIRE(cli({"train", "--run-dir", dir.str("run"), "--config", cfg}).code == kExitOk);
    const auto r = cli({"train", "--run-dir", dir.str("run"), "--config", cfg, "--hidden=32"});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("hidden") != std::string::npos);
}

TEST_CASE("divergence exits with code 3 and names the last checkpoint") {
    test::TempDir dir("cli_diverge");
    const auto r = cli({"train", "--run-dir", dir.str("run"), "--config", write_config(dir, "total_steps=30\n"),
                        "--lr_g=1e30", "--lr_d=1e30"});
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("last checkpoint") != std::string::npos);
    CHECK(r.err.find("step_000000.ckpt") != std::string::npos);
    CHECK(slurp(dir.path() / "run" / "log.txt").find("event=diverged") != std::string::npos);
}

TEST_CASE("inference and analysis subcommands on a tiny run") {
    test::TempDir dir("cli_tools");
    const auto run = dir.str("run");
    REQUIRE(cli({"train", "--run-dir", run, "--config", write_config(dir, "total_steps=10\n")}).code == kExitOk);
    const fs::path reports = fs::path(run) / "reports";

    SUBCASE("sample") {
        CHECK(cli({"sample", "--run-dir", run, "--n", "2"}).code == kExitOk);
        CHECK(fs::exists(fs::path(run) / "samples" / "sample" / "clip_001" / "frame_000003.png"));
        CHECK(cli({"sample", "--run-dir", run, "--t-range", "0", "4", "--frames", "16", "--name", "ext"}).code ==
              kExitOk);
        CHECK(fs::exists(fs::path(run) / "samples" / "ext" / "clip_000" / "frame_000015.png"));
        CHECK(cli({"sample", "--run-dir", run, "--xy-range", "-0.25", "1.25", "--height", "13", "--width", "13",
                   "--name", "zoom"})
                  .code == kExitOk);
        CHECK(cli({"sample", "--run-dir", run, "--motion-variants", "3", "--name", "mv"}).code == kExitOk);
        CHECK(fs::exists(fs::path(run) / "samples" / "mv" / "clip_000" / "difference_01"));
        CHECK(cli({"sample", "--run-dir", run, "--t-range", "1", "0"}).code == kExitUsage);
        CHECK(cli({"sample", "--run-dir", run, "--xy-range", "nan", "1"}).code == kExitUsage);
        CHECK(cli({"sample", "--run-dir", run, "--n", "0"}).code == kExitUsage);
    }
    SUBCASE("missing checkpoint") {
        CHECK(cli({"sample", "--run-dir", run, "--checkpoint", dir.str("nope.ckpt")}).code == kExitUsage);
        CHECK(cli({"eval", "--run-dir", dir.str("empty")}).code == kExitUsage);
    }
    SUBCASE("eval with one run has zero spread") {
        const auto r = cli({"eval", "--run-dir", run, "--metric", "fvd", "--runs", "1"});
        CHECK(r.code == kExitOk);
        const auto text = slurp(reports / "eval_fvd.txt");
        CHECK(text.find("std=0\n") != std::string::npos);
        CHECK(text.find("runs=1\n") != std::string::npos);
        CHECK(cli({"eval", "--run-dir", run, "--metric", "lpips"}).code == kExitUsage);
    }
    SUBCASE("project then predict") {
        CHECK(cli({"project", "--run-dir", run, "--self-seed", "2", "--indices", "1,2", "--iterations", "5",
                   "--restarts", "1"}).code ==
              kExitOk);
        CHECK(fs::exists(reports / "projection.latent"));
        CHECK(fs::exists(reports / "projection_trace.csv"));
        CHECK(cli({"predict", "--run-dir", run, "--times", "0,0.2,1"}).code == kExitOk);
        CHECK(fs::exists(fs::path(run) / "samples" / "prediction" / "frame_000002.png"));
    }
    SUBCASE("logit sweep and PCA") {
        CHECK(cli({"analyze", "--run-dir", run, "--logit-sweep", "--pca", "--points", "5"}).code == kExitOk);
        const auto csv = slurp(reports / "logit_sweep.csv");
        CHECK(csv.rfind("delta_t,mean_logit\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
        CHECK(fs::exists(reports / "motion_pca.csv"));
    }
    SUBCASE("bench") {
        CHECK(cli({"bench", "--run-dir", run, "--lengths", "2,4", "--resolution", "8", "--trials", "1"}).code ==
              kExitOk);
        const auto csv = slurp(reports / "bench.csv");
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    }
}

TEST_CASE("the installed binary reports exit codes") {
    auto status = [](const std::string& args) {
        const int raw = std::system((std::string(VIDINR_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    CHECK(status("--help") == kExitOk);
    CHECK(status("sample") == kExitUsage);
    test::TempDir dir("cli_binary");
    CHECK(status("eval --run-dir " + dir.str("missing")) == kExitUsage);
}

}
