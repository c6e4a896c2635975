#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "vidinr/config.hpp"

namespace vidinr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Bad flags, ranges or missing inputs (exit code 2).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Layout of a run: config.txt snapshot, checkpoints/, samples/, reports/,
/// an append-only log.txt and an advisory lock held while a command runs.
class RunDirectory {
public:
    explicit RunDirectory(std::filesystem::path root);
    ~RunDirectory();
    RunDirectory(const RunDirectory&) = delete;
    RunDirectory& operator=(const RunDirectory&) = delete;

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path checkpoints() const { return root_ / "checkpoints"; }
    std::filesystem::path samples() const { return root_ / "samples"; }
    std::filesystem::path reports() const { return root_ / "reports"; }
    std::filesystem::path config_path() const { return root_ / "config.txt"; }
    std::filesystem::path latest_checkpoint() const { return checkpoints() / "latest.ckpt"; }

    bool has_snapshot() const;
    /// Writes the snapshot, or checks that an existing one is identical.
    void snapshot(const Config& config);
    Config load_snapshot() const;

    /// Appends `wall-time<TAB>step=<n><TAB>event=<event>[<TAB>file=<rel>][<TAB>detail]`.
    void log(std::int64_t step, const std::string& event, const std::filesystem::path& file = {},
             const std::string& detail = {});

private:
    std::filesystem::path root_;
    int lock_fd_ = -1;
};

std::string checkpoint_name(std::int64_t step);  // step_000123.ckpt

/// Entry point of the `vidinr` binary; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vidinr
