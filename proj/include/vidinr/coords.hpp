#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace vidinr {

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

/// Separable space-time sample lattice. Points are enumerated (t, y, x)-major,
/// so frame k occupies indices [k*H*W, (k+1)*H*W).
class CoordinateGrid {
public:
    CoordinateGrid(std::vector<double> xs, std::vector<double> ys, std::vector<double> ts);

    std::int64_t height() const { return static_cast<std::int64_t>(ys_.size()); }
    std::int64_t width() const { return static_cast<std::int64_t>(xs_.size()); }
    std::int64_t frames() const { return static_cast<std::int64_t>(ts_.size()); }
    std::int64_t size() const { return height() * width() * frames(); }

    const std::vector<double>& xs() const { return xs_; }
    const std::vector<double>& ys() const { return ys_; }
    const std::vector<double>& ts() const { return ts_; }

    Range x_range() const { return {xs_.front(), xs_.back()}; }
    Range y_range() const { return {ys_.front(), ys_.back()}; }
    Range t_range() const { return {ts_.front(), ts_.back()}; }

    /// (x, y, t) of the flat index `i`.
    std::array<double, 3> point(std::int64_t i) const;
    std::vector<std::array<double, 3>> points() const;

    /// Same spatial axes, only time sample `k`.
    CoordinateGrid frame(std::int64_t k) const;
    /// Same spatial axes, the given time samples.
    CoordinateGrid with_times(std::vector<double> ts) const;

    bool operator==(const CoordinateGrid&) const = default;

private:
    std::vector<double> xs_, ys_, ts_;
};

/// `n` uniformly spaced samples covering [lo, hi] inclusive; a single sample
/// sits at `lo`. When the samples fall on a lattice k/D with integer D and
/// integer lo*D, they are computed as (i + lo*D)/D so that any two grids on
/// the same lattice agree bitwise at shared coordinates.
std::vector<double> axis_samples(std::int64_t n, double lo, double hi);

CoordinateGrid make_grid(std::int64_t height, std::int64_t width, std::int64_t frames);
CoordinateGrid make_subgrid(std::int64_t height, std::int64_t width, std::int64_t frames,
                            Range x_range, Range y_range, Range t_range);
/// Time axis resampled to factor*(T-1)+1 samples over the same range.
CoordinateGrid refine_time(const CoordinateGrid& grid, std::int64_t factor);

}  // namespace vidinr
