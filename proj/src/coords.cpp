#include "vidinr/coords.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vidinr {

namespace {

void require_positive(std::int64_t n, const char* what) {
    if (n < 1) throw std::invalid_argument(std::string(what) + " must be >= 1, got " + std::to_string(n));
}

void require_range(Range r, const char* what) {
    if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
        throw std::invalid_argument(std::string(what) + " range requires finite lo <= hi");
}

bool near_integer(double v, double& rounded) {
    rounded = std::round(v);
    return std::abs(v - rounded) <= 1e-9 * std::max(1.0, std::abs(v));
}

}  // namespace

CoordinateGrid::CoordinateGrid(std::vector<double> xs, std::vector<double> ys, std::vector<double> ts)
    : xs_(std::move(xs)), ys_(std::move(ys)), ts_(std::move(ts)) {
    if (xs_.empty() || ys_.empty() || ts_.empty())
        throw std::invalid_argument("CoordinateGrid: every axis needs at least one sample");
}

std::array<double, 3> CoordinateGrid::point(std::int64_t i) const {
    if (i < 0 || i >= size()) throw std::out_of_range("CoordinateGrid::point index");
    const std::int64_t hw = height() * width();
    const std::int64_t k = i / hw;
    const std::int64_t rem = i % hw;
    return {xs_[rem % width()], ys_[rem / width()], ts_[k]};
}

std::vector<std::array<double, 3>> CoordinateGrid::points() const {
    std::vector<std::array<double, 3>> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (double t : ts_)
        for (double y : ys_)
            for (double x : xs_) out.push_back({x, y, t});
    return out;
}

CoordinateGrid CoordinateGrid::frame(std::int64_t k) const {
    if (k < 0 || k >= frames()) throw std::out_of_range("CoordinateGrid::frame index");
    return CoordinateGrid(xs_, ys_, {ts_[k]});
}

CoordinateGrid CoordinateGrid::with_times(std::vector<double> ts) const {
    return CoordinateGrid(xs_, ys_, std::move(ts));
}

std::vector<double> axis_samples(std::int64_t n, double lo, double hi) {
    require_positive(n, "axis sample count");
    require_range({lo, hi}, "axis");
    std::vector<double> out(static_cast<std::size_t>(n));
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double steps = static_cast<double>(n - 1);
    double denom = 0.0, offset = 0.0;
    const bool lattice = hi > lo && near_integer(steps / (hi - lo), denom) && denom > 0.0 &&
                         near_integer(lo * denom, offset);
    for (std::int64_t i = 0; i < n; ++i) {
        if (lattice)
            out[i] = (static_cast<double>(i) + offset) / denom;
        else
            out[i] = lo + (hi - lo) * (static_cast<double>(i) / steps);
    }
    if (!lattice) out.back() = hi;
    return out;
}

CoordinateGrid make_grid(std::int64_t height, std::int64_t width, std::int64_t frames) {
    return make_subgrid(height, width, frames, {0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0});
}

CoordinateGrid make_subgrid(std::int64_t height, std::int64_t width, std::int64_t frames,
                            Range x_range, Range y_range, Range t_range) {
    require_positive(height, "height");
    require_positive(width, "width");
    require_positive(frames, "frames");
    require_range(x_range, "x");
    require_range(y_range, "y");
    require_range(t_range, "t");
    return CoordinateGrid(axis_samples(width, x_range.lo, x_range.hi),
                          axis_samples(height, y_range.lo, y_range.hi),
                          axis_samples(frames, t_range.lo, t_range.hi));
}

CoordinateGrid refine_time(const CoordinateGrid& grid, std::int64_t factor) {
    if (factor < 1) throw std::invalid_argument("refine_time: factor must be >= 1");
    if (factor == 1 || grid.frames() == 1) return grid;
    const Range t = grid.t_range();
    auto ts = axis_samples(factor * (grid.frames() - 1) + 1, t.lo, t.hi);
    // Original samples are carried over verbatim.
    for (std::int64_t k = 0; k < grid.frames(); ++k) ts[k * factor] = grid.ts()[k];
    return grid.with_times(std::move(ts));
}

}  // namespace vidinr
