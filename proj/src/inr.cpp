#include "vidinr/inr.hpp"

#include <algorithm>
#include <thread>

#include "vidinr/errors.hpp"

namespace vidinr {

namespace {

// BLAS switches to matrix-vector kernels for very short operands, which round
// differently from the blocked kernels. Padding keeps per-row results
// independent of how many rows are evaluated together.
constexpr std::int64_t kMinRows = 16;

torch::Tensor modulated_forward(const ModulatedLayer& layer, const torch::Tensor& h) {
    const auto rows = h.size(1);
    torch::Tensor x = h;
    if (rows < kMinRows) x = torch::cat({h, torch::zeros({h.size(0), kMinRows - rows, h.size(2)}, h.options())}, 1);
    auto y = torch::bmm(x, layer.effective_weight().transpose(1, 2)) + layer.bias.unsqueeze(1);
    if (rows < kMinRows) y = y.narrow(1, 0, rows);
    return y;
}

// [B, d] x [W] x [H] -> [B, H, W, d]
torch::Tensor spatial_preactivation(const FirstLayerParams& p, const torch::Tensor& xs, const torch::Tensor& ys) {
    auto wx = p.w_x.unsqueeze(1).unsqueeze(1) * p.sigma_x;  // [B,1,1,d]
    auto wy = p.w_y.unsqueeze(1).unsqueeze(1) * p.sigma_y;
    auto x = xs.view({1, 1, -1, 1});
    auto y = ys.view({1, -1, 1, 1});
    return wx * x + wy * y;
}

torch::Tensor first_activation(const FirstLayerParams& p, const torch::Tensor& xs, const torch::Tensor& ys,
                               const torch::Tensor& feature) {
    auto spatial = spatial_preactivation(p, xs, ys).unsqueeze(1);  // [B,1,H,W,d]
    auto motion = feature.unsqueeze(2).unsqueeze(2);                // [B,K,1,1,d]
    auto bias = p.b.unsqueeze(1).unsqueeze(1).unsqueeze(1);         // [B,1,1,1,d]
    return torch::sin(spatial + motion + bias);
}

torch::Tensor apply_layers(const std::vector<ModulatedLayer>& layers, std::size_t begin, std::size_t end,
                           torch::Tensor h) {
    // h: [B, K, H, W, d]
    const auto shape = h.sizes().vec();
    auto flat = h.reshape({shape[0], -1, shape[4]});
    for (std::size_t i = begin; i < end; ++i)
        flat = torch::leaky_relu(modulated_forward(layers[i], flat), kLeakySlope);
    return flat.reshape({shape[0], shape[1], shape[2], shape[3], -1});
}

torch::Tensor strided(const torch::Tensor& axis, std::int64_t stride) {
    if (stride == 1) return axis;
    return axis.index({torch::indexing::Slice(torch::indexing::None, torch::indexing::None, stride)});
}

// Nearest-lower upsampling from a lattice of stride 2s to one of stride s.
torch::Tensor upsample_features(const torch::Tensor& h, std::int64_t fine_h, std::int64_t fine_w) {
    auto iy = torch::arange(fine_h, torch::kLong).div(2, "floor");
    auto ix = torch::arange(fine_w, torch::kLong).div(2, "floor");
    return h.index_select(2, iy).index_select(3, ix);
}

}  // namespace

torch::Tensor ModulatedLayer::effective_weight() const {
    return base.unsqueeze(0) * torch::bmm(mod_a, mod_b);
}

MotionHead MotionHead::select(std::int64_t i) const {
    MotionHead out = *this;
    out.w_t = w_t.narrow(0, i, 1);
    out.fm_in = fm_in.narrow(0, i, 1);
    out.fm_out = fm_out.narrow(0, i, 1);
    return out;
}

VideoINRParams VideoINRParams::select(std::int64_t i) const {
    auto pick = [i](const torch::Tensor& t) { return t.narrow(0, i, 1); };
    auto pick_layer = [&](const ModulatedLayer& l) {
        return ModulatedLayer{l.base, pick(l.mod_a), pick(l.mod_b), pick(l.bias)};
    };
    VideoINRParams out;
    out.first = {pick(first.w_x), pick(first.w_y), pick(first.b), first.sigma_x, first.sigma_y};
    for (const auto& l : body.layers) out.body.layers.push_back(pick_layer(l));
    out.body.head = pick_layer(body.head);
    out.body.stages = body.stages;
    return out;
}

void VideoINRParams::validate() const {
    const auto B = batch();
    const auto d = first.hidden();
    auto check = [&](bool ok, const char* what) {
        if (!ok) throw ShapeError(std::string("VideoINRParams: ") + what);
    };
    check(first.w_y.sizes().equals({B, d}) && first.b.sizes().equals({B, d}), "first-layer shapes differ");
    check(first.sigma_x > 0 && first.sigma_y > 0, "frequencies must be positive");
    std::int64_t in = d;
    auto check_layer = [&](const ModulatedLayer& l) {
        check(l.fan_in() == in, "layer fan-in does not chain");
        check(l.mod_a.size(0) == B && l.mod_a.size(1) == l.fan_out(), "modulation A shape");
        check(l.mod_b.size(0) == B && l.mod_b.size(2) == l.fan_in(), "modulation B shape");
        check(l.mod_a.size(2) == l.mod_b.size(1), "modulation ranks differ");
        check(l.rank() >= 1 && l.rank() <= std::min(l.fan_in(), l.fan_out()), "modulation rank out of range");
        check(l.bias.sizes().equals({B, l.fan_out()}), "bias shape");
        in = l.fan_out();
    };
    for (const auto& l : body.layers) check_layer(l);
    check_layer(body.head);
    check(body.head.fan_out() == 3, "output head must produce 3 channels");
    check(body.stages >= 1 && body.stages <= std::max<std::int64_t>(1, static_cast<std::int64_t>(body.layers.size())),
          "stage count must be in [1, layer count]");
}

torch::Tensor motion_feature(const MotionHead& head, const torch::Tensor& t) {
    if (t.dim() != 2 || t.size(0) != head.batch()) throw ShapeError("motion_feature: times must be [B, K]");
    // [B, K, d]
    auto u = head.w_t.unsqueeze(1) * (t.unsqueeze(2) * head.sigma_t);
    if (!head.flags.use_f_M) return u;
    // Elementwise products keep each output independent of K.
    auto hidden = (u.unsqueeze(2) * head.fm_in.unsqueeze(1)).sum(-1);  // [B, K, h]
    hidden = torch::leaky_relu(hidden, kLeakySlope);
    return (hidden.unsqueeze(2) * head.fm_out.unsqueeze(1)).sum(-1);  // [B, K, d]
}

torch::Tensor first_layer(const FirstLayerParams& p, double x, double y, const torch::Tensor& motion) {
    if (motion.dim() != 2 || motion.size(1) != p.hidden() || motion.size(0) != p.w_x.size(0))
        throw ShapeError("first_layer: motion feature must be [B, d_hidden]");
    auto xs = torch::full({1}, static_cast<float>(x));
    auto ys = torch::full({1}, static_cast<float>(y));
    return first_activation(p, xs, ys, motion.unsqueeze(1)).reshape({motion.size(0), -1});
}

torch::Tensor render_frames(const VideoINRParams& params, const MotionHead& motion, const torch::Tensor& xs,
                            const torch::Tensor& ys, const torch::Tensor& times) {
    if (motion.batch() != params.batch() || times.size(0) != params.batch())
        throw ShapeError("render_frames: batch sizes differ");
    if (motion.w_t.size(1) != params.first.hidden()) throw ShapeError("render_frames: motion width != d_hidden");
    const auto feature = motion_feature(motion, times);
    const auto& layers = params.body.layers;
    const auto stages = std::max<std::int64_t>(1, params.body.stages);
    const auto n_layers = static_cast<std::int64_t>(layers.size());

    torch::Tensor h;
    for (std::int64_t s = 0; s < stages; ++s) {
        const std::int64_t stride = std::int64_t{1} << (stages - 1 - s);
        auto sx = strided(xs, stride);
        auto sy = strided(ys, stride);
        auto coords = first_activation(params.first, sx, sy, feature);
        if (s == 0)
            h = coords;
        else
            h = upsample_features(h, sy.size(0), sx.size(0)) + coords;
        const auto begin = static_cast<std::size_t>(s * n_layers / stages);
        const auto end = static_cast<std::size_t>((s + 1) * n_layers / stages);
        h = apply_layers(layers, begin, end, h);
    }
    const auto B = h.size(0), K = h.size(1), H = h.size(2), W = h.size(3);
    auto flat = modulated_forward(params.body.head, h.reshape({B, K * H * W, -1}));
    return torch::tanh(flat).reshape({B, K, H, W, 3}).permute({0, 1, 4, 2, 3}).contiguous();
}

torch::Tensor axis_tensor(const std::vector<double>& axis) {
    auto t = torch::empty({static_cast<std::int64_t>(axis.size())}, torch::kFloat32);
    auto* p = t.data_ptr<float>();
    for (std::size_t i = 0; i < axis.size(); ++i) p[i] = static_cast<float>(axis[i]);
    return t;
}

namespace {

void decode_frames_into(const VideoINRParams& params, const MotionHead& motion, const CoordinateGrid& grid,
                        torch::Tensor& out, std::int64_t first, std::int64_t step) {
    torch::NoGradGuard no_grad;
    const auto xs = axis_tensor(grid.xs());
    const auto ys = axis_tensor(grid.ys());
    for (std::int64_t k = first; k < grid.frames(); k += step) {
        auto t = torch::full({1, 1}, static_cast<float>(grid.ts()[k]));
        out[k].copy_(render_frames(params, motion, xs, ys, t)[0][0]);
    }
}

void require_single(const VideoINRParams& params, const MotionHead& motion) {
    if (params.batch() != 1 || motion.batch() != 1) throw ShapeError("decode: expects a single INR (batch 1)");
}

}  // namespace

VideoClip decode(const VideoINRParams& params, const MotionHead& motion, const CoordinateGrid& grid) {
    require_single(params, motion);
    auto out = torch::empty({grid.frames(), 3, grid.height(), grid.width()}, torch::kFloat32);
    decode_frames_into(params, motion, grid, out, 0, 1);
    return VideoClip(out);
}

VideoClip decode_parallel(const VideoINRParams& params, const MotionHead& motion, const CoordinateGrid& grid,
                          int workers) {
    require_single(params, motion);
    workers = std::max(1, std::min<int>(workers, static_cast<int>(grid.frames())));
    if (workers == 1) return decode(params, motion, grid);
    auto out = torch::empty({grid.frames(), 3, grid.height(), grid.width()}, torch::kFloat32);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                decode_frames_into(params, motion, grid, out, w, workers);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return VideoClip(out);
}

}  // namespace vidinr
