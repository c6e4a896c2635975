#include "vidinr/embedder.hpp"

#include <torch/script.h>

#include <cmath>

#include "vidinr/archive.hpp"
#include "vidinr/data.hpp"
#include "vidinr/errors.hpp"
#include "vidinr/rng.hpp"

namespace vidinr {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

constexpr std::int64_t kTemporalBins = 4;
constexpr std::int64_t kEmbedChunk = 64;

void require_clips(const torch::Tensor& clips) {
    if (clips.dim() != 5 || clips.size(2) != 3) throw ShapeError("embedder expects clips [N, T, 3, H, W]");
}

}  // namespace

Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
    auto c = t.detach().to(torch::kFloat64).contiguous();
    if (c.dim() != 2) throw ShapeError("to_eigen expects a 2D tensor");
    Eigen::MatrixXd out(c.size(0), c.size(1));
    const auto* p = c.data_ptr<double>();
    for (std::int64_t i = 0; i < c.size(0); ++i)
        for (std::int64_t j = 0; j < c.size(1); ++j) out(i, j) = p[i * c.size(1) + j];
    return out;
}

torch::Tensor Embedder::features(const torch::Tensor& clips) {
    const auto m = embed(clips);
    auto out = torch::empty({m.rows(), m.cols()}, torch::kFloat64);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out.to(torch::kFloat32);
}

Eigen::MatrixXd Embedder::class_probs(const torch::Tensor&) {
    throw std::logic_error("embedder '" + name() + "' has no class head");
}

RandomProjectionEmbedder::RandomProjectionEmbedder(std::int64_t dim, std::uint64_t seed, std::int64_t pool)
    : dim_(dim), seed_(seed), pool_(pool) {
    if (dim < 1 || pool < 1) throw std::invalid_argument("RandomProjectionEmbedder: dim and pool must be >= 1");
    const auto in = 3 * kTemporalBins * pool_ * pool_;
    Rng rng = Rng::derive(seed_, "random-projection");
    auto w = rng.normal_vector(static_cast<std::size_t>(in * dim_));
    projection_ = torch::from_blob(w.data(), {in, dim_}, torch::kFloat32).clone() / std::sqrt(static_cast<double>(in));
}

torch::Tensor RandomProjectionEmbedder::features(const torch::Tensor& clips) {
    require_clips(clips);
    auto x = clips.permute({0, 2, 1, 3, 4});  // [N, 3, T, H, W]
    auto pooled = F::adaptive_avg_pool3d(x, F::AdaptiveAvgPool3dFuncOptions({kTemporalBins, pool_, pool_}));
    return torch::matmul(pooled.flatten(1), projection_);
}

Eigen::MatrixXd RandomProjectionEmbedder::embed(const torch::Tensor& clips) {
    torch::NoGradGuard no_grad;
    return to_eigen(features(clips));
}

ToyVideoNetImpl::ToyVideoNetImpl(std::int64_t classes, std::int64_t width) : classes_(classes), width_(width) {
    c1_ = register_module("c1", nn::Conv3d(nn::Conv3dOptions(3, width, 3).stride({1, 2, 2}).padding(1)));
    c2_ = register_module("c2", nn::Conv3d(nn::Conv3dOptions(width, 2 * width, 3).stride(2).padding(1)));
    c3_ = register_module("c3", nn::Conv3d(nn::Conv3dOptions(2 * width, 4 * width, 3).stride(2).padding(1)));
    head_ = register_module("head", nn::Linear(4 * width, classes));
}

torch::Tensor ToyVideoNetImpl::features(const torch::Tensor& clips) {
    require_clips(clips);
    auto act = F::LeakyReLUFuncOptions().negative_slope(0.2);
    auto x = clips.permute({0, 2, 1, 3, 4});
    x = F::leaky_relu(c1_->forward(x), act);
    x = F::leaky_relu(c2_->forward(x), act);
    x = F::leaky_relu(c3_->forward(x), act);
    return x.mean({2, 3, 4});
}

torch::Tensor ToyVideoNetImpl::forward(const torch::Tensor& clips) { return head_->forward(features(clips)); }

Eigen::MatrixXd ToyEmbedder::embed(const torch::Tensor& clips) {
    require_clips(clips);
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> parts;
    for (std::int64_t i = 0; i < clips.size(0); i += kEmbedChunk)
        parts.push_back(net_->features(clips.narrow(0, i, std::min(kEmbedChunk, clips.size(0) - i))));
    return to_eigen(torch::cat(parts));
}

torch::Tensor ToyEmbedder::features(const torch::Tensor& clips) { return net_->features(clips); }

Eigen::MatrixXd ToyEmbedder::class_probs(const torch::Tensor& clips) {
    require_clips(clips);
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> parts;
    for (std::int64_t i = 0; i < clips.size(0); i += kEmbedChunk)
        parts.push_back(torch::softmax(net_->forward(clips.narrow(0, i, std::min(kEmbedChunk, clips.size(0) - i))).to(torch::kFloat64), 1));
    return to_eigen(torch::cat(parts));
}

void ToyEmbedder::save(const std::string& path) const {
    TensorArchive a;
    a.records.push_back({"classes", torch::tensor({net_->classes()}, torch::kInt64)});
    a.records.push_back({"width", torch::tensor({net_->width()}, torch::kInt64)});
    for (const auto& p : net_->named_parameters(true)) a.records.push_back({"net/" + p.key(), p.value().detach()});
    write_archive(path, a);
}

ToyEmbedder ToyEmbedder::load(const std::string& path) {
    const auto a = read_archive(path);
    ToyVideoNet net(a.at("classes").item<std::int64_t>(), a.at("width").item<std::int64_t>());
    torch::NoGradGuard no_grad;
    for (auto& p : net->named_parameters(true)) {
        const auto name = "net/" + p.key();
        if (!a.contains(name) || !a.at(name).sizes().equals(p.value().sizes()))
            throw ParseError("embedder archive missing or mis-shaped '" + name + "'", 0);
        p.value().copy_(a.at(name));
        p.value().set_requires_grad(false);
    }
    net->eval();
    return ToyEmbedder(net);
}

ToyEmbedder train_toy_embedder(const ClipDataset& data, std::int64_t steps, std::uint64_t seed,
                               ToyEmbedderReport* report) {
    if (data.labels.size() != data.clips.size() || data.clips.empty())
        throw std::invalid_argument("train_toy_embedder: needs a labeled, non-empty dataset");
    torch::manual_seed(seed);
    std::int64_t classes = 0;
    for (auto l : data.labels) classes = std::max(classes, l + 1);
    ToyVideoNet net(classes);
    torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(1e-3));
    const auto clips = data.stacked();
    const auto labels = torch::tensor(data.labels, torch::kLong);
    Rng rng = Rng::derive(seed, "toy-embedder");
    const std::int64_t batch = std::min<std::int64_t>(16, clips.size(0));
    double last = 0.0;
    for (std::int64_t s = 0; s < steps; ++s) {
        auto idx = torch::empty({batch}, torch::kLong);
        for (std::int64_t b = 0; b < batch; ++b) idx[b] = rng.integer(0, clips.size(0) - 1);
        opt.zero_grad();
        auto loss = F::cross_entropy(net->forward(clips.index_select(0, idx)), labels.index_select(0, idx));
        loss.backward();
        opt.step();
        last = loss.item<double>();
    }
    net->eval();
    for (auto& p : net->parameters()) p.set_requires_grad(false);
    if (report) {
        torch::NoGradGuard no_grad;
        std::int64_t correct = 0;
        for (std::int64_t i = 0; i < clips.size(0); i += kEmbedChunk) {
            const auto n = std::min(kEmbedChunk, clips.size(0) - i);
            auto pred = net->forward(clips.narrow(0, i, n)).argmax(1);
            correct += pred.eq(labels.narrow(0, i, n)).sum().item<std::int64_t>();
        }
        report->final_loss = last;
        report->train_accuracy = static_cast<double>(correct) / static_cast<double>(clips.size(0));
    }
    return ToyEmbedder(net);
}

struct ScriptedEmbedder::Impl {
    torch::jit::script::Module module;
};

ScriptedEmbedder::ScriptedEmbedder(const std::string& path) : impl_(std::make_unique<Impl>()), path_(path) {
    impl_->module = torch::jit::load(path);
    impl_->module.eval();
}

ScriptedEmbedder::~ScriptedEmbedder() = default;

Eigen::MatrixXd ScriptedEmbedder::embed(const torch::Tensor& clips) {
    require_clips(clips);
    torch::NoGradGuard no_grad;
    auto out = impl_->module.forward({clips}).toTensor();
    if (out.dim() != 2 || out.size(0) != clips.size(0)) throw ShapeError("scripted embedder must return [N, d]");
    if (dim_ < 0) dim_ = out.size(1);
    return to_eigen(out);
}

}  // namespace vidinr
