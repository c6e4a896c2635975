#pragma once

#include <Eigen/Dense>
#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <string>

namespace vidinr {

struct ClipDataset;

/// Maps videos [N, T, 3, H, W] to feature vectors (rows of the result).
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string name() const = 0;
    virtual std::string provenance() const = 0;  // external-weights | toy-trained | random-projection
    virtual std::int64_t dim() const = 0;
    virtual Eigen::MatrixXd embed(const torch::Tensor& clips) = 0;
    /// Features as a float tensor [N, d]; differentiable with respect to the
    /// clips where the embedder allows it (the default detaches).
    virtual torch::Tensor features(const torch::Tensor& clips);
    virtual bool has_classes() const { return false; }
    /// Row-stochastic class posteriors; only when has_classes().
    virtual Eigen::MatrixXd class_probs(const torch::Tensor& clips);
};

/// Fixed seeded linear projection of a spatio-temporally pooled clip.
class RandomProjectionEmbedder final : public Embedder {
public:
    RandomProjectionEmbedder(std::int64_t dim, std::uint64_t seed, std::int64_t pool = 4);
    std::string name() const override { return "random-projection"; }
    std::string provenance() const override { return "random-projection"; }
    std::int64_t dim() const override { return dim_; }
    Eigen::MatrixXd embed(const torch::Tensor& clips) override;
    torch::Tensor features(const torch::Tensor& clips) override;

private:
    std::int64_t dim_;
    std::uint64_t seed_;
    std::int64_t pool_;
    torch::Tensor projection_;
};

/// Small 3D-convolutional video classifier; its penultimate activations
/// serve as features.
class ToyVideoNetImpl : public torch::nn::Module {
public:
    ToyVideoNetImpl(std::int64_t classes, std::int64_t width = 16);
    torch::Tensor features(const torch::Tensor& clips);  // [N, T, 3, H, W] -> [N, feat]
    torch::Tensor forward(const torch::Tensor& clips);   // logits
    std::int64_t feature_dim() const { return 4 * width_; }
    std::int64_t classes() const { return classes_; }
    std::int64_t width() const { return width_; }

private:
    std::int64_t classes_, width_;
    torch::nn::Conv3d c1_{nullptr}, c2_{nullptr}, c3_{nullptr};
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ToyVideoNet);

class ToyEmbedder final : public Embedder {
public:
    explicit ToyEmbedder(ToyVideoNet net) : net_(std::move(net)) {}
    std::string name() const override { return "toy-video-classifier"; }
    std::string provenance() const override { return "toy-trained"; }
    std::int64_t dim() const override { return net_->feature_dim(); }
    Eigen::MatrixXd embed(const torch::Tensor& clips) override;
    torch::Tensor features(const torch::Tensor& clips) override;
    bool has_classes() const override { return true; }
    Eigen::MatrixXd class_probs(const torch::Tensor& clips) override;
    ToyVideoNet& net() { return net_; }

    void save(const std::string& path) const;
    static ToyEmbedder load(const std::string& path);

private:
    ToyVideoNet net_;
};

struct ToyEmbedderReport {
    double final_loss = 0.0;
    double train_accuracy = 0.0;
};

/// Trains the toy classifier on a labeled dataset with cross-entropy.
ToyEmbedder train_toy_embedder(const ClipDataset& data, std::int64_t steps, std::uint64_t seed,
                               ToyEmbedderReport* report = nullptr);

/// TorchScript module mapping [N, T, 3, H, W] clips to [N, d] features
/// (e.g. an exported I3D); optional plug-in, never required by tests.
class ScriptedEmbedder final : public Embedder {
public:
    explicit ScriptedEmbedder(const std::string& path);
    ~ScriptedEmbedder() override;
    std::string name() const override { return path_; }
    std::string provenance() const override { return "external-weights"; }
    std::int64_t dim() const override { return dim_; }
    Eigen::MatrixXd embed(const torch::Tensor& clips) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string path_;
    std::int64_t dim_ = -1;
};

Eigen::MatrixXd to_eigen(const torch::Tensor& t);

}  // namespace vidinr
