/// @file net.hpp
/// @brief Embedding network: pooled window stats -> 100-d embedding, with
/// manual forward/backward for gradient-verified training.

#pragma once

#include "msa/features.hpp"
#include "msa/types.hpp"

#include <cstdint>
#include <random>

namespace msa {

struct NetOptions {
    int in_dim = 1024;
    int hidden_dim = 256;
    int out_dim = 100;
    double leaky_slope = 0.01;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;
    bool batchnorm = true;   // disable for linear-path gradient checks
    bool leaky_relu = true;
    bool l2_normalize = true;
};

/// One parameter tensor exposed as a flat view, for the optimizer, the
/// checkpoint writer and finite-difference checks.
struct ParamView {
    std::string name;
    double* data;
    Eigen::Index rows;
    Eigen::Index cols;
    Eigen::Index size() const { return rows * cols; }
};

struct BatchNormLayer {
    Vector gamma, beta;
    Vector running_mean, running_var;
};

/// Gradients mirroring the network's trainable tensors.
struct NetGradients {
    Matrix w1, w2, w3;
    Vector b1, b2, b3;
    Vector bn1_gamma, bn1_beta, bn2_gamma, bn2_beta;

    std::vector<ParamView> views();
};

/// Cached activations from one forward pass, consumed by backward().
struct ForwardCache {
    Matrix input;           // batch x in_dim
    Matrix z1, a1, n1;      // hidden activations
    Matrix z2, a2, n2;
    Matrix z3;              // pre-normalization output
    Vector norms;           // row norms of z3 (when l2_normalize)
    // batchnorm internals
    Matrix bn1_xhat, bn2_xhat;
    Vector bn1_invstd, bn2_invstd;
    bool train_mode = false;
};

/// backbone: linear(in->hidden) + leakyReLU + batchnorm, then
/// head: linear(hidden->hidden) + leakyReLU + batchnorm + linear(hidden->out)
/// + optional row-wise L2-normalization.
class EmbeddingNet {
public:
    explicit EmbeddingNet(NetOptions opt = {});

    /// He-style uniform init, deterministic for a given seed.
    void init(std::uint64_t seed);

    void set_train(bool train) { train_mode_ = train; }
    bool train_mode() const { return train_mode_; }
    const NetOptions& options() const { return opt_; }
    NetOptions& options_mutable() { return opt_; }

    /// X: batch x in_dim. Train mode with batchnorm requires batch >= 2.
    /// Updates running stats in train mode.
    Matrix forward(const Matrix& x, ForwardCache* cache = nullptr);

    /// dE: gradient of the loss w.r.t. the forward output.
    NetGradients backward(const ForwardCache& cache, const Matrix& d_out) const;

    NetGradients zero_gradients() const;

    /// Trainable tensors, in a fixed order.
    std::vector<ParamView> params();
    /// Trainable tensors plus batchnorm running stats (checkpoint payload).
    std::vector<ParamView> state_tensors();

    Matrix w1, w2, w3;
    Vector b1, b2, b3;
    BatchNormLayer bn1, bn2;

private:
    NetOptions opt_;
    bool train_mode_ = true;
};

/// Embed every grid interval of a song: pooled window -> net (eval mode).
EmbeddingMatrix embed_song(EmbeddingNet& net, const FeatureMatrix& features,
                           const TimeGrid& grid, const MelConfig& cfg,
                           WindowMode mode);

} // namespace msa
