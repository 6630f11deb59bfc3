#include "msa/net.hpp"

#include <cmath>

namespace msa {

namespace {

Matrix leaky(const Matrix& x, double slope) {
    return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

// d/dx of leaky relu evaluated at pre-activation x, times upstream grad g
Matrix leaky_backward(const Matrix& x, const Matrix& g, double slope) {
    Matrix out(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        out(i) = x(i) > 0.0 ? g(i) : slope * g(i);
    }
    return out;
}

} // namespace

std::vector<ParamView> NetGradients::views() {
    return {
        {"w1", w1.data(), w1.rows(), w1.cols()},
        {"b1", b1.data(), b1.size(), 1},
        {"bn1.gamma", bn1_gamma.data(), bn1_gamma.size(), 1},
        {"bn1.beta", bn1_beta.data(), bn1_beta.size(), 1},
        {"w2", w2.data(), w2.rows(), w2.cols()},
        {"b2", b2.data(), b2.size(), 1},
        {"bn2.gamma", bn2_gamma.data(), bn2_gamma.size(), 1},
        {"bn2.beta", bn2_beta.data(), bn2_beta.size(), 1},
        {"w3", w3.data(), w3.rows(), w3.cols()},
        {"b3", b3.data(), b3.size(), 1},
    };
}

EmbeddingNet::EmbeddingNet(NetOptions opt) : opt_(opt) {
    const int in = opt_.in_dim, h = opt_.hidden_dim, out = opt_.out_dim;
    w1 = Matrix::Zero(h, in);
    b1 = Vector::Zero(h);
    w2 = Matrix::Zero(h, h);
    b2 = Vector::Zero(h);
    w3 = Matrix::Zero(out, h);
    b3 = Vector::Zero(out);
    bn1 = {Vector::Ones(h), Vector::Zero(h), Vector::Zero(h), Vector::Ones(h)};
    bn2 = {Vector::Ones(h), Vector::Zero(h), Vector::Zero(h), Vector::Ones(h)};
}

void EmbeddingNet::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto fill = [&rng](Matrix& w) {
        const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(rng);
    };
    fill(w1);
    fill(w2);
    fill(w3);
    b1.setZero();
    b2.setZero();
    b3.setZero();
    bn1.gamma.setOnes();
    bn1.beta.setZero();
    bn1.running_mean.setZero();
    bn1.running_var.setOnes();
    bn2.gamma.setOnes();
    bn2.beta.setZero();
    bn2.running_mean.setZero();
    bn2.running_var.setOnes();
}

namespace {

Matrix batchnorm_forward(const Matrix& x, BatchNormLayer& bn, bool train,
                         double eps, double momentum, Matrix* xhat_out,
                         Vector* invstd_out) {
    const Eigen::Index n = x.rows(), c = x.cols();
    Matrix xhat(n, c);
    Vector invstd(c);
    if (train) {
        if (n < 2) throw DataError("batchnorm in train mode needs batch >= 2");
        Vector mean = x.colwise().mean();
        Vector var(c);
        for (Eigen::Index j = 0; j < c; ++j) {
            var[j] = (x.col(j).array() - mean[j]).square().sum() / static_cast<double>(n);
        }
        for (Eigen::Index j = 0; j < c; ++j) {
            invstd[j] = 1.0 / std::sqrt(var[j] + eps);
            xhat.col(j) = (x.col(j).array() - mean[j]) * invstd[j];
        }
        bn.running_mean = (1.0 - momentum) * bn.running_mean + momentum * mean;
        // unbiased variance for the running estimate
        const double scale = n > 1 ? static_cast<double>(n) / (n - 1) : 1.0;
        bn.running_var = (1.0 - momentum) * bn.running_var + momentum * (var * scale);
    } else {
        for (Eigen::Index j = 0; j < c; ++j) {
            invstd[j] = 1.0 / std::sqrt(bn.running_var[j] + eps);
            xhat.col(j) = (x.col(j).array() - bn.running_mean[j]) * invstd[j];
        }
    }
    Matrix y(n, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        y.col(j) = xhat.col(j) * bn.gamma[j] + Vector::Constant(n, bn.beta[j]);
    }
    if (xhat_out) *xhat_out = xhat;
    if (invstd_out) *invstd_out = invstd;
    return y;
}

// Backward through train-mode batchnorm. Returns dx; accumulates dgamma/dbeta.
Matrix batchnorm_backward(const Matrix& xhat, const Vector& invstd,
                          const BatchNormLayer& bn, const Matrix& dy,
                          bool train, Vector& dgamma, Vector& dbeta) {
    const Eigen::Index n = dy.rows(), c = dy.cols();
    Matrix dx(n, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        dgamma[j] += (dy.col(j).array() * xhat.col(j).array()).sum();
        dbeta[j] += dy.col(j).sum();
        const Vector dxhat = dy.col(j) * bn.gamma[j];
        if (train) {
            const double sum_dxhat = dxhat.sum();
            const double sum_dxhat_xhat = (dxhat.array() * xhat.col(j).array()).sum();
            dx.col(j) = (invstd[j] / static_cast<double>(n)) *
                        (static_cast<double>(n) * dxhat.array() - sum_dxhat -
                         xhat.col(j).array() * sum_dxhat_xhat);
        } else {
            dx.col(j) = dxhat * invstd[j];
        }
    }
    return dx;
}

} // namespace

Matrix EmbeddingNet::forward(const Matrix& x, ForwardCache* cache) {
    if (!x.allFinite()) throw DataError("non-finite network input");
    if (x.cols() != opt_.in_dim) throw DataError("network input dim mismatch");
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.train_mode = train_mode_;
    c.input = x;

    c.z1 = (x * w1.transpose()).rowwise() + b1.transpose();
    c.a1 = opt_.leaky_relu ? leaky(c.z1, opt_.leaky_slope) : c.z1;
    c.n1 = opt_.batchnorm
               ? batchnorm_forward(c.a1, bn1, train_mode_, opt_.bn_eps,
                                   opt_.bn_momentum, &c.bn1_xhat, &c.bn1_invstd)
               : c.a1;

    c.z2 = (c.n1 * w2.transpose()).rowwise() + b2.transpose();
    c.a2 = opt_.leaky_relu ? leaky(c.z2, opt_.leaky_slope) : c.z2;
    c.n2 = opt_.batchnorm
               ? batchnorm_forward(c.a2, bn2, train_mode_, opt_.bn_eps,
                                   opt_.bn_momentum, &c.bn2_xhat, &c.bn2_invstd)
               : c.a2;

    c.z3 = (c.n2 * w3.transpose()).rowwise() + b3.transpose();
    Matrix out = c.z3;
    if (opt_.l2_normalize) {
        c.norms = c.z3.rowwise().norm();
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            if (c.norms[i] < 1e-12) throw DataError("zero-norm embedding row");
            out.row(i) /= c.norms[i];
        }
    }
    if (!out.allFinite()) throw DataError("non-finite network output");
    return out;
}

NetGradients EmbeddingNet::zero_gradients() const {
    NetGradients g;
    g.w1 = Matrix::Zero(w1.rows(), w1.cols());
    g.w2 = Matrix::Zero(w2.rows(), w2.cols());
    g.w3 = Matrix::Zero(w3.rows(), w3.cols());
    g.b1 = Vector::Zero(b1.size());
    g.b2 = Vector::Zero(b2.size());
    g.b3 = Vector::Zero(b3.size());
    g.bn1_gamma = Vector::Zero(bn1.gamma.size());
    g.bn1_beta = Vector::Zero(bn1.beta.size());
    g.bn2_gamma = Vector::Zero(bn2.gamma.size());
    g.bn2_beta = Vector::Zero(bn2.beta.size());
    return g;
}

NetGradients EmbeddingNet::backward(const ForwardCache& c, const Matrix& d_out) const {
    NetGradients g = zero_gradients();
    Matrix d = d_out;

    if (opt_.l2_normalize) {
        // y = z / |z|; dz = (dy - y (y . dy)) / |z|
        Matrix dz(d.rows(), d.cols());
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            const Vector y = c.z3.row(i).transpose() / c.norms[i];
            const double dot = y.dot(d.row(i).transpose());
            dz.row(i) = (d.row(i).transpose() - dot * y).transpose() / c.norms[i];
        }
        d = dz;
    }

    // linear 3
    g.w3 = d.transpose() * c.n2;
    g.b3 = d.colwise().sum().transpose();
    Matrix dn2 = d * w3;

    Matrix da2 = opt_.batchnorm
                     ? batchnorm_backward(c.bn2_xhat, c.bn2_invstd, bn2, dn2,
                                          c.train_mode, g.bn2_gamma, g.bn2_beta)
                     : dn2;
    Matrix dz2 = opt_.leaky_relu ? leaky_backward(c.z2, da2, opt_.leaky_slope) : da2;

    g.w2 = dz2.transpose() * c.n1;
    g.b2 = dz2.colwise().sum().transpose();
    Matrix dn1 = dz2 * w2;

    Matrix da1 = opt_.batchnorm
                     ? batchnorm_backward(c.bn1_xhat, c.bn1_invstd, bn1, dn1,
                                          c.train_mode, g.bn1_gamma, g.bn1_beta)
                     : dn1;
    Matrix dz1 = opt_.leaky_relu ? leaky_backward(c.z1, da1, opt_.leaky_slope) : da1;

    g.w1 = dz1.transpose() * c.input;
    g.b1 = dz1.colwise().sum().transpose();
    return g;
}

std::vector<ParamView> EmbeddingNet::params() {
    return {
        {"w1", w1.data(), w1.rows(), w1.cols()},
        {"b1", b1.data(), b1.size(), 1},
        {"bn1.gamma", bn1.gamma.data(), bn1.gamma.size(), 1},
        {"bn1.beta", bn1.beta.data(), bn1.beta.size(), 1},
        {"w2", w2.data(), w2.rows(), w2.cols()},
        {"b2", b2.data(), b2.size(), 1},
        {"bn2.gamma", bn2.gamma.data(), bn2.gamma.size(), 1},
        {"bn2.beta", bn2.beta.data(), bn2.beta.size(), 1},
        {"w3", w3.data(), w3.rows(), w3.cols()},
        {"b3", b3.data(), b3.size(), 1},
    };
}

std::vector<ParamView> EmbeddingNet::state_tensors() {
    auto v = params();
    v.push_back({"bn1.running_mean", bn1.running_mean.data(), bn1.running_mean.size(), 1});
    v.push_back({"bn1.running_var", bn1.running_var.data(), bn1.running_var.size(), 1});
    v.push_back({"bn2.running_mean", bn2.running_mean.data(), bn2.running_mean.size(), 1});
    v.push_back({"bn2.running_var", bn2.running_var.data(), bn2.running_var.size(), 1});
    return v;
}

EmbeddingMatrix embed_song(EmbeddingNet& net, const FeatureMatrix& features,
                           const TimeGrid& grid, const MelConfig& cfg,
                           WindowMode mode) {
    const bool was_train = net.train_mode();
    net.set_train(false);
    const auto& t = grid.instants();
    const std::size_t n = grid.num_intervals();
    Matrix inputs(static_cast<Eigen::Index>(n), net.options().in_dim);
    for (std::size_t i = 0; i < n; ++i) {
        const double center = 0.5 * (t[i] + t[i + 1]);
        const Matrix win =
            window_from_features(features, center, t[i], t[i + 1], mode, cfg);
        inputs.row(static_cast<Eigen::Index>(i)) = pool_window(win).transpose();
    }
    EmbeddingMatrix out;
    out.data = net.forward(inputs);
    out.frame_times.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.frame_times[i] = 0.5 * (t[i] + t[i + 1]);
    net.set_train(was_train);
    return out;
}

} // namespace msa
