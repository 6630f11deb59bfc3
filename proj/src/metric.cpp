#include "msa/metric.hpp"

#include <algorithm>
#include <cmath>

namespace msa {

DistanceKind distance_from_string(const std::string& s) {
    if (s == "eu" || s == "euclidean") return DistanceKind::Euclidean;
    if (s == "co" || s == "cosine") return DistanceKind::Cosine;
    throw DataError("unknown distance: " + s);
}

LossKind loss_from_string(const std::string& s) {
    if (s == "mul" || s == "multisimilarity") return LossKind::MultiSimilarity;
    if (s == "tri" || s == "triplet") return LossKind::TripletMargin;
    if (s == "con" || s == "contrastive") return LossKind::Contrastive;
    throw DataError("unknown loss: " + s);
}

std::string to_string(DistanceKind k) {
    return k == DistanceKind::Euclidean ? "eu" : "co";
}

std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::MultiSimilarity: return "mul";
        case LossKind::TripletMargin: return "tri";
        case LossKind::Contrastive: return "con";
    }
    return "?";
}

Matrix pairwise_distance(const Matrix& e) {
    const Eigen::Index n = e.rows();
    Vector sq = e.rowwise().squaredNorm();
    Matrix d2 = (-2.0 * e * e.transpose());
    d2.colwise() += sq;
    d2.rowwise() += sq.transpose();
    return d2.cwiseMax(0.0).cwiseSqrt().eval().unaryExpr([](double v) { return v; });
}

Matrix pairwise_similarity(const Matrix& e, DistanceKind kind) {
    if (!e.allFinite()) throw DataError("non-finite embeddings");
    const Eigen::Index n = e.rows();
    if (kind == DistanceKind::Euclidean) {
        Vector sq = e.rowwise().squaredNorm();
        Matrix d2 = (-2.0 * e * e.transpose());
        d2.colwise() += sq;
        d2.rowwise() += sq.transpose();
        d2 = d2.cwiseMax(0.0);
        return Matrix::Ones(n, n) - 0.5 * d2;
    }
    Vector norms = e.rowwise().norm();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (norms[i] < 1e-12) throw DataError("zero-norm row under cosine similarity");
    }
    Matrix s = e * e.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            s(i, j) /= norms[i] * norms[j];
        }
    }
    return s;
}

Matrix similarity_backward(const Matrix& e, DistanceKind kind, const Matrix& s,
                           const Matrix& ds) {
    const Eigen::Index n = e.rows();
    Matrix de = Matrix::Zero(e.rows(), e.cols());
    if (kind == DistanceKind::Euclidean) {
        // S_ij = 1 - |e_i - e_j|^2 / 2 ; dS_ij/de_i = e_j - e_i
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double g = ds(i, j);
                if (g == 0.0) continue;
                de.row(i) += g * (e.row(j) - e.row(i));
                de.row(j) += g * (e.row(i) - e.row(j));
            }
        }
        return de;
    }
    Vector norms = e.rowwise().norm();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector ui = e.row(i).transpose() / norms[i];
        for (Eigen::Index j = 0; j < n; ++j) {
            const double g = ds(i, j);
            if (g == 0.0 || i == j) continue;
            const Vector uj = e.row(j).transpose() / norms[j];
            de.row(i) += (g / norms[i]) * (uj - s(i, j) * ui).transpose();
            de.row(j) += (g / norms[j]) * (ui - s(i, j) * uj).transpose();
        }
        // diagonal: S_ii == 1 identically, zero gradient
    }
    return de;
}

Matrix distance_backward(const Matrix& e, const Matrix& d, const Matrix& dd) {
    const Eigen::Index n = e.rows();
    Matrix de = Matrix::Zero(e.rows(), e.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double g = dd(i, j);
            if (g == 0.0 || i == j || d(i, j) < 1e-12) continue;
            const auto diff = (e.row(i) - e.row(j)) / d(i, j);
            de.row(i) += g * diff;
            de.row(j) -= g * diff;
        }
    }
    return de;
}

std::size_t MinedPairs::pair_count() const {
    std::size_t c = 0;
    for (const auto& v : pos) c += v.size();
    for (const auto& v : neg) c += v.size();
    return c;
}

MinedPairs ms_mine(const Matrix& s, const std::vector<int>& labels,
                   const MsParams& p) {
    const int n = static_cast<int>(s.rows());
    if (static_cast<int>(labels.size()) != n) throw DataError("label count mismatch");
    MinedPairs out;
    out.pos.resize(n);
    out.neg.resize(n);
    for (int a = 0; a < n; ++a) {
        double min_pos = std::numeric_limits<double>::infinity();
        double max_neg = -std::numeric_limits<double>::infinity();
        bool has_pos = false, has_neg = false;
        for (int k = 0; k < n; ++k) {
            if (k == a) continue;
            if (labels[k] == labels[a]) {
                has_pos = true;
                min_pos = std::min(min_pos, s(a, k));
            } else {
                has_neg = true;
                max_neg = std::max(max_neg, s(a, k));
            }
        }
        if (!has_pos || !has_neg) continue;
        for (int k = 0; k < n; ++k) {
            if (k == a) continue;
            if (labels[k] == labels[a]) {
                if (s(a, k) < max_neg + p.epsilon) out.pos[a].push_back(k);
            } else {
                if (s(a, k) > min_pos - p.epsilon) out.neg[a].push_back(k);
            }
        }
    }
    return out;
}

LossOnSimilarity loss_ms(const Matrix& s, const MinedPairs& mined,
                         const MsParams& p) {
    const int n = static_cast<int>(s.rows());
    LossOnSimilarity out;
    out.d_sim = Matrix::Zero(n, n);
    int contributing = 0;
    double total = 0.0;
    // first pass to count anchors, so per-pair gradients carry the right 1/m
    for (int a = 0; a < n; ++a) {
        if (!mined.pos[a].empty() || !mined.neg[a].empty()) ++contributing;
    }
    if (contributing == 0) return out;
    const double inv_m = 1.0 / contributing;
    for (int a = 0; a < n; ++a) {
        const auto& pa = mined.pos[a];
        const auto& na = mined.neg[a];
        if (pa.empty() && na.empty()) continue;
        if (!pa.empty()) {
            double sum = 0.0;
            for (int k : pa) sum += std::exp(-p.alpha * (s(a, k) - p.lambda_base));
            total += inv_m * std::log1p(sum) / p.alpha;
            const double denom = 1.0 + sum;
            for (int k : pa) {
                out.d_sim(a, k) +=
                    -inv_m * std::exp(-p.alpha * (s(a, k) - p.lambda_base)) / denom;
            }
        }
        if (!na.empty()) {
            double sum = 0.0;
            for (int k : na) sum += std::exp(p.beta * (s(a, k) - p.lambda_base));
            total += inv_m * std::log1p(sum) / p.beta;
            const double denom = 1.0 + sum;
            for (int k : na) {
                out.d_sim(a, k) +=
                    inv_m * std::exp(p.beta * (s(a, k) - p.lambda_base)) / denom;
            }
        }
    }
    out.loss = total;
    return out;
}

std::vector<Triplet> mine_triplets(const Matrix& dist,
                                   const std::vector<int>& labels,
                                   double margin) {
    const int n = static_cast<int>(dist.rows());
    std::vector<Triplet> out;
    for (int a = 0; a < n; ++a) {
        for (int p = 0; p < n; ++p) {
            if (p == a || labels[p] != labels[a]) continue;
            for (int q = 0; q < n; ++q) {
                if (labels[q] == labels[a]) continue;
                if (dist(a, p) - dist(a, q) + margin > 0.0) {
                    out.push_back({a, p, q});
                }
            }
        }
    }
    return out;
}

LossOnDistance loss_triplet(const Matrix& dist, const std::vector<Triplet>& triplets,
                            double margin) {
    LossOnDistance out;
    out.d_dist = Matrix::Zero(dist.rows(), dist.cols());
    if (triplets.empty()) return out;
    const double inv = 1.0 / static_cast<double>(triplets.size());
    for (const Triplet& t : triplets) {
        const double term = dist(t.anchor, t.pos) - dist(t.anchor, t.neg) + margin;
        if (term <= 0.0) continue;
        out.loss += inv * term;
        out.d_dist(t.anchor, t.pos) += inv;
        out.d_dist(t.anchor, t.neg) -= inv;
    }
    return out;
}

LossOnDistance loss_contrastive(const Matrix& dist, const std::vector<int>& labels,
                                double pos_margin, double neg_margin) {
    const int n = static_cast<int>(dist.rows());
    LossOnDistance out;
    out.d_dist = Matrix::Zero(n, n);
    const long pairs = static_cast<long>(n) * (n - 1) / 2;
    if (pairs == 0) return out;
    const double inv = 1.0 / static_cast<double>(pairs);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (labels[i] == labels[j]) {
                const double term = dist(i, j) - pos_margin;
                if (term > 0.0) {
                    out.loss += inv * term;
                    out.d_dist(i, j) += inv;
                }
            } else {
                const double term = neg_margin - dist(i, j);
                if (term > 0.0) {
                    out.loss += inv * term;
                    out.d_dist(i, j) -= inv;
                }
            }
        }
    }
    return out;
}

BatchLoss batch_loss(const Matrix& e, const std::vector<int>& labels,
                     const LossConfig& cfg, FrozenSelection* frozen) {
    BatchLoss out;
    if (cfg.loss == LossKind::MultiSimilarity) {
        const Matrix s = pairwise_similarity(e, cfg.distance);
        MinedPairs mined;
        if (frozen && frozen->valid) {
            mined = frozen->ms;
        } else {
            mined = ms_mine(s, labels, cfg.ms);
            if (frozen) {
                frozen->ms = mined;
                frozen->valid = true;
            }
        }
        const LossOnSimilarity l = loss_ms(s, mined, cfg.ms);
        out.loss = l.loss;
        out.d_embeddings = similarity_backward(e, cfg.distance, s, l.d_sim);
        out.mined_pairs = mined.pair_count();
        return out;
    }

    Matrix dist;
    if (cfg.distance == DistanceKind::Euclidean) {
        dist = pairwise_distance(e);
    } else {
        dist = Matrix::Ones(e.rows(), e.rows()) -
               pairwise_similarity(e, DistanceKind::Cosine);
    }

    LossOnDistance l;
    if (cfg.loss == LossKind::TripletMargin) {
        std::vector<Triplet> triplets;
        if (frozen && frozen->valid) {
            triplets = frozen->triplets;
        } else {
            triplets = mine_triplets(dist, labels, cfg.triplet_margin);
            if (frozen) {
                frozen->triplets = triplets;
                frozen->valid = true;
            }
        }
        l = loss_triplet(dist, triplets, cfg.triplet_margin);
        out.mined_pairs = triplets.size();
    } else {
        l = loss_contrastive(dist, labels, cfg.contrastive_pos_margin,
                             cfg.contrastive_neg_margin);
        out.mined_pairs = static_cast<std::size_t>(e.rows()) * (e.rows() - 1) / 2;
    }
    out.loss = l.loss;
    if (cfg.distance == DistanceKind::Euclidean) {
        out.d_embeddings = distance_backward(e, dist, l.d_dist);
    } else {
        const Matrix s = pairwise_similarity(e, DistanceKind::Cosine);
        out.d_embeddings = similarity_backward(e, DistanceKind::Cosine, s, -l.d_dist);
    }
    return out;
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(std::vector<ParamView> params, std::vector<ParamView> grads) {
    if (params.size() != grads.size()) throw DataError("param/grad count mismatch");
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(Vector::Zero(p.size()));
            v_.emplace_back(Vector::Zero(p.size()));
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto& g = grads[i];
        if (p.size() != g.size()) throw DataError("param/grad shape mismatch");
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            const double grad = g.data[k];
            if (!std::isfinite(grad)) throw DataError("non-finite gradient");
            m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * grad;
            v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * grad * grad;
            const double mhat = m_[i][k] / bc1;
            const double vhat = v_[i][k] / bc2;
            p.data[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

} // namespace msa
