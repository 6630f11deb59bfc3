/// @file metric.hpp
/// @brief Pairwise similarity, pair mining, losses, and the Adam optimizer.

#pragma once

#include "msa/net.hpp"
#include "msa/types.hpp"

namespace msa {

enum class DistanceKind { Euclidean, Cosine };
enum class LossKind { MultiSimilarity, TripletMargin, Contrastive };

DistanceKind distance_from_string(const std::string& s);
LossKind loss_from_string(const std::string& s);
std::string to_string(DistanceKind k);
std::string to_string(LossKind k);

struct MsParams {
    double alpha = 2.0;
    double beta = 50.0;
    double lambda_base = 0.5;
    double epsilon = 0.1;
};

/// Similarity matrix. Euclidean: S_ij = 1 - d_ij^2 / 2 (equals cosine on
/// unit-norm rows). Cosine: normalized dot products.
Matrix pairwise_similarity(const Matrix& e, DistanceKind kind);

/// Euclidean distance matrix d_ij = |e_i - e_j|.
Matrix pairwise_distance(const Matrix& e);

/// Chain rule through pairwise_similarity: dL/dS -> dL/dE.
Matrix similarity_backward(const Matrix& e, DistanceKind kind, const Matrix& s,
                           const Matrix& ds);

/// Chain rule through pairwise_distance: dL/dD -> dL/dE.
Matrix distance_backward(const Matrix& e, const Matrix& d, const Matrix& dd);

/// Per-anchor lists of mined positive / negative partner indices.
struct MinedPairs {
    std::vector<std::vector<int>> pos;
    std::vector<std::vector<int>> neg;

    std::size_t pair_count() const;
};

/// MultiSimilarity pair mining. For an anchor a: keep negative n iff
/// S_an > min_p S_ap - eps; keep positive p iff S_ap < max_n S_an + eps.
/// Anchors lacking either positives or negatives contribute nothing.
MinedPairs ms_mine(const Matrix& s, const std::vector<int>& labels,
                   const MsParams& p);

struct LossOnSimilarity {
    double loss = 0.0;
    Matrix d_sim; // dL/dS
};

struct LossOnDistance {
    double loss = 0.0;
    Matrix d_dist; // dL/dD
};

/// MultiSimilarity loss over the mined pairs, averaged over contributing
/// anchors, with its analytic gradient w.r.t. S.
LossOnSimilarity loss_ms(const Matrix& s, const MinedPairs& mined,
                         const MsParams& p);

struct Triplet {
    int anchor, pos, neg;
};

/// All valid triplets with positive hinge loss at the current distances.
std::vector<Triplet> mine_triplets(const Matrix& dist,
                                   const std::vector<int>& labels,
                                   double margin);

/// Mean over triplets of max(0, d_ap - d_an + margin).
LossOnDistance loss_triplet(const Matrix& dist, const std::vector<Triplet>& triplets,
                            double margin);

/// Unsquared contrastive hinge over all unordered pairs:
/// same-label max(0, d - pos_margin), diff-label max(0, neg_margin - d).
LossOnDistance loss_contrastive(const Matrix& dist, const std::vector<int>& labels,
                                double pos_margin = 0.0, double neg_margin = 1.0);

struct LossConfig {
    LossKind loss = LossKind::MultiSimilarity;
    DistanceKind distance = DistanceKind::Euclidean;
    MsParams ms;
    double triplet_margin = 0.05;
    double contrastive_pos_margin = 0.0;
    double contrastive_neg_margin = 1.0;
};

struct BatchLoss {
    double loss = 0.0;
    Matrix d_embeddings; // dL/dE
    std::size_t mined_pairs = 0;
};

/// Full loss path on a batch of embeddings: similarity/distance -> mine ->
/// loss -> gradient w.r.t. the embeddings. When `frozen` is supplied, the
/// mined selection is reused instead of re-mined (finite-difference checks).
struct FrozenSelection {
    MinedPairs ms;
    std::vector<Triplet> triplets;
    bool valid = false;
};

BatchLoss batch_loss(const Matrix& e, const std::vector<int>& labels,
                     const LossConfig& cfg, FrozenSelection* frozen = nullptr);

/// Adam state for one tensor list; slots follow the ParamView order.
class AdamOptimizer {
public:
    AdamOptimizer(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    /// params and grads must pair up by position and shape.
    void step(std::vector<ParamView> params, std::vector<ParamView> grads);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Vector> m_, v_;
};

} // namespace msa
