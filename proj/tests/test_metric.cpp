#include "doctest.h"

#include "msa/metric.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace msa;

namespace {

Matrix random_embeddings(int n, int d, std::uint64_t seed, bool unit = false) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    Matrix e(n, d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) e(i, j) = g(rng);
        if (unit) e.row(i) /= e.row(i).norm();
    }
    return e;
}

std::vector<int> random_labels(int n, int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> lab(0, k - 1);
    std::vector<int> out(n);
    for (int& l : out) l = lab(rng);
    return out;
}

// finite-difference gradient of batch_loss w.r.t. the embeddings
Matrix fd_embedding_grad(const Matrix& e, const std::vector<int>& labels,
                         const LossConfig& cfg, FrozenSelection& frozen,
                         double h = 1e-6) {
    Matrix g(e.rows(), e.cols());
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
        for (Eigen::Index j = 0; j < e.cols(); ++j) {
            Matrix ep = e, em = e;
            ep(i, j) += h;
            em(i, j) -= h;
            const double lp = batch_loss(ep, labels, cfg, &frozen).loss;
            const double lm = batch_loss(em, labels, cfg, &frozen).loss;
            g(i, j) = (lp - lm) / (2 * h);
        }
    }
    return g;
}

} // namespace

TEST_CASE("euclidean similarity closed form") {
    Matrix e(2, 2);
    e << 1, 0, 0, 1;
    auto s = pairwise_similarity(e, DistanceKind::Euclidean);
    CHECK(s(0, 0) == doctest::Approx(1.0));
    CHECK(s(1, 1) == doctest::Approx(1.0));
    CHECK(s(0, 1) == doctest::Approx(0.0)); // d^2 = 2 -> 1 - 1 = 0
    CHECK(s(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("cosine similarity closed form") {
    Matrix e(3, 2);
    e << 2, 0, 0, 5, -3, 0;
    auto s = pairwise_similarity(e, DistanceKind::Cosine);
    CHECK(s(0, 1) == doctest::Approx(0.0));
    CHECK(s(0, 2) == doctest::Approx(-1.0));
    CHECK(s(0, 0) == doctest::Approx(1.0));
    Matrix z = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(pairwise_similarity(z, DistanceKind::Cosine), DataError);
}

TEST_CASE("euclidean similarity equals cosine on unit rows") {
    auto e = random_embeddings(12, 6, 101, /*unit=*/true);
    auto se = pairwise_similarity(e, DistanceKind::Euclidean);
    auto sc = pairwise_similarity(e, DistanceKind::Cosine);
    CHECK((se - sc).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pairwise distance closed form and symmetry") {
    Matrix e(3, 2);
    e << 0, 0, 3, 4, 3, 0;
    auto d = pairwise_distance(e);
    CHECK(d(0, 1) == doctest::Approx(5.0));
    CHECK(d(0, 2) == doctest::Approx(3.0));
    CHECK(d(1, 2) == doctest::Approx(4.0));
    CHECK((d - d.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(d.diagonal().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("similarity backward matches finite differences") {
    for (auto kind : {DistanceKind::Euclidean, DistanceKind::Cosine}) {
        auto e = random_embeddings(7, 4, 7 + int(kind));
        std::mt19937_64 rng(55);
        std::normal_distribution<double> g(0, 1);
        Matrix ds(7, 7);
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j) ds(i, j) = (i == j) ? 0.0 : g(rng);
        auto s = pairwise_similarity(e, kind);
        auto de = similarity_backward(e, kind, s, ds);
        const double h = 1e-6;
        for (int i = 0; i < 7; ++i) {
            for (int j = 0; j < 4; ++j) {
                Matrix ep = e, em = e;
                ep(i, j) += h;
                em(i, j) -= h;
                const double fp = (pairwise_similarity(ep, kind).array() * ds.array()).sum();
                const double fm = (pairwise_similarity(em, kind).array() * ds.array()).sum();
                CHECK(de(i, j) == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-4));
            }
        }
    }
}

TEST_CASE("distance backward matches finite differences") {
    auto e = random_embeddings(6, 3, 31);
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g(0, 1);
    Matrix dd(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) dd(i, j) = (i == j) ? 0.0 : g(rng);
    auto d = pairwise_distance(e);
    auto de = distance_backward(e, d, dd);
    const double h = 1e-6;
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 3; ++j) {
            Matrix ep = e, em = e;
            ep(i, j) += h;
            em(i, j) -= h;
            const double fp = (pairwise_distance(ep).array() * dd.array()).sum();
            const double fm = (pairwise_distance(em).array() * dd.array()).sum();
            CHECK(de(i, j) == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-4));
        }
    }
}

TEST_CASE("ms_mine keeps exactly the pairs satisfying the epsilon conditions") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0, 1);
    MsParams p;
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> size(3, 16);
        const int n = size(rng);
        auto e = random_embeddings(n, 5, 1000 + trial);
        auto labels = random_labels(n, 3, 2000 + trial);
        auto s = pairwise_similarity(e, DistanceKind::Euclidean);
        auto mined = ms_mine(s, labels, p);
        for (int a = 0; a < n; ++a) {
            double min_pos = 1e300, max_neg = -1e300;
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
            for (int k = 0; k < n; ++k) {
                if (k == a) continue;
                const bool in_pos = std::count(mined.pos[a].begin(),
                                               mined.pos[a].end(), k) > 0;
                const bool in_neg = std::count(mined.neg[a].begin(),
                                               mined.neg[a].end(), k) > 0;
                if (!has_pos || !has_neg) {
                    CHECK_FALSE(in_pos);
                    CHECK_FALSE(in_neg);
                } else if (labels[k] == labels[a]) {
                    CHECK(in_pos == (s(a, k) < max_neg + p.epsilon));
                    CHECK_FALSE(in_neg);
                } else {
                    CHECK(in_neg == (s(a, k) > min_pos - p.epsilon));
                    CHECK_FALSE(in_pos);
                }
            }
        }
    }
}

TEST_CASE("loss_ms single mined positive value") {
    // one anchor with one mined positive at S = 1.0: (1/2) ln(1 + e^-1)
    Matrix s(2, 2);
    s << 1, 1, 1, 1;
    MinedPairs mined;
    mined.pos = {{1}, {}};
    mined.neg = {{}, {}};
    MsParams p;
    auto l = loss_ms(s, mined, p);
    CHECK(l.loss == doctest::Approx(0.5 * std::log1p(std::exp(-1.0))).epsilon(1e-9));
    CHECK(l.loss == doctest::Approx(0.156631).epsilon(1e-5));
}

TEST_CASE("loss_ms averages over contributing anchors only") {
    Matrix s = Matrix::Constant(3, 3, 1.0);
    MinedPairs one, two;
    one.pos = {{1}, {}, {}};
    one.neg = {{}, {}, {}};
    two.pos = {{1}, {0}, {}};
    two.neg = {{}, {}, {}};
    MsParams p;
    // the same per-anchor term, so the mean is unchanged
    CHECK(loss_ms(s, one, p).loss == doctest::Approx(loss_ms(s, two, p).loss));
}

TEST_CASE("loss_ms gradient matches finite differences") {
    auto e = random_embeddings(8, 4, 5);
    auto labels = random_labels(8, 2, 6);
    MsParams p;
    auto s = pairwise_similarity(e, DistanceKind::Euclidean);
    auto mined = ms_mine(s, labels, p);
    auto l = loss_ms(s, mined, p);
    const double h = 1e-6;
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
            Matrix sp = s, sm = s;
            sp(i, j) += h;
            sm(i, j) -= h;
            const double fd =
                (loss_ms(sp, mined, p).loss - loss_ms(sm, mined, p).loss) / (2 * h);
            CHECK(l.d_sim(i, j) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("mine_triplets keeps exactly the positive-loss triplets") {
    auto e = random_embeddings(9, 3, 42);
    auto labels = random_labels(9, 3, 43);
    const double margin = 0.05;
    auto d = pairwise_distance(e);
    auto triplets = mine_triplets(d, labels, margin);
    std::size_t expect = 0;
    for (int a = 0; a < 9; ++a)
        for (int p = 0; p < 9; ++p)
            for (int q = 0; q < 9; ++q) {
                if (p == a || labels[p] != labels[a] || labels[q] == labels[a]) continue;
                if (d(a, p) - d(a, q) + margin > 0) ++expect;
            }
    CHECK(triplets.size() == expect);
    for (const auto& t : triplets) {
        CHECK(t.pos != t.anchor);
        CHECK(labels[t.pos] == labels[t.anchor]);
        CHECK(labels[t.neg] != labels[t.anchor]);
        CHECK(d(t.anchor, t.pos) - d(t.anchor, t.neg) + margin > 0);
    }
}

TEST_CASE("loss_triplet hand example") {
    // d_ap = 0.3, d_an = 0.2, margin 0.05 -> single triplet, loss 0.15
    Matrix d = Matrix::Zero(3, 3);
    d(0, 1) = d(1, 0) = 0.3;
    d(0, 2) = d(2, 0) = 0.2;
    d(1, 2) = d(2, 1) = 0.4;
    std::vector<Triplet> t{{0, 1, 2}};
    auto l = loss_triplet(d, t, 0.05);
    CHECK(l.loss == doctest::Approx(0.15));
    CHECK(l.d_dist(0, 1) == doctest::Approx(1.0));
    CHECK(l.d_dist(0, 2) == doctest::Approx(-1.0));
}

TEST_CASE("loss_contrastive hand example") {
    // pairs: (0,1) same, d=0.4 -> 0.4; (0,2) diff, d=0.3 -> 0.7; (1,2) diff,
    // d=1.2 -> 0. Mean over 3 pairs = 1.1/3.
    Matrix d = Matrix::Zero(3, 3);
    d(0, 1) = d(1, 0) = 0.4;
    d(0, 2) = d(2, 0) = 0.3;
    d(1, 2) = d(2, 1) = 1.2;
    auto l = loss_contrastive(d, {0, 0, 1});
    CHECK(l.loss == doctest::Approx(1.1 / 3.0));
    CHECK(l.d_dist(0, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(l.d_dist(0, 2) == doctest::Approx(-1.0 / 3.0));
    CHECK(l.d_dist(1, 2) == doctest::Approx(0.0));
}

TEST_CASE("batch_loss gradient matches finite differences for every loss") {
    int seed = 0;
    for (auto loss : {LossKind::MultiSimilarity, LossKind::TripletMargin,
                      LossKind::Contrastive}) {
        for (auto dist : {DistanceKind::Euclidean, DistanceKind::Cosine}) {
            LossConfig cfg;
            cfg.loss = loss;
            cfg.distance = dist;
            auto e = random_embeddings(8, 5, 500 + seed);
            auto labels = random_labels(8, 2, 600 + seed);
            ++seed;
            FrozenSelection frozen;
            auto got = batch_loss(e, labels, cfg, &frozen);
            REQUIRE(frozen.valid == (loss != LossKind::Contrastive));
            auto fd = fd_embedding_grad(e, labels, cfg, frozen);
            const double denom = std::max(1.0, fd.cwiseAbs().maxCoeff());
            CHECK((got.d_embeddings - fd).cwiseAbs().maxCoeff() / denom < 1e-4);
            CHECK(got.loss >= 0.0);
        }
    }
}

TEST_CASE("batch_loss invariant to batch permutation") {
    LossConfig cfg;
    auto e = random_embeddings(10, 4, 91);
    auto labels = random_labels(10, 3, 92);
    const double base = batch_loss(e, labels, cfg).loss;

    std::vector<int> perm(10);
    for (int i = 0; i < 10; ++i) perm[i] = i;
    std::mt19937_64 rng(93);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix ep(10, 4);
    std::vector<int> lp(10);
    for (int i = 0; i < 10; ++i) {
        ep.row(i) = e.row(perm[i]);
        lp[i] = labels[perm[i]];
    }
    CHECK(batch_loss(ep, lp, cfg).loss == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("adam first step moves each weight by about lr") {
    Vector p(3), g(3);
    p << 1.0, -2.0, 0.5;
    g << 0.3, -0.7, 2.0;
    Vector orig = p;
    AdamOptimizer opt(0.01);
    std::vector<ParamView> pv{{"p", p.data(), 3, 1}};
    std::vector<ParamView> gv{{"g", g.data(), 3, 1}};
    opt.step(pv, gv);
    // bias-corrected first step is lr * g / (|g| + eps) ~= lr * sign(g)
    for (int i = 0; i < 3; ++i) {
        CHECK(p[i] == doctest::Approx(orig[i] - 0.01 * (g[i] > 0 ? 1 : -1)).epsilon(1e-5));
    }
}

TEST_CASE("adam converges on a quadratic") {
    Vector p(2);
    p << 5.0, -3.0;
    AdamOptimizer opt(0.1);
    for (int it = 0; it < 500; ++it) {
        Vector g = 2.0 * p; // d/dp |p|^2
        std::vector<ParamView> pv{{"p", p.data(), 2, 1}};
        std::vector<ParamView> gv{{"g", g.data(), 2, 1}};
        opt.step(pv, gv);
    }
    CHECK(p.norm() < 1e-3);
}

TEST_CASE("adam rejects non-finite gradients and shape mismatches") {
    Vector p(2), g(2);
    p.setZero();
    g << 1.0, std::numeric_limits<double>::quiet_NaN();
    AdamOptimizer opt;
    std::vector<ParamView> pv{{"p", p.data(), 2, 1}};
    std::vector<ParamView> gv{{"g", g.data(), 2, 1}};
    CHECK_THROWS_AS(opt.step(pv, gv), DataError);
}

TEST_CASE("loss and distance string round trips") {
    CHECK(loss_from_string("mul") == LossKind::MultiSimilarity);
    CHECK(loss_from_string("tri") == LossKind::TripletMargin);
    CHECK(loss_from_string("con") == LossKind::Contrastive);
    CHECK(distance_from_string("eu") == DistanceKind::Euclidean);
    CHECK(distance_from_string("co") == DistanceKind::Cosine);
    CHECK(to_string(LossKind::MultiSimilarity) == "mul");
    CHECK(to_string(DistanceKind::Cosine) == "co");
    CHECK_THROWS_AS(loss_from_string("bogus"), DataError);
    CHECK_THROWS_AS(distance_from_string("bogus"), DataError);
}
