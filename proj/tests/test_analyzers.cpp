#include "doctest.h"

#include "msa/analyzers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace msa;

namespace {

// Block-structured feature matrix: `pattern` names a template per block,
// `block_len` rows each, with small seeded noise.
Matrix block_features(const std::vector<int>& pattern, int block_len, int dim,
                      double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    const int n_templates = *std::max_element(pattern.begin(), pattern.end()) + 1;
    Matrix templates(n_templates, dim);
    for (int i = 0; i < n_templates; ++i)
        for (int j = 0; j < dim; ++j) templates(i, j) = 3.0 * g(rng);
    Matrix x(static_cast<int>(pattern.size()) * block_len, dim);
    int r = 0;
    for (int p : pattern) {
        for (int i = 0; i < block_len; ++i, ++r) {
            for (int j = 0; j < dim; ++j) {
                x(r, j) = templates(p, j) + noise * g(rng);
            }
        }
    }
    return x;
}

TimeGrid uniform_grid(int n_intervals, double step) {
    std::vector<double> t(n_intervals + 1);
    for (int i = 0; i <= n_intervals; ++i) t[i] = i * step;
    return TimeGrid(t, GridKind::Beat);
}

std::vector<double> times(int n, double step) {
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = (i + 0.5) * step;
    return t;
}

} // namespace

TEST_CASE("build_ssm matches the closed form with explicit sigma") {
    Matrix x(2, 2);
    x << 0, 0, 1, 1; // distance sqrt(2)
    auto ssm = build_ssm(x, {0.0, 1.0}, 1.0);
    CHECK(ssm.s(0, 0) == doctest::Approx(1.0));
    CHECK(ssm.s(0, 1) == doctest::Approx(std::exp(-1.0)));
    CHECK(ssm.s(1, 0) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("build_ssm equals a brute-force median-sigma computation") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0, 1);
    const int n = 12, d = 4;
    Matrix x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = g(rng);
    auto ssm = build_ssm(x, times(n, 0.5));
    // oracle: median of all off-diagonal distances
    std::vector<double> ds;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) ds.push_back((x.row(i) - x.row(j)).norm());
    std::sort(ds.begin(), ds.end());
    const double med = 0.5 * (ds[ds.size() / 2 - 1] + ds[ds.size() / 2]);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double dd = (x.row(i) - x.row(j)).squaredNorm();
            CHECK(ssm.s(i, j) ==
                  doctest::Approx(std::exp(-dd / (2 * med * med))).epsilon(1e-9));
        }
    }
    CHECK_NOTHROW(ssm.validate());
}

TEST_CASE("build_ssm invariant to rotation of the feature space") {
    Matrix x = block_features({0, 1}, 5, 2, 0.3, 9);
    const double a = 0.7;
    Matrix rot(2, 2);
    rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    Matrix xr = x * rot.transpose();
    auto s1 = build_ssm(x, times(10, 1.0));
    auto s2 = build_ssm(xr, times(10, 1.0));
    CHECK((s1.s - s2.s).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("scluster recovers clean block structures") {
    for (int blocks = 2; blocks <= 5; ++blocks) {
        std::vector<int> pattern(blocks);
        for (int i = 0; i < blocks; ++i) pattern[i] = i;
        const int bl = 12;
        Matrix x = block_features(pattern, bl, 8, 0.05, 100 + blocks);
        TimeGrid grid = uniform_grid(blocks * bl, 1.0);
        SclusterParams p;
        auto est = scluster_analyze(x, grid, p, blocks * bl * 1.0, 1);
        est.validate();
        REQUIRE(est.labels.size() == static_cast<std::size_t>(blocks));
        // one boundary per block edge, within one grid step
        for (int b = 1; b < blocks; ++b) {
            CHECK(std::abs(est.boundaries[b] - b * bl * 1.0) <= 1.0);
        }
        // all block labels distinct
        std::vector<int> sorted = est.labels;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::unique(sorted.begin(), sorted.end()) == sorted.end());
    }
}

TEST_CASE("scluster gives repeated sections the same label") {
    Matrix x = block_features({0, 1, 0}, 14, 8, 0.05, 55);
    TimeGrid grid = uniform_grid(42, 0.5);
    SclusterParams p;
    auto est = scluster_analyze(x, grid, p, 21.0, 1);
    REQUIRE(est.labels.size() == 3);
    CHECK(est.labels[0] == est.labels[2]);
    CHECK(est.labels[0] != est.labels[1]);
    CHECK(est.labels[0] == 0); // labels renumbered by first appearance
}

TEST_CASE("scluster with a fixed cluster count") {
    Matrix x = block_features({0, 1, 2, 1}, 10, 6, 0.05, 77);
    TimeGrid grid = uniform_grid(40, 1.0);
    SclusterParams p;
    p.n_clusters = 3;
    auto est = scluster_analyze(x, grid, p, 40.0, 1);
    std::vector<int> uniq = est.labels;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    CHECK(uniq.size() == 3);
}

TEST_CASE("scluster degenerate tiny input yields a single segment") {
    Matrix x = Matrix::Ones(2, 3);
    TimeGrid grid = uniform_grid(2, 1.0);
    auto est = scluster_analyze(x, grid, SclusterParams{}, 2.0, 1);
    CHECK(est.labels.size() == 1);
    CHECK(est.boundaries.front() == 0.0);
    CHECK(est.boundaries.back() == doctest::Approx(2.0));
}

TEST_CASE("foote novelty peaks at the block boundary and is flat elsewhere") {
    const int n = 40, half = n / 2;
    Matrix s(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            s(i, j) = ((i < half) == (j < half)) ? 1.0 : 0.0;
    Ssm ssm{s, times(n, 1.0)};
    auto nov = foote_novelty(ssm, 8);
    Eigen::Index arg;
    nov.maxCoeff(&arg);
    CHECK(std::abs(static_cast<int>(arg) - half) <= 1);
    CHECK(nov[half] > 10.0 * std::max(nov[5], nov[n - 5]));
}

TEST_CASE("foote novelty of a constant ssm vanishes away from the edges") {
    const int n = 30, m = 6;
    Ssm ssm{Matrix::Ones(n, n), times(n, 1.0)};
    auto nov = foote_novelty(ssm, m);
    // interior: the odd checkerboard sums cancel exactly
    for (int t = m; t < n - m; ++t) CHECK(std::abs(nov[t]) < 1e-9);
}

TEST_CASE("foote_boundaries finds the two-block split within one frame") {
    Matrix x = block_features({0, 1}, 20, 6, 0.05, 31);
    auto ssm = build_ssm(x, times(40, 1.0));
    FooteParams p;
    p.kernel_half_width = 8;
    auto b = foote_boundaries(ssm, p, 40.0);
    REQUIRE(b.size() >= 3);
    CHECK(b.front() == 0.0);
    CHECK(b.back() == doctest::Approx(40.0));
    double best = 1e9;
    for (double t : b) best = std::min(best, std::abs(t - 20.0));
    CHECK(best <= 1.0);
}

TEST_CASE("fmc2d assigns repeated sections the same label") {
    Matrix x = block_features({0, 1, 0, 1}, 16, 6, 0.05, 81);
    std::vector<double> bounds{0, 16, 32, 48, 64};
    auto labels = fmc2d_labels(x, times(64, 1.0), bounds, 1);
    REQUIRE(labels.size() == 4);
    CHECK(labels[0] == labels[2]);
    CHECK(labels[1] == labels[3]);
    CHECK(labels[0] != labels[1]);
}

TEST_CASE("cnmf objective never exceeds the starting objective") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix x(20, 30);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 30; ++j) x(i, j) = u(rng);
    auto r0 = cnmf_factorize(x, 4, 1, 9);
    auto r = cnmf_factorize(x, 4, 200, 9);
    CHECK(r.objective <= r0.objective + 1e-9);
    CHECK(r.objective >= 0.0);
}

TEST_CASE("cnmf with rank n reconstructs almost exactly") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Matrix x(6, 10);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 10; ++j) x(i, j) = u(rng);
    // identity-like init: W = G = I
    Matrix eye = Matrix::Identity(10, 10);
    auto r = cnmf_factorize(x, 10, 50, 1, std::make_pair(eye, eye));
    CHECK((x - x * r.w * r.g.transpose()).norm() / x.norm() < 1e-6);
}

TEST_CASE("cnmf analyzer separates a two-template sequence") {
    Matrix x = block_features({0, 1}, 15, 6, 0.05, 91);
    Matrix shifted = x.array() - x.minCoeff(); // analyzer shifts internally too
    TimeGrid grid = uniform_grid(30, 1.0);
    CnmfParams p;
    p.rank = 2;
    auto est = cnmf_analyze(shifted, grid, p, 30.0, 1);
    est.validate();
    REQUIRE(est.labels.size() >= 2);
    // the midpoint boundary should be within two grid steps
    double best = 1e9;
    for (double t : est.boundaries) best = std::min(best, std::abs(t - 15.0));
    CHECK(best <= 2.0);
}

TEST_CASE("kmeans recovers separated clusters with first-appearance labels") {
    Matrix x(9, 2);
    x << 0, 0, 0.1, 0, 0, 0.1, 5, 5, 5.1, 5, 5, 5.1, -5, 5, -5.1, 5, -5, 5.1;
    auto labels = kmeans(x, 3, 17);
    CHECK(labels == std::vector<int>{0, 0, 0, 1, 1, 1, 2, 2, 2});
}

TEST_CASE("kmeans handles k greater than distinct points") {
    Matrix x(4, 1);
    x << 0, 0, 10, 10;
    auto labels = kmeans(x, 2, 3);
    CHECK(labels == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("mean_silhouette prefers the true clustering") {
    Matrix x = block_features({0, 1}, 8, 3, 0.1, 23);
    std::vector<int> good(16, 0), bad(16, 0);
    for (int i = 8; i < 16; ++i) good[i] = 1;
    for (int i = 0; i < 16; i += 2) bad[i] = 1;
    CHECK(mean_silhouette(x, good) > 0.8);
    CHECK(mean_silhouette(x, good) > mean_silhouette(x, bad));
}

TEST_CASE("median filter removes isolated spikes") {
    std::vector<int> l{0, 0, 0, 1, 0, 0, 2, 2, 2, 2};
    auto f = median_filter_labels(l, 3);
    CHECK(f == std::vector<int>{0, 0, 0, 0, 0, 0, 2, 2, 2, 2});
    // width 1 is the identity
    CHECK(median_filter_labels(l, 1) == l);
}

TEST_CASE("apply_params overrides and rejects unknown names") {
    SclusterParams sc = apply_params(SclusterParams{}, {{"rec_width", 4}});
    CHECK(sc.rec_width == 4);
    CHECK(sc.rec_smooth == 3);
    CHECK_THROWS_AS(apply_params(SclusterParams{}, {{"bogus", 1}}), DataError);

    FooteParams fp = apply_params(FooteParams{}, {{"peak_delta_tenths", 7}});
    CHECK(fp.peak_delta == doctest::Approx(0.7));
    CHECK_THROWS_AS(apply_params(FooteParams{}, {{"rank", 2}}), DataError);

    CnmfParams cp = apply_params(CnmfParams{}, {{"rank", 6}, {"median_width", 5}});
    CHECK(cp.rank == 6);
    CHECK(cp.median_width == 5);
}

TEST_CASE("grid_search finds a planted optimum") {
    std::map<std::string, std::vector<int>> grids{{"a", {1, 2, 3}}, {"b", {10, 20}}};
    auto res = grid_search(grids, [](const ParamPoint& p) {
        return -std::abs(p.at("a") - 2.0) - std::abs(p.at("b") - 20.0) / 100.0;
    });
    CHECK(res.best.at("a") == 2);
    CHECK(res.best.at("b") == 20);
    CHECK(res.table.size() == 6);
}

TEST_CASE("grid_search keeps the lexicographically smallest tie") {
    std::map<std::string, std::vector<int>> grids{{"a", {3, 1, 2}}};
    auto res = grid_search(grids, [](const ParamPoint&) { return 0.5; });
    CHECK(res.best.at("a") == 1); // values iterated ascending, first kept
    CHECK(res.best_score == doctest::Approx(0.5));
}

TEST_CASE("grid_search rejects empty grids") {
    CHECK_THROWS_AS(grid_search({}, [](const ParamPoint&) { return 0.0; }),
                    DataError);
    CHECK_THROWS_AS(grid_search({{"a", {}}}, [](const ParamPoint&) { return 0.0; }),
                    DataError);
}

TEST_CASE("analyze dispatch and algorithm names") {
    CHECK(algorithm_from_string("scluster") == AlgorithmId::Scluster);
    CHECK(algorithm_from_string("foote-fmc2d") == AlgorithmId::FooteFmc2d);
    CHECK(algorithm_from_string("cnmf") == AlgorithmId::Cnmf);
    CHECK(to_string(AlgorithmId::FooteFmc2d) == "foote-fmc2d");
    CHECK_THROWS_AS(algorithm_from_string("nope"), DataError);

    Matrix x = block_features({0, 1}, 10, 5, 0.05, 3);
    TimeGrid grid = uniform_grid(20, 1.0);
    for (auto algo : {AlgorithmId::Scluster, AlgorithmId::FooteFmc2d,
                      AlgorithmId::Cnmf}) {
        auto est = analyze(algo, x.array() - x.minCoeff(), grid, {}, 20.0, 1);
        CHECK_NOTHROW(est.validate());
        CHECK(est.boundaries.front() == 0.0);
        CHECK(est.boundaries.back() == doctest::Approx(20.0));
    }
}

TEST_CASE("scluster output is identical across runs with one seed") {
    Matrix x = block_features({0, 1, 2, 0}, 10, 6, 0.2, 131);
    TimeGrid grid = uniform_grid(40, 0.75);
    auto a = scluster_analyze(x, grid, SclusterParams{}, 30.0, 42);
    auto b = scluster_analyze(x, grid, SclusterParams{}, 30.0, 42);
    CHECK(a.boundaries == b.boundaries);
    CHECK(a.labels == b.labels);
}
