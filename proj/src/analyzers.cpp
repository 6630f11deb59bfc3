#include "msa/analyzers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>

namespace msa {

namespace {

int odd_width(int w) { return 2 * (std::max(1, w) / 2) + 1; }

Matrix pairwise_dist(const Matrix& rows) {
    const Eigen::Index n = rows.rows();
    Vector sq = rows.rowwise().squaredNorm();
    Matrix d2 = -2.0 * rows * rows.transpose();
    d2.colwise() += sq;
    d2.rowwise() += sq.transpose();
    return d2.cwiseMax(0.0).cwiseSqrt();
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
}

// sliding median over a double sequence, window clamped at the edges
std::vector<double> median_filter(const std::vector<double>& x, int width) {
    const int n = static_cast<int>(x.size());
    const int w2 = odd_width(width) / 2;
    std::vector<double> out(n);
    std::vector<double> buf;
    for (int i = 0; i < n; ++i) {
        buf.clear();
        for (int j = std::max(0, i - w2); j <= std::min(n - 1, i + w2); ++j) {
            buf.push_back(x[j]);
        }
        out[i] = median_of(buf);
    }
    return out;
}

std::vector<int> relabel_by_first_appearance(const std::vector<int>& labels) {
    std::map<int, int> remap;
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) {
        auto [it, _] = remap.emplace(l, static_cast<int>(remap.size()));
        out.push_back(it->second);
    }
    return out;
}

// frame labels -> estimate with boundaries at label changes
StructureEstimate labels_to_estimate(const std::vector<int>& labels,
                                     const TimeGrid& grid, double song_end) {
    StructureEstimate est;
    est.boundaries.push_back(0.0);
    std::vector<int> seg_labels;
    if (!labels.empty()) {
        seg_labels.push_back(labels[0]);
        const auto& t = grid.instants();
        for (std::size_t i = 1; i < labels.size(); ++i) {
            if (labels[i] != labels[i - 1]) {
                const double bt = (i < t.size()) ? t[i] : song_end;
                if (bt > est.boundaries.back() + 1e-9 && bt < song_end - 1e-9) {
                    est.boundaries.push_back(bt);
                    seg_labels.push_back(labels[i]);
                }
            }
        }
    } else {
        seg_labels.push_back(0);
    }
    est.boundaries.push_back(song_end);
    est.labels = relabel_by_first_appearance(seg_labels);
    est.validate();
    return est;
}

} // namespace

void Ssm::validate() const {
    if (s.rows() != s.cols()) throw DataError("SSM not square");
    if (static_cast<std::size_t>(s.rows()) != frame_times.size()) {
        throw DataError("SSM frame times mismatch");
    }
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        if (std::abs(s(i, i) - 1.0) > 1e-9) throw DataError("SSM diagonal not 1");
        for (Eigen::Index j = 0; j < i; ++j) {
            if (std::abs(s(i, j) - s(j, i)) > 1e-9) throw DataError("SSM not symmetric");
            if (s(i, j) < -1e-12 || s(i, j) > 1.0 + 1e-12) {
                throw DataError("SSM entry outside [0,1]");
            }
        }
    }
}

Ssm build_ssm(const Matrix& rows, const std::vector<double>& frame_times,
              double sigma) {
    const Eigen::Index n = rows.rows();
    if (n < 2) throw DataError("SSM needs at least 2 rows");
    if (static_cast<std::size_t>(n) != frame_times.size()) {
        throw DataError("frame time count mismatch");
    }
    Matrix d = pairwise_dist(rows);
    if (sigma <= 0.0) {
        std::vector<double> off;
        off.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) off.push_back(d(i, j));
        }
        sigma = median_of(off);
        if (sigma <= 1e-12) sigma = 1.0; // all rows identical
    }
    Ssm out;
    out.s = (-d.array().square() / (2.0 * sigma * sigma)).exp();
    for (Eigen::Index i = 0; i < n; ++i) out.s(i, i) = 1.0;
    out.frame_times = frame_times;
    return out;
}

std::vector<int> median_filter_labels(const std::vector<int>& labels, int width) {
    const int n = static_cast<int>(labels.size());
    const int w2 = odd_width(width) / 2;
    std::vector<int> out(n);
    std::vector<int> buf;
    for (int i = 0; i < n; ++i) {
        buf.clear();
        for (int j = std::max(0, i - w2); j <= std::min(n - 1, i + w2); ++j) {
            buf.push_back(labels[j]);
        }
        std::sort(buf.begin(), buf.end());
        out[i] = buf[buf.size() / 2];
    }
    return out;
}

std::vector<int> kmeans(const Matrix& points, int k, std::uint64_t seed,
                        int iters, int restarts) {
    const Eigen::Index n = points.rows();
    if (k < 1) throw DataError("kmeans needs k >= 1");
    if (k == 1 || n <= 1) return std::vector<int>(n, 0);
    k = std::min<int>(k, static_cast<int>(n));

    std::mt19937_64 rng(seed);
    std::vector<int> best_labels(n, 0);
    double best_inertia = std::numeric_limits<double>::infinity();

    for (int r = 0; r < restarts; ++r) {
        // k-means++ seeding
        Matrix centers(k, points.cols());
        std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
        centers.row(0) = points.row(first(rng));
        Vector d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
        for (int c = 1; c < k; ++c) {
            const double total = d2.sum();
            Eigen::Index pick = 0;
            if (total > 1e-300) {
                std::uniform_real_distribution<double> u(0.0, total);
                double thr = u(rng), acc = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc >= thr) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = first(rng);
            }
            centers.row(c) = points.row(pick);
            d2 = d2.cwiseMin(
                (points.rowwise() - centers.row(c)).rowwise().squaredNorm());
        }

        std::vector<int> labels(n, 0);
        for (int it = 0; it < iters; ++it) {
            bool changed = false;
            for (Eigen::Index i = 0; i < n; ++i) {
                int best = 0;
                double bd = (points.row(i) - centers.row(0)).squaredNorm();
                for (int c = 1; c < k; ++c) {
                    const double dd = (points.row(i) - centers.row(c)).squaredNorm();
                    if (dd < bd) {
                        bd = dd;
                        best = c;
                    }
                }
                if (labels[i] != best) {
                    labels[i] = best;
                    changed = true;
                }
            }
            // recompute centers; an empty cluster grabs the farthest point
            for (int c = 0; c < k; ++c) {
                Vector acc = Vector::Zero(points.cols());
                int count = 0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (labels[i] == c) {
                        acc += points.row(i).transpose();
                        ++count;
                    }
                }
                if (count > 0) {
                    centers.row(c) = (acc / count).transpose();
                } else {
                    Eigen::Index far = 0;
                    double fd = -1.0;
                    for (Eigen::Index i = 0; i < n; ++i) {
                        const double dd =
                            (points.row(i) - centers.row(labels[i])).squaredNorm();
                        if (dd > fd) {
                            fd = dd;
                            far = i;
                        }
                    }
                    centers.row(c) = points.row(far);
                    labels[far] = c;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            inertia += (points.row(i) - centers.row(labels[i])).squaredNorm();
        }
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_labels = labels;
        }
    }
    return relabel_by_first_appearance(best_labels);
}

double mean_silhouette(const Matrix& points, const std::vector<int>& labels) {
    const Eigen::Index n = points.rows();
    const int k = labels.empty() ? 0 : 1 + *std::max_element(labels.begin(), labels.end());
    if (n < 2 || k < 2) return 0.0;
    Matrix d = pairwise_dist(points);
    std::vector<int> counts(k, 0);
    for (int l : labels) counts[l]++;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[labels[i]] <= 1) continue; // singleton scores 0
        std::vector<double> mean_to(k, 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            mean_to[labels[j]] += d(i, j);
        }
        double a = mean_to[labels[i]] / (counts[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == labels[i] || counts[c] == 0) continue;
            b = std::min(b, mean_to[c] / counts[c]);
        }
        const double denom = std::max(a, b);
        total += denom > 1e-300 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

StructureEstimate scluster_analyze(const Matrix& features, const TimeGrid& grid,
                                   const SclusterParams& p, double song_end,
                                   std::uint64_t seed) {
    const Eigen::Index n = features.rows();
    if (n < 4) {
        StructureEstimate est;
        est.boundaries = {0.0, song_end};
        est.labels = {0};
        return est;
    }
    Matrix d = pairwise_dist(features);

    // k-NN recurrence, mutual-neighbor symmetrized
    const int k = 1 + static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    Matrix r = Matrix::Zero(n, n);
    std::vector<Eigen::Index> order(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            if (d(i, a) != d(i, b)) return d(i, a) < d(i, b);
            return a < b;
        });
        int taken = 0;
        for (Eigen::Index j : order) {
            if (j == i) continue;
            r(i, j) = 1.0;
            if (++taken >= std::min<int>(k, static_cast<int>(n) - 1)) break;
        }
    }
    r = r.cwiseProduct(r.transpose().eval());

    // horizontal median smoothing, then re-symmetrize
    {
        const int w = odd_width(p.rec_smooth);
        Matrix sm(n, n);
        std::vector<double> row(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) row[j] = r(i, j);
            auto f = median_filter(row, w);
            for (Eigen::Index j = 0; j < n; ++j) sm(i, j) = f[j];
        }
        r = 0.5 * (sm + sm.transpose().eval());
    }

    // widen along diagonals
    if (p.rec_width > 1) {
        const int rw = p.rec_width;
        Matrix wide = r;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                double m = r(i, j);
                for (int dd = -rw; dd <= rw; ++dd) {
                    const Eigen::Index a = i + dd, b = j + dd;
                    if (a < 0 || b < 0 || a >= n || b >= n) continue;
                    m = std::max(m, r(a, b));
                }
                wide(i, j) = m;
            }
        }
        r = wide;
    }

    // temporal path graph with Gaussian weights on adjacent-frame distances
    Matrix path = Matrix::Zero(n, n);
    {
        std::vector<double> adj(n - 1);
        for (Eigen::Index i = 0; i + 1 < n; ++i) adj[i] = d(i, i + 1);
        double sigma = median_of(adj);
        if (sigma <= 1e-12) sigma = 1.0;
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            const double w = std::exp(-adj[i] * adj[i] / (2.0 * sigma * sigma));
            path(i, i + 1) = path(i + 1, i) = w;
        }
    }

    // combine so both graphs contribute equal mean degree
    const double sum_r = r.sum(), sum_p = path.sum();
    double mu = (sum_r + sum_p > 1e-300) ? sum_p / (sum_r + sum_p) : 0.5;
    Matrix a = mu * r + (1.0 - mu) * path;

    // symmetric normalized Laplacian
    Vector deg = a.rowwise().sum();
    Vector dinv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dinv[i] = deg[i] > 1e-300 ? 1.0 / std::sqrt(deg[i]) : 0.0;
    }
    Matrix lap = Matrix::Identity(n, n) - dinv.asDiagonal() * a * dinv.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> es(lap);
    const Vector& evals = es.eigenvalues();
    const Matrix& evecs = es.eigenvectors(); // ascending eigenvalues

    int big_k = p.n_clusters;
    if (big_k < 1) {
        // largest eigengap among eigenvalues 2..12
        const int hi = std::min<int>(12, static_cast<int>(n) - 1);
        big_k = 2;
        double best_gap = -1.0;
        for (int kk = 2; kk <= hi; ++kk) {
            const double gap = evals[kk] - evals[kk - 1];
            if (gap > best_gap + 1e-12) {
                best_gap = gap;
                big_k = kk;
            }
        }
    }
    big_k = std::min<int>(big_k, static_cast<int>(n));

    Matrix rep = evecs.leftCols(big_k);
    {
        const int w = odd_width(p.evec_smooth);
        std::vector<double> col(n);
        for (int c = 0; c < big_k; ++c) {
            for (Eigen::Index i = 0; i < n; ++i) col[i] = rep(i, c);
            auto f = median_filter(col, w);
            for (Eigen::Index i = 0; i < n; ++i) rep(i, c) = f[i];
        }
    }

    std::vector<int> labels = kmeans(rep, big_k, seed);
    labels = median_filter_labels(labels, 5);
    return labels_to_estimate(labels, grid, song_end);
}

Vector foote_novelty(const Ssm& ssm, int m) {
    const Eigen::Index n = ssm.s.rows();
    Vector nov = Vector::Zero(n);
    if (m < 2) throw DataError("kernel half width must be >= 2");
    const double sig = m / 2.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        double acc = 0.0;
        for (int i = -m; i <= m; ++i) {
            const Eigen::Index a = t + i;
            if (a < 0 || a >= n) continue;
            const double si = i > 0 ? 1.0 : (i < 0 ? -1.0 : 0.0);
            if (si == 0.0) continue;
            for (int j = -m; j <= m; ++j) {
                const Eigen::Index b = t + j;
                if (b < 0 || b >= n) continue;
                const double sj = j > 0 ? 1.0 : (j < 0 ? -1.0 : 0.0);
                if (sj == 0.0) continue;
                const double g =
                    std::exp(-(static_cast<double>(i) * i + static_cast<double>(j) * j) /
                             (2.0 * sig * sig));
                acc += si * sj * g * ssm.s(a, b);
            }
        }
        nov[t] = acc;
    }
    return nov;
}

std::vector<double> foote_boundaries(const Ssm& ssm, const FooteParams& p,
                                     double song_end) {
    const Eigen::Index n = ssm.s.rows();
    std::vector<double> bounds = {0.0};
    if (n > 2 * p.kernel_half_width) {
        const Vector nov = foote_novelty(ssm, p.kernel_half_width);
        const int w2 = std::max(1, p.peak_window / 2);
        for (Eigen::Index t = 1; t + 1 < n; ++t) {
            if (!(nov[t] >= nov[t - 1] && nov[t] >= nov[t + 1])) continue;
            const Eigen::Index lo = std::max<Eigen::Index>(0, t - w2);
            const Eigen::Index hi = std::min<Eigen::Index>(n - 1, t + w2);
            const auto seg = nov.segment(lo, hi - lo + 1);
            const double mean = seg.mean();
            const double sd =
                std::sqrt((seg.array() - mean).square().sum() / seg.size());
            if (nov[t] > mean + p.peak_delta * sd) {
                const double bt = ssm.frame_times[t];
                if (bt > bounds.back() + 1e-9 && bt < song_end - 1e-9) {
                    bounds.push_back(bt);
                }
            }
        }
    }
    bounds.push_back(song_end);
    return bounds;
}

namespace {

// linear resample of a segment's rows to `steps` time positions
Matrix resample_rows(const Matrix& seg, int steps) {
    const Eigen::Index n = seg.rows();
    Matrix out(steps, seg.cols());
    if (n == 1) {
        for (int i = 0; i < steps; ++i) out.row(i) = seg.row(0);
        return out;
    }
    for (int i = 0; i < steps; ++i) {
        const double pos = static_cast<double>(i) * (n - 1) / (steps - 1);
        const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(pos));
        const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, n - 1);
        const double frac = pos - static_cast<double>(lo);
        out.row(i) = (1.0 - frac) * seg.row(lo) + frac * seg.row(hi);
    }
    return out;
}

// flattened 2-D DFT magnitude (shift-invariant signature)
Vector dft2_magnitude(const Matrix& patch) {
    using Cplx = std::complex<double>;
    const Eigen::Index r = patch.rows(), c = patch.cols();
    Eigen::MatrixXcd fr(r, r), fc(c, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < r; ++j) {
            const double a = -2.0 * std::numbers::pi * i * j / static_cast<double>(r);
            fr(i, j) = Cplx(std::cos(a), std::sin(a));
        }
    }
    for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            const double a = -2.0 * std::numbers::pi * i * j / static_cast<double>(c);
            fc(i, j) = Cplx(std::cos(a), std::sin(a));
        }
    }
    Eigen::MatrixXcd f = fr * patch.cast<Cplx>() * fc;
    Vector out(r * c);
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) out[pos++] = std::abs(f(i, j));
    }
    return out;
}

} // namespace

std::vector<int> fmc2d_labels(const Matrix& features,
                              const std::vector<double>& frame_times,
                              const std::vector<double>& boundaries,
                              std::uint64_t seed) {
    if (boundaries.size() < 2) throw DataError("need at least one segment");
    const int n_seg = static_cast<int>(boundaries.size()) - 1;
    if (n_seg == 1) return {0};

    constexpr int kResampleSteps = 32;
    Matrix sigs(n_seg, kResampleSteps * features.cols());
    for (int s = 0; s < n_seg; ++s) {
        std::vector<Eigen::Index> rows;
        for (std::size_t f = 0; f < frame_times.size(); ++f) {
            if (frame_times[f] >= boundaries[s] && frame_times[f] < boundaries[s + 1]) {
                rows.push_back(static_cast<Eigen::Index>(f));
            }
        }
        if (rows.empty()) {
            // empty segment: nearest frame to its midpoint
            const double mid = 0.5 * (boundaries[s] + boundaries[s + 1]);
            Eigen::Index best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t f = 0; f < frame_times.size(); ++f) {
                const double dd = std::abs(frame_times[f] - mid);
                if (dd < bd) {
                    bd = dd;
                    best = static_cast<Eigen::Index>(f);
                }
            }
            rows.push_back(best);
        }
        Matrix seg(static_cast<Eigen::Index>(rows.size()), features.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) seg.row(i) = features.row(rows[i]);
        sigs.row(s) = dft2_magnitude(resample_rows(seg, kResampleSteps)).transpose();
    }

    int best_k = 1;
    double best_sil = 1e-9;
    std::vector<int> best_labels(n_seg, 0);
    for (int k = 2; k <= std::min(8, n_seg); ++k) {
        auto labels = kmeans(sigs, k, seed + static_cast<std::uint64_t>(k));
        const double sil = mean_silhouette(sigs, labels);
        if (sil > best_sil) {
            best_sil = sil;
            best_k = k;
            best_labels = labels;
        }
    }
    (void)best_k;
    return relabel_by_first_appearance(best_labels);
}

StructureEstimate foote_fmc2d_analyze(const Matrix& features, const TimeGrid& grid,
                                      const FooteParams& p, double song_end,
                                      std::uint64_t seed) {
    std::vector<double> times(grid.num_intervals());
    const auto& t = grid.instants();
    for (std::size_t i = 0; i < times.size(); ++i) times[i] = 0.5 * (t[i] + t[i + 1]);
    const Ssm ssm = build_ssm(features, times);
    StructureEstimate est;
    est.boundaries = foote_boundaries(ssm, p, song_end);
    est.labels = fmc2d_labels(features, times, est.boundaries, seed);
    est.validate();
    return est;
}

CnmfFactors cnmf_factorize(const Matrix& x, int rank, int iterations,
                           std::uint64_t seed,
                           const std::optional<std::pair<Matrix, Matrix>>& init) {
    const Eigen::Index n = x.cols();
    if (rank < 1 || rank > n) throw DataError("cnmf rank out of range");

    Matrix w, g;
    if (init) {
        w = init->first;
        g = init->second;
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.1, 1.0);
        w.resize(n, rank);
        g.resize(n, rank);
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = u(rng);
        for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = u(rng);
    }

    const Matrix kmat = x.transpose() * x;
    const Matrix kpos = 0.5 * (kmat.cwiseAbs() + kmat);
    const Matrix kneg = 0.5 * (kmat.cwiseAbs() - kmat);
    constexpr double kEps = 1e-12;

    auto objective = [&](const Matrix& ww, const Matrix& gg) {
        return (x - x * ww * gg.transpose()).squaredNorm();
    };

    CnmfFactors best;
    best.w = w;
    best.g = g;
    best.objective = objective(w, g);
    double prev = best.objective;
    int rising = 0;

    for (int it = 0; it < iterations; ++it) {
        {
            const Matrix num = kpos * w + g * (w.transpose() * (kneg * w));
            const Matrix den = kneg * w + g * (w.transpose() * (kpos * w));
            g = g.cwiseProduct(
                (num.array() / (den.array() + kEps)).sqrt().matrix());
        }
        {
            const Matrix gtg = g.transpose() * g;
            const Matrix num = kpos * g + kneg * w * gtg;
            const Matrix den = kneg * g + kpos * w * gtg;
            w = w.cwiseProduct(
                (num.array() / (den.array() + kEps)).sqrt().matrix());
        }
        const double obj = objective(w, g);
        if (obj <= prev + 1e-12) {
            rising = 0;
        } else if (++rising > 10) {
            best.converged = false;
            break;
        }
        prev = obj;
        if (obj < best.objective) {
            best.objective = obj;
            best.w = w;
            best.g = g;
        }
    }
    return best;
}

StructureEstimate cnmf_analyze(const Matrix& features, const TimeGrid& grid,
                               const CnmfParams& p, double song_end,
                               std::uint64_t seed) {
    const Eigen::Index n = features.rows();
    if (n < p.rank) {
        StructureEstimate est;
        est.boundaries = {0.0, song_end};
        est.labels = {0};
        return est;
    }
    // features as dims x N, shifted nonnegative
    Matrix x = features.transpose();
    const double mn = x.minCoeff();
    if (mn < 0.0) x.array() -= mn;

    const CnmfFactors f = cnmf_factorize(x, p.rank, p.iterations, seed);
    std::vector<int> labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index arg = 0;
        f.g.row(i).maxCoeff(&arg);
        labels[i] = static_cast<int>(arg);
    }
    labels = median_filter_labels(labels, p.median_width);
    return labels_to_estimate(labels, grid, song_end);
}

AlgorithmId algorithm_from_string(const std::string& s) {
    if (s == "scluster") return AlgorithmId::Scluster;
    if (s == "foote-fmc2d" || s == "foote+fmc2d" || s == "ft-fmc2d") {
        return AlgorithmId::FooteFmc2d;
    }
    if (s == "cnmf") return AlgorithmId::Cnmf;
    throw DataError("unknown algorithm: " + s);
}

std::string to_string(AlgorithmId a) {
    switch (a) {
        case AlgorithmId::Scluster: return "scluster";
        case AlgorithmId::FooteFmc2d: return "foote-fmc2d";
        case AlgorithmId::Cnmf: return "cnmf";
    }
    return "?";
}

namespace {

int take(const ParamPoint& p, const std::string& key, int fallback,
         std::vector<std::string>& seen) {
    seen.push_back(key);
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

void reject_unknown(const ParamPoint& p, const std::vector<std::string>& seen) {
    for (const auto& [k, v] : p) {
        if (std::find(seen.begin(), seen.end(), k) == seen.end()) {
            throw DataError("unknown parameter: " + k);
        }
    }
}

} // namespace

SclusterParams apply_params(const SclusterParams& base, const ParamPoint& p) {
    SclusterParams out = base;
    std::vector<std::string> seen;
    out.evec_smooth = take(p, "evec_smooth", base.evec_smooth, seen);
    out.rec_smooth = take(p, "rec_smooth", base.rec_smooth, seen);
    out.rec_width = take(p, "rec_width", base.rec_width, seen);
    out.n_clusters = take(p, "n_clusters", base.n_clusters, seen);
    reject_unknown(p, seen);
    return out;
}

FooteParams apply_params(const FooteParams& base, const ParamPoint& p) {
    FooteParams out = base;
    std::vector<std::string> seen;
    out.kernel_half_width = take(p, "kernel_half_width", base.kernel_half_width, seen);
    out.peak_window = take(p, "peak_window", base.peak_window, seen);
    // peak_delta is real-valued; expose it in tenths for the integer grid
    auto it = p.find("peak_delta_tenths");
    seen.push_back("peak_delta_tenths");
    if (it != p.end()) out.peak_delta = it->second / 10.0;
    reject_unknown(p, seen);
    return out;
}

CnmfParams apply_params(const CnmfParams& base, const ParamPoint& p) {
    CnmfParams out = base;
    std::vector<std::string> seen;
    out.rank = take(p, "rank", base.rank, seen);
    out.iterations = take(p, "iterations", base.iterations, seen);
    out.median_width = take(p, "median_width", base.median_width, seen);
    reject_unknown(p, seen);
    return out;
}

StructureEstimate analyze(AlgorithmId algo, const Matrix& features,
                          const TimeGrid& grid, const ParamPoint& params,
                          double song_end, std::uint64_t seed) {
    switch (algo) {
        case AlgorithmId::Scluster:
            return scluster_analyze(features, grid, apply_params(SclusterParams{}, params),
                                    song_end, seed);
        case AlgorithmId::FooteFmc2d:
            return foote_fmc2d_analyze(features, grid, apply_params(FooteParams{}, params),
                                       song_end, seed);
        case AlgorithmId::Cnmf:
            return cnmf_analyze(features, grid, apply_params(CnmfParams{}, params),
                                song_end, seed);
    }
    throw DataError("bad algorithm id");
}

GridSearchResult grid_search(const std::map<std::string, std::vector<int>>& grids,
                             const std::function<double(const ParamPoint&)>& score) {
    if (grids.empty()) throw DataError("empty parameter grid");
    std::vector<std::string> names;
    std::vector<std::vector<int>> values;
    for (const auto& [k, v] : grids) {
        if (v.empty()) throw DataError("empty value list for " + k);
        names.push_back(k);
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end());
        values.push_back(sorted);
    }
    GridSearchResult out;
    std::vector<std::size_t> idx(names.size(), 0);
    while (true) {
        ParamPoint point;
        for (std::size_t i = 0; i < names.size(); ++i) {
            point[names[i]] = values[i][idx[i]];
        }
        const double s = score(point);
        out.table.emplace_back(point, s);
        if (s > out.best_score) { // strict: ties keep the earliest (smallest) point
            out.best_score = s;
            out.best = point;
        }
        // odometer increment, last name fastest
        std::size_t pos = names.size();
        bool done = true;
        while (pos-- > 0) {
            if (++idx[pos] < values[pos].size()) {
                done = false;
                break;
            }
            idx[pos] = 0;
        }
        if (done) break;
    }
    return out;
}

} // namespace msa
