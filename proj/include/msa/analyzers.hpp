/// @file analyzers.hpp
/// @brief SSM construction and the structure-analysis algorithms.

#pragma once

#include "msa/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>

namespace msa {

/// Symmetric self-similarity matrix with unit diagonal and entries in [0,1].
struct Ssm {
    Matrix s;
    std::vector<double> frame_times;

    void validate() const;
};

/// Gaussian-kernel SSM from row features: S_ij = exp(-d_ij^2 / (2 sigma^2)).
/// sigma <= 0 selects the median off-diagonal distance (1.0 when degenerate).
Ssm build_ssm(const Matrix& rows, const std::vector<double>& frame_times,
              double sigma = 0.0);

struct SclusterParams {
    int evec_smooth = 5;
    int rec_smooth = 3;
    int rec_width = 2;
    int n_clusters = 0; // 0 = auto via eigengap
};

struct FooteParams {
    int kernel_half_width = 16;
    double peak_delta = 0.5;
    int peak_window = 32;
};

struct CnmfParams {
    int rank = 4;
    int iterations = 300;
    int median_width = 9;
};

/// Spectral-clustering analyzer: k-NN recurrence graph + temporal path graph,
/// normalized Laplacian eigenvectors, smoothed and k-means clustered into
/// frame labels, then boundaries at label changes mapped to grid times.
StructureEstimate scluster_analyze(const Matrix& features, const TimeGrid& grid,
                                   const SclusterParams& p, double song_end,
                                   std::uint64_t seed = 1);

/// Checkerboard-kernel novelty curve of an SSM (zero-padded at the edges).
Vector foote_novelty(const Ssm& ssm, int kernel_half_width);

/// Novelty peaks above a sliding mean + peak_delta * std threshold, as
/// boundary times (0 and song_end always included).
std::vector<double> foote_boundaries(const Ssm& ssm, const FooteParams& p,
                                     double song_end);

/// 2-D Fourier-magnitude segment signatures clustered by k-means; K chosen
/// by mean silhouette over 2..min(8, n_segments).
std::vector<int> fmc2d_labels(const Matrix& features,
                              const std::vector<double>& frame_times,
                              const std::vector<double>& boundaries,
                              std::uint64_t seed = 1);

StructureEstimate foote_fmc2d_analyze(const Matrix& features, const TimeGrid& grid,
                                      const FooteParams& p, double song_end,
                                      std::uint64_t seed = 1);

struct CnmfFactors {
    Matrix w; // n x rank
    Matrix g; // n x rank
    double objective = 0.0;
    bool converged = true;
};

/// Convex NMF X ~= X W G^T by multiplicative updates; returns the best
/// accepted iterate. `init` optionally fixes the starting factors.
CnmfFactors cnmf_factorize(const Matrix& x, int rank, int iterations,
                           std::uint64_t seed,
                           const std::optional<std::pair<Matrix, Matrix>>& init = {});

StructureEstimate cnmf_analyze(const Matrix& features, const TimeGrid& grid,
                               const CnmfParams& p, double song_end,
                               std::uint64_t seed = 1);

enum class AlgorithmId { Scluster, FooteFmc2d, Cnmf };
AlgorithmId algorithm_from_string(const std::string& s);
std::string to_string(AlgorithmId a);

/// Integer-valued analyzer parameters, by name; unknown names are rejected
/// by the per-algorithm appliers below.
using ParamPoint = std::map<std::string, int>;

SclusterParams apply_params(const SclusterParams& base, const ParamPoint& p);
FooteParams apply_params(const FooteParams& base, const ParamPoint& p);
CnmfParams apply_params(const CnmfParams& base, const ParamPoint& p);

/// Analyze with named integer parameter overrides on the algorithm defaults.
StructureEstimate analyze(AlgorithmId algo, const Matrix& features,
                          const TimeGrid& grid, const ParamPoint& params,
                          double song_end, std::uint64_t seed = 1);

struct GridSearchResult {
    ParamPoint best;
    double best_score = -1.0;
    std::vector<std::pair<ParamPoint, double>> table;
};

/// Exhaustive cartesian-product search; the score function maps a parameter
/// point to a mean summary score. Ties keep the lexicographically smallest
/// point (grids are iterated in sorted-name, given-value order).
GridSearchResult grid_search(const std::map<std::string, std::vector<int>>& grids,
                             const std::function<double(const ParamPoint&)>& score);

/// Seeded k-means (k-means++ init, fixed iteration cap). Returns labels.
std::vector<int> kmeans(const Matrix& points, int k, std::uint64_t seed,
                        int iters = 100, int restarts = 4);

/// Mean silhouette coefficient of a labeling (Euclidean).
double mean_silhouette(const Matrix& points, const std::vector<int>& labels);

/// Sliding median filter on integer labels (width normalized to odd).
std::vector<int> median_filter_labels(const std::vector<int>& labels, int width);

} // namespace msa
