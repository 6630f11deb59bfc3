/// @file train.hpp
/// @brief Per-song batch sampling, the training/validation loop, and the
/// finite-difference gradient checker.

#pragma once

#include "msa/analyzers.hpp"
#include "msa/metric.hpp"
#include "msa/metrics.hpp"
#include "msa/net.hpp"
#include "msa/types.hpp"

#include <map>
#include <optional>

namespace msa {

struct TrainConfig {
    int batch_size = 128;
    double lr = 0.001;
    double lr_factor = 0.8;
    int lr_patience = 2;
    double lr_floor = 1e-5;
    int max_epochs = 20;
    std::uint64_t seed = 1;
    LossConfig loss;
    WindowMode window_mode = WindowMode::Hann;
    GridKind grid = GridKind::Beat;
    AlgorithmId validation_algo = AlgorithmId::Scluster;
    ParamPoint validation_params;
    MetricsConfig metrics;
    MelConfig mel;
};

/// One epoch of per-song batches: shuffle each song, pad the tail batch by
/// re-using the first shuffled examples when more than one batch is needed,
/// then emit fixed-size batches. Batches never mix songs.
std::vector<std::vector<LabeledExample>> epoch_batches(
    const std::map<std::string, std::vector<LabeledExample>>& by_song,
    int batch_size, std::mt19937_64& rng);

/// One song of the corpus: synced log-mel features, grids, ground truth.
struct SongData {
    std::string id;
    FeatureMatrix features;
    TimeGrid beats;
    TimeGrid downbeats;
    Annotation annotation;

    const TimeGrid& grid(GridKind kind) const {
        return kind == GridKind::Beat ? beats : downbeats;
    }
    double duration() const { return annotation.end_time(); }
};

struct ValidationResult {
    SegmentMetrics mean;       // unweighted means over scored songs
    double score = 0.0;        // summary of the means
    int failed_songs = 0;
};

/// Embed each song on its grid, run the analyzer, average the metrics.
/// Per-song analyzer failures are counted and excluded from the means.
ValidationResult validate_model(EmbeddingNet& net,
                                const std::vector<SongData>& songs,
                                const TrainConfig& cfg);

/// Same metric path on raw synced features instead of embeddings.
ValidationResult validate_raw_features(const std::vector<SongData>& songs,
                                       const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    double val_score = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    EmbeddingNet net;          // best model by validation summary score
    std::vector<EpochRecord> history;
    double best_score = 0.0;
    int best_epoch = -1;
};

/// Full training loop: per-song batches -> forward -> mine -> loss -> Adam,
/// validation after each epoch, plateau LR schedule (factor 0.8 after
/// `lr_patience` epochs without improvement), best-model tracking.
/// Deterministic for a fixed cfg.seed.
TrainResult train_model(const std::vector<SongData>& train_songs,
                        const std::vector<SongData>& val_songs,
                        const TrainConfig& cfg);

/// Pooled model inputs and label ids for every grid interval of one song.
struct SongExamples {
    Matrix inputs; // m x in_dim
    std::vector<int> labels;
    std::vector<LabeledExample> meta;
};
SongExamples prepare_song_examples(const SongData& song, const TrainConfig& cfg);

/// Max relative error between analytic parameter gradients and central
/// finite differences (64-bit, given step). Checks up to
/// `samples_per_tensor` entries of each tensor, deterministically chosen.
double grad_check(EmbeddingNet& net, const Matrix& batch_inputs,
                  const std::vector<int>& labels, const LossConfig& loss_cfg,
                  double step = 1e-5, int samples_per_tensor = 0,
                  std::uint64_t seed = 7);

} // namespace msa
