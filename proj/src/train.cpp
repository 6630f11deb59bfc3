#include "msa/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace msa {

std::vector<std::vector<LabeledExample>> epoch_batches(
    const std::map<std::string, std::vector<LabeledExample>>& by_song,
    int batch_size, std::mt19937_64& rng) {
    if (batch_size < 2) throw DataError("batch size must be >= 2");
    std::vector<std::vector<LabeledExample>> batches;
    for (const auto& [song, examples] : by_song) {
        if (examples.empty()) continue;
        std::vector<LabeledExample> seq = examples;
        std::shuffle(seq.begin(), seq.end(), rng);
        const std::size_t m = seq.size();
        const std::size_t n =
            (m + static_cast<std::size_t>(batch_size) - 1) / batch_size;
        if (n > 1) {
            const std::size_t r = n * batch_size - m;
            const std::vector<LabeledExample> pad(
                seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(r));
            seq.insert(seq.end(), pad.begin(), pad.end());
        }
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t lo = k * batch_size;
            const std::size_t hi = std::min(seq.size(), lo + batch_size);
            batches.emplace_back(seq.begin() + static_cast<std::ptrdiff_t>(lo),
                                 seq.begin() + static_cast<std::ptrdiff_t>(hi));
        }
    }
    return batches;
}

SongExamples prepare_song_examples(const SongData& song, const TrainConfig& cfg) {
    const TimeGrid& grid = song.grid(cfg.grid);
    const ExampleSet set = examples_from_annotation(song.annotation, grid);
    SongExamples out;
    out.meta = set.examples;
    out.labels.reserve(set.examples.size());
    out.inputs.resize(static_cast<Eigen::Index>(set.examples.size()),
                      cfg.mel.mel_bands * 8);
    const auto& t = grid.instants();
    for (std::size_t i = 0; i < set.examples.size(); ++i) {
        const LabeledExample& ex = set.examples[i];
        const Matrix win = window_from_features(song.features, ex.center_time,
                                                t[ex.grid_index], t[ex.grid_index + 1],
                                                cfg.window_mode, cfg.mel);
        out.inputs.row(static_cast<Eigen::Index>(i)) = pool_window(win).transpose();
        out.labels.push_back(ex.label_id);
    }
    return out;
}

namespace {

ValidationResult summarize(std::vector<SegmentMetrics> per_song, int failed,
                           const MetricsConfig& cfg) {
    ValidationResult out;
    out.failed_songs = failed;
    if (per_song.empty()) return out;
    for (const SegmentMetrics& m : per_song) {
        out.mean.hr05f += m.hr05f;
        out.mean.hr3f += m.hr3f;
        out.mean.pwf += m.pwf;
        out.mean.sf += m.sf;
    }
    const double n = static_cast<double>(per_song.size());
    out.mean.hr05f /= n;
    out.mean.hr3f /= n;
    out.mean.pwf /= n;
    out.mean.sf /= n;
    out.mean.summary = summary_score(out.mean, cfg.weights);
    out.score = out.mean.summary;
    return out;
}

ValidationResult validate_features(
    const std::vector<SongData>& songs, const TrainConfig& cfg,
    const std::function<Matrix(const SongData&, const TimeGrid&)>& featurize) {
    std::vector<SegmentMetrics> per_song;
    int failed = 0;
    for (const SongData& song : songs) {
        try {
            const TimeGrid& grid = song.grid(cfg.grid);
            const Matrix rows = featurize(song, grid);
            const StructureEstimate est =
                analyze(cfg.validation_algo, rows, grid, cfg.validation_params,
                        song.duration(), cfg.seed);
            per_song.push_back(evaluate_segmentation(
                song.annotation, est.to_annotation(song.id), cfg.metrics));
        } catch (const std::exception&) {
            ++failed;
        }
    }
    return summarize(std::move(per_song), failed, cfg.metrics);
}

} // namespace

ValidationResult validate_model(EmbeddingNet& net,
                                const std::vector<SongData>& songs,
                                const TrainConfig& cfg) {
    return validate_features(songs, cfg,
                             [&](const SongData& song, const TimeGrid& grid) {
                                 return embed_song(net, song.features, grid, cfg.mel,
                                                   cfg.window_mode)
                                     .data;
                             });
}

ValidationResult validate_raw_features(const std::vector<SongData>& songs,
                                       const TrainConfig& cfg) {
    return validate_features(songs, cfg,
                             [&](const SongData& song, const TimeGrid& grid) {
                                 return sync_to_grid(song.features, grid).data;
                             });
}

TrainResult train_model(const std::vector<SongData>& train_songs,
                        const std::vector<SongData>& val_songs,
                        const TrainConfig& cfg) {
    if (train_songs.empty()) throw DataError("empty training corpus");

    // cache pooled inputs per song
    std::map<std::string, SongExamples> cache;
    std::map<std::string, std::vector<LabeledExample>> by_song;
    for (const SongData& song : train_songs) {
        SongExamples ex = prepare_song_examples(song, cfg);
        by_song[song.id] = ex.meta;
        cache.emplace(song.id, std::move(ex));
    }

    NetOptions opt;
    opt.in_dim = cfg.mel.mel_bands * 8;
    TrainResult result{EmbeddingNet(opt), {}, -1.0, -1};
    result.net.init(cfg.seed);

    EmbeddingNet net = result.net;
    AdamOptimizer adam(cfg.lr);
    std::mt19937_64 rng(cfg.seed);

    double lr = cfg.lr;
    int epochs_since_improve = 0;
    int floor_hits = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        auto batches = epoch_batches(by_song, cfg.batch_size, rng);
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        net.set_train(true);
        for (const auto& batch : batches) {
            if (batch.size() < 2) continue; // batchnorm undefined on singletons
            const SongExamples& ex = cache.at(batch.front().song_id);
            Matrix x(static_cast<Eigen::Index>(batch.size()), net.options().in_dim);
            std::vector<int> labels(batch.size());
            // grid_index is the row index into the song's example matrix
            for (std::size_t i = 0; i < batch.size(); ++i) {
                x.row(static_cast<Eigen::Index>(i)) = ex.inputs.row(batch[i].grid_index);
                labels[i] = batch[i].label_id;
            }
            ForwardCache fc;
            const Matrix e = net.forward(x, &fc);
            const BatchLoss bl = batch_loss(e, labels, cfg.loss);
            loss_sum += bl.loss;
            ++loss_count;
            NetGradients g = net.backward(fc, bl.d_embeddings);
            adam.set_lr(lr);
            adam.step(net.params(), g.views());
        }

        const ValidationResult val = validate_model(net, val_songs, cfg);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
        rec.val_score = val.score;
        rec.lr = lr;
        result.history.push_back(rec);

        if (val.score > result.best_score) {
            result.best_score = val.score;
            result.best_epoch = epoch;
            result.net = net;
            epochs_since_improve = 0;
        } else if (++epochs_since_improve >= cfg.lr_patience) {
            const double next = lr * cfg.lr_factor;
            if (next < cfg.lr_floor) {
                lr = cfg.lr_floor;
                if (++floor_hits >= 2) break;
            } else {
                lr = next;
            }
            epochs_since_improve = 0;
        }
    }
    if (result.best_epoch < 0) result.net = net;
    result.net.set_train(false);
    return result;
}

double grad_check(EmbeddingNet& net, const Matrix& batch_inputs,
                  const std::vector<int>& labels, const LossConfig& loss_cfg,
                  double step, int samples_per_tensor, std::uint64_t seed) {
    FrozenSelection frozen;

    // save batchnorm running stats; train-mode forwards mutate them
    const Vector rm1 = net.bn1.running_mean, rv1 = net.bn1.running_var;
    const Vector rm2 = net.bn2.running_mean, rv2 = net.bn2.running_var;
    auto restore = [&] {
        net.bn1.running_mean = rm1;
        net.bn1.running_var = rv1;
        net.bn2.running_mean = rm2;
        net.bn2.running_var = rv2;
    };
    auto loss_at = [&]() {
        const Matrix e = net.forward(batch_inputs);
        restore();
        return batch_loss(e, labels, loss_cfg, &frozen).loss;
    };

    // analytic gradients (this call also freezes the mined selection)
    ForwardCache fc;
    const Matrix e = net.forward(batch_inputs, &fc);
    restore();
    const BatchLoss bl = batch_loss(e, labels, loss_cfg, &frozen);
    NetGradients grads = net.backward(fc, bl.d_embeddings);

    auto params = net.params();
    auto gviews = grads.views();
    std::mt19937_64 rng(seed);
    double max_err = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        ParamView& p = params[t];
        const ParamView& g = gviews[t];
        std::vector<Eigen::Index> picks;
        if (samples_per_tensor <= 0 || samples_per_tensor >= p.size()) {
            picks.resize(p.size());
            std::iota(picks.begin(), picks.end(), 0);
        } else {
            std::uniform_int_distribution<Eigen::Index> dist(0, p.size() - 1);
            for (int i = 0; i < samples_per_tensor; ++i) picks.push_back(dist(rng));
        }
        for (Eigen::Index k : picks) {
            const double orig = p.data[k];
            p.data[k] = orig + step;
            const double up = loss_at();
            p.data[k] = orig - step;
            const double down = loss_at();
            p.data[k] = orig;
            const double fd = (up - down) / (2.0 * step);
            const double an = g.data[k];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            max_err = std::max(max_err, std::abs(fd - an) / denom);
        }
    }
    return max_err;
}

} // namespace msa
