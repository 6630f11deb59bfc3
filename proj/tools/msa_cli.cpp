// Command-line front end: corpus synthesis, feature extraction, training,
// embedding, analysis, evaluation, parameter search, SSM rendering.

#include "msa/analyzers.hpp"
#include "msa/features.hpp"
#include "msa/io.hpp"
#include "msa/metrics.hpp"
#include "msa/net.hpp"
#include "msa/synth.hpp"
#include "msa/train.hpp"
#include "msa/types.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace msa;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const char* kUsage =
    "usage: msa <command> [--config FILE] [flags]\n"
    "\n"
    "commands:\n"
    "  synth       generate a synthetic corpus\n"
    "              --out DIR [--songs N --seed S --noise-std X --tempo BPM\n"
    "               --min-labels N --max-labels N --min-segments N --max-segments N\n"
    "               --min-seconds X --max-seconds X --render-wav 0|1]\n"
    "  extract     features -> grid-synced matrix\n"
    "              (--audio WAV | --features MAT) --beats FILE --out MAT\n"
    "              [--grid beat|downbeat]\n"
    "  train       train the embedding model on a corpus\n"
    "              --corpus INDEX --out CKPT [--val N --loss mul|tri|con\n"
    "               --distance eu|co --grid beat|downbeat\n"
    "               --window-mode center|alone|hann --batch-size N --lr X\n"
    "               --epochs N --seed S --algo NAME]\n"
    "  embed       checkpoint + song -> embedding matrix\n"
    "              --checkpoint CKPT --features MAT --beats FILE --out MAT\n"
    "              [--grid beat|downbeat --window-mode MODE]\n"
    "  analyze     matrix + beats -> estimated annotation\n"
    "              --features MAT --beats FILE --out ANN\n"
    "              [--algo scluster|foote-fmc2d|cnmf --grid beat|downbeat\n"
    "               --params k=v,k=v --seed S]\n"
    "  eval        reference + estimate -> metrics TSV row\n"
    "              --ref ANN --est ANN [--id NAME --out TSV]\n"
    "  gridsearch  exhaustive analyzer parameter search on a corpus\n"
    "              --corpus INDEX --param NAME=V1,V2,... [--param ...]\n"
    "              [--algo NAME --grid beat|downbeat --seed S --out TSV]\n"
    "  render-ssm  matrix -> self-similarity PGM image\n"
    "              --features MAT --out PGM [--sigma X]\n"
    "\n"
    "--config FILE supplies \"key = value\" defaults for any flag; explicit\n"
    "flags override. Exit codes: 0 ok, 1 usage, 2 data error.\n";

// Flag values keyed by name; `--param` may repeat, everything else is last-
// one-wins with config-file values underneath.
struct Args {
    std::map<std::string, std::string> flags;
    std::vector<std::string> params; // repeated --param values, in order

    bool has(const std::string& k) const { return flags.count(k) > 0; }

    std::string str(const std::string& k, const std::string& fallback = "") const {
        auto it = flags.find(k);
        return it == flags.end() ? fallback : it->second;
    }

    std::string required(const std::string& k) const {
        auto it = flags.find(k);
        if (it == flags.end() || it->second.empty()) {
            throw UsageError("missing required flag --" + k);
        }
        return it->second;
    }

    long integer(const std::string& k, long fallback) const {
        auto it = flags.find(k);
        if (it == flags.end()) return fallback;
        try {
            std::size_t pos = 0;
            const long v = std::stol(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument(k);
            return v;
        } catch (const std::exception&) {
            throw UsageError("flag --" + k + " expects an integer, got '" +
                             it->second + "'");
        }
    }

    double real(const std::string& k, double fallback) const {
        auto it = flags.find(k);
        if (it == flags.end()) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument(k);
            return v;
        } catch (const std::exception&) {
            throw UsageError("flag --" + k + " expects a number, got '" +
                             it->second + "'");
        }
    }
};

Args parse_args(int argc, char** argv, int first,
                const std::set<std::string>& allowed) {
    Args out;
    // pass 1: find --config and preload its values as defaults
    for (int i = first; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            for (const auto& [k, v] : load_config(argv[i + 1])) {
                if (k == "param") {
                    out.params.push_back(v);
                } else if (allowed.count(k)) {
                    out.flags[k] = v;
                } else {
                    throw UsageError("config key '" + k +
                                     "' is not a flag of this command");
                }
            }
        }
    }
    // pass 2: explicit flags override
    for (int i = first; i < argc; ++i) {
        std::string a = argv[i];
        if (a.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + a + "'");
        a = a.substr(2);
        std::string value;
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            value = a.substr(eq + 1);
            a = a.substr(0, eq);
        } else {
            if (i + 1 >= argc) throw UsageError("flag --" + a + " needs a value");
            value = argv[++i];
        }
        if (a == "config") continue; // handled above
        if (a == "param") {
            if (!allowed.count("param")) {
                throw UsageError("unknown flag --param for this command");
            }
            out.params.push_back(value);
            continue;
        }
        if (!allowed.count(a)) throw UsageError("unknown flag --" + a);
        out.flags[a] = value;
    }
    return out;
}

GridKind grid_kind(const std::string& s) {
    if (s == "beat") return GridKind::Beat;
    if (s == "downbeat") return GridKind::Downbeat;
    throw UsageError("--grid expects beat or downbeat, got '" + s + "'");
}

ParamPoint parse_param_point(const std::string& text) {
    ParamPoint p;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--params entries look like name=value, got '" +
                             item + "'");
        }
        p[item.substr(0, eq)] = static_cast<int>(std::stol(item.substr(eq + 1)));
    }
    return p;
}

FeatureMatrix embedding_as_matrix(const EmbeddingMatrix& e) {
    FeatureMatrix fm;
    fm.data = e.data;
    fm.frame_times = e.frame_times;
    return fm;
}

int cmd_synth(const Args& a) {
    SynthConfig cfg;
    cfg.n_songs = static_cast<int>(a.integer("songs", cfg.n_songs));
    cfg.seed = static_cast<std::uint64_t>(a.integer("seed", 1));
    cfg.noise_std = a.real("noise-std", cfg.noise_std);
    cfg.tempo_bpm = a.real("tempo", cfg.tempo_bpm);
    cfg.min_unique_labels = static_cast<int>(a.integer("min-labels", cfg.min_unique_labels));
    cfg.max_unique_labels = static_cast<int>(a.integer("max-labels", cfg.max_unique_labels));
    cfg.min_segments = static_cast<int>(a.integer("min-segments", cfg.min_segments));
    cfg.max_segments = static_cast<int>(a.integer("max-segments", cfg.max_segments));
    cfg.min_segment_seconds = a.real("min-seconds", cfg.min_segment_seconds);
    cfg.max_segment_seconds = a.real("max-seconds", cfg.max_segment_seconds);
    cfg.render_wav = a.integer("render-wav", 0) != 0;
    cfg.validate();
    const fs::path out = a.required("out");
    const CorpusIndex index = synth_corpus(cfg, out);
    std::cout << "wrote " << index.entries.size() << " songs to "
              << (out / "corpus.tsv").string() << "\n";
    return 0;
}

int cmd_extract(const Args& a) {
    MelConfig mel;
    FeatureMatrix frames;
    if (a.has("audio")) {
        const WavData wav = load_wav(a.required("audio"));
        std::vector<double> samples = wav.samples;
        if (wav.sample_rate != mel.sample_rate) {
            samples = resample(samples, wav.sample_rate, mel.sample_rate);
        }
        frames = log_mel(samples, mel);
    } else if (a.has("features")) {
        frames = load_matrix(a.required("features"));
    } else {
        throw UsageError("extract needs --audio or --features");
    }
    const BeatGrids grids = load_beats(a.required("beats"));
    const GridKind kind = grid_kind(a.str("grid", "beat"));
    const TimeGrid& grid = kind == GridKind::Beat ? grids.beat : grids.downbeat;
    save_matrix(sync_to_grid(frames, grid), a.required("out"));
    return 0;
}

int cmd_train(const Args& a) {
    TrainConfig cfg;
    cfg.loss.loss = loss_from_string(a.str("loss", "mul"));
    cfg.loss.distance = distance_from_string(a.str("distance", "eu"));
    cfg.grid = grid_kind(a.str("grid", "beat"));
    cfg.window_mode = window_mode_from_string(a.str("window-mode", "hann"));
    cfg.batch_size = static_cast<int>(a.integer("batch-size", cfg.batch_size));
    cfg.lr = a.real("lr", cfg.lr);
    cfg.max_epochs = static_cast<int>(a.integer("epochs", cfg.max_epochs));
    cfg.seed = static_cast<std::uint64_t>(a.integer("seed", 1));
    cfg.validation_algo = algorithm_from_string(a.str("algo", "scluster"));

    const CorpusIndex index = load_corpus_index(a.required("corpus"));
    std::vector<SongData> songs = load_corpus(index);
    if (songs.size() < 2) throw DataError("need at least 2 songs to split");
    const long default_val = std::max<long>(1, static_cast<long>(songs.size()) / 5);
    const long n_val = a.integer("val", default_val);
    if (n_val < 1 || n_val >= static_cast<long>(songs.size())) {
        throw DataError("--val must leave at least one training song");
    }
    std::vector<SongData> val(songs.end() - n_val, songs.end());
    songs.resize(songs.size() - n_val);

    TrainResult result = train_model(songs, val, cfg);
    for (const EpochRecord& r : result.history) {
        std::printf("epoch %d  loss %.6f  val %.6f  lr %.6g\n", r.epoch,
                    r.mean_loss, r.val_score, r.lr);
    }
    std::printf("best epoch %d  val %.6f\n", result.best_epoch, result.best_score);

    std::map<std::string, std::string> meta{
        {"loss", to_string(cfg.loss.loss)},
        {"distance", to_string(cfg.loss.distance)},
        {"window_mode", to_string(cfg.window_mode)},
        {"grid", cfg.grid == GridKind::Beat ? "beat" : "downbeat"},
        {"seed", std::to_string(cfg.seed)},
        {"best_epoch", std::to_string(result.best_epoch)},
    };
    save_checkpoint(result.net, meta, a.required("out"));
    return 0;
}

int cmd_embed(const Args& a) {
    Checkpoint ck = load_checkpoint(a.required("checkpoint"));
    const FeatureMatrix features = load_matrix(a.required("features"));
    const BeatGrids grids = load_beats(a.required("beats"));
    const std::string default_grid =
        ck.config.count("grid") ? ck.config.at("grid") : "beat";
    const GridKind kind = grid_kind(a.str("grid", default_grid));
    const TimeGrid& grid = kind == GridKind::Beat ? grids.beat : grids.downbeat;
    const std::string default_mode =
        ck.config.count("window_mode") ? ck.config.at("window_mode") : "hann";
    const WindowMode mode =
        window_mode_from_string(a.str("window-mode", default_mode));
    MelConfig mel;
    const EmbeddingMatrix e = embed_song(ck.net, features, grid, mel, mode);
    save_matrix(embedding_as_matrix(e), a.required("out"));
    return 0;
}

int cmd_analyze(const Args& a) {
    const FeatureMatrix fm = load_matrix(a.required("features"));
    const BeatGrids grids = load_beats(a.required("beats"));
    const GridKind kind = grid_kind(a.str("grid", "beat"));
    const TimeGrid& grid = kind == GridKind::Beat ? grids.beat : grids.downbeat;
    const AlgorithmId algo = algorithm_from_string(a.str("algo", "scluster"));
    const ParamPoint params = parse_param_point(a.str("params", ""));
    const auto seed = static_cast<std::uint64_t>(a.integer("seed", 1));

    Matrix rows = fm.data;
    if (rows.rows() != static_cast<Eigen::Index>(grid.num_intervals())) {
        rows = sync_to_grid(fm, grid).data; // frame-level input
    }
    const double song_end = grid.instants().back();
    const StructureEstimate est = analyze(algo, rows, grid, params, song_end, seed);
    const fs::path out = a.required("out");
    save_annotation(est.to_annotation(out.stem().string()), out);
    return 0;
}

int cmd_eval(const Args& a) {
    const fs::path ref_path = a.required("ref");
    const fs::path est_path = a.required("est");
    const std::string id = a.str("id", est_path.stem().string());
    const Annotation ref = load_annotation(ref_path, id);
    const Annotation est = load_annotation(est_path, id);
    const SegmentMetrics m = evaluate_segmentation(ref, est);
    const std::string row = metrics_tsv_row(id, m);
    std::cout << row;
    if (a.has("out")) {
        std::ofstream f(a.str("out"), std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write " + a.str("out"));
        f << "song\thr05f\thr3f\tpwf\tsf\tsummary\n" << row;
    }
    return 0;
}

int cmd_gridsearch(const Args& a) {
    if (a.params.empty()) {
        throw UsageError("gridsearch needs at least one --param NAME=V1,V2,...");
    }
    std::map<std::string, std::vector<int>> grids;
    for (const std::string& spec : a.params) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--param looks like NAME=V1,V2,..., got '" + spec + "'");
        }
        const std::string name = spec.substr(0, eq);
        std::vector<int> values;
        std::istringstream in(spec.substr(eq + 1));
        std::string item;
        while (std::getline(in, item, ',')) {
            if (!item.empty()) values.push_back(static_cast<int>(std::stol(item)));
        }
        if (values.empty()) throw UsageError("empty value list for --param " + name);
        grids[name] = values;
    }

    TrainConfig cfg;
    cfg.grid = grid_kind(a.str("grid", "beat"));
    cfg.validation_algo = algorithm_from_string(a.str("algo", "scluster"));
    cfg.seed = static_cast<std::uint64_t>(a.integer("seed", 1));
    const std::vector<SongData> songs =
        load_corpus(load_corpus_index(a.required("corpus")));

    const GridSearchResult res = grid_search(grids, [&](const ParamPoint& p) {
        TrainConfig point_cfg = cfg;
        point_cfg.validation_params = p;
        return validate_raw_features(songs, point_cfg).score;
    });

    std::ostringstream table;
    for (const auto& [point, score] : res.table) {
        for (const auto& [k, v] : point) table << k << "=" << v << " ";
        table << "-> " << score << "\n";
    }
    std::cout << table.str() << "best: ";
    for (const auto& [k, v] : res.best) std::cout << k << "=" << v << " ";
    std::cout << "score " << res.best_score << "\n";
    if (a.has("out")) {
        std::ofstream f(a.str("out"), std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write " + a.str("out"));
        f << table.str();
    }
    return 0;
}

int cmd_render_ssm(const Args& a) {
    const FeatureMatrix fm = load_matrix(a.required("features"));
    const double sigma = a.real("sigma", 0.0);
    render_ssm(build_ssm(fm.data, fm.frame_times, sigma), a.required("out"));
    return 0;
}

int dispatch(int argc, char** argv) {
    if (argc < 2) throw UsageError("no command given");
    const std::string cmd = argv[1];
    const std::set<std::string> common{"config"};
    auto with = [&](std::initializer_list<const char*> names) {
        std::set<std::string> s = common;
        for (const char* n : names) s.insert(n);
        return s;
    };
    if (cmd == "synth") {
        return cmd_synth(parse_args(argc, argv, 2,
                                    with({"out", "songs", "seed", "noise-std",
                                          "tempo", "min-labels", "max-labels",
                                          "min-segments", "max-segments",
                                          "min-seconds", "max-seconds",
                                          "render-wav"})));
    }
    if (cmd == "extract") {
        return cmd_extract(parse_args(argc, argv, 2,
                                      with({"audio", "features", "beats", "grid",
                                            "out"})));
    }
    if (cmd == "train") {
        return cmd_train(parse_args(argc, argv, 2,
                                    with({"corpus", "out", "val", "loss",
                                          "distance", "grid", "window-mode",
                                          "batch-size", "lr", "epochs", "seed",
                                          "algo"})));
    }
    if (cmd == "embed") {
        return cmd_embed(parse_args(argc, argv, 2,
                                    with({"checkpoint", "features", "beats",
                                          "grid", "window-mode", "out"})));
    }
    if (cmd == "analyze") {
        return cmd_analyze(parse_args(argc, argv, 2,
                                      with({"features", "beats", "grid", "algo",
                                            "params", "seed", "out"})));
    }
    if (cmd == "eval") {
        return cmd_eval(parse_args(argc, argv, 2, with({"ref", "est", "id", "out"})));
    }
    if (cmd == "gridsearch") {
        return cmd_gridsearch(parse_args(argc, argv, 2,
                                         with({"corpus", "algo", "grid", "seed",
                                               "out", "param"})));
    }
    if (cmd == "render-ssm") {
        return cmd_render_ssm(parse_args(argc, argv, 2,
                                         with({"features", "sigma", "out"})));
    }
    if (cmd == "help" || cmd == "--help" || cmd == "-h") {
        std::cout << kUsage;
        return 0;
    }
    throw UsageError("unknown command '" + cmd + "'");
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << kUsage;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
