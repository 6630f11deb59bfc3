#include "msa/synth.hpp"

#include "msa/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace msa {

void SynthConfig::validate() const {
    if (n_songs < 1) throw DataError("n_songs must be positive");
    // one label cannot satisfy the no-adjacent-repeat rule
    if (min_unique_labels < 2 || min_unique_labels > max_unique_labels) {
        throw DataError("bad unique-label range");
    }
    if (min_segments < 1 || min_segments > max_segments) {
        throw DataError("bad segment-count range");
    }
    if (!(min_segment_seconds > 0.0) || min_segment_seconds > max_segment_seconds) {
        throw DataError("bad segment-duration range");
    }
    if (!(tempo_bpm > 0.0)) throw DataError("tempo must be positive");
    if (noise_std < 0.0) throw DataError("noise_std must be >= 0");
}

namespace {

std::vector<int> sample_label_sequence(int n_seg, int n_labels,
                                       std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, n_labels - 1);
    std::vector<int> seq;
    for (int attempt = 0; attempt < 100; ++attempt) {
        seq.clear();
        seq.push_back(pick(rng));
        while (static_cast<int>(seq.size()) < n_seg) {
            int l = pick(rng);
            if (l == seq.back()) continue; // adjacent repeats would merge
            seq.push_back(l);
        }
        std::vector<char> present(n_labels, 0);
        for (int l : seq) present[l] = 1;
        if (std::all_of(present.begin(), present.end(), [](char c) { return c != 0; })) {
            return seq;
        }
    }
    // force coverage: overwrite alternating slots with the missing labels
    std::vector<char> present(n_labels, 0);
    for (int l : seq) present[l] = 1;
    int slot = 1;
    for (int l = 0; l < n_labels; ++l) {
        if (!present[l] && slot < n_seg) {
            seq[slot] = l;
            slot += 2;
        }
    }
    return seq;
}

} // namespace

SongData synth_song(const SynthConfig& cfg, const std::string& song_id,
                    std::mt19937_64& rng) {
    cfg.validate();
    std::uniform_int_distribution<int> n_label_dist(cfg.min_unique_labels,
                                                    cfg.max_unique_labels);
    std::uniform_int_distribution<int> n_seg_dist(cfg.min_segments, cfg.max_segments);
    std::uniform_real_distribution<double> dur_dist(cfg.min_segment_seconds,
                                                    cfg.max_segment_seconds);
    std::normal_distribution<double> template_dist(0.0, 2.0);
    std::normal_distribution<double> unit(0.0, 1.0);

    const int n_seg = n_seg_dist(rng);
    const int n_labels = std::min(n_label_dist(rng), n_seg);
    const std::vector<int> seq = sample_label_sequence(n_seg, n_labels, rng);

    MelConfig mel;
    const int bands = mel.mel_bands;
    Matrix templates(n_labels, bands);
    for (Eigen::Index i = 0; i < templates.size(); ++i) {
        templates(i) = template_dist(rng);
    }

    std::vector<Segment> segs;
    double t = 0.0;
    for (int s = 0; s < n_seg; ++s) {
        const double d = dur_dist(rng);
        segs.push_back({t, t + d, std::string(1, static_cast<char>('A' + seq[s]))});
        t += d;
    }
    const double duration = t;
    SongData song;
    song.id = song_id;
    song.annotation = Annotation(segs, song_id);

    // constant-tempo beats, downbeat every 4 beats
    const double beat_period = 60.0 / cfg.tempo_bpm;
    std::vector<double> beats, downbeats;
    for (int k = 0; k * beat_period < duration; ++k) {
        beats.push_back(k * beat_period);
        if (k % 4 == 0) downbeats.push_back(k * beat_period);
    }
    song.beats = TimeGrid(beats, GridKind::Beat);
    song.downbeats = TimeGrid(downbeats, GridKind::Downbeat);

    // per-frame features: segment template + AR(1) noise per band
    const double period = mel.frame_period();
    const auto n_frames = static_cast<Eigen::Index>(std::ceil(duration / period));
    song.features.data.resize(n_frames, bands);
    song.features.frame_times.resize(n_frames);
    const double ar = 0.9;
    const double innov = cfg.noise_std * std::sqrt(1.0 - ar * ar);
    Vector state(bands);
    for (int b = 0; b < bands; ++b) state[b] = cfg.noise_std * unit(rng);
    int seg_idx = 0;
    for (Eigen::Index f = 0; f < n_frames; ++f) {
        const double time = static_cast<double>(f) * period;
        while (seg_idx + 1 < n_seg && time >= segs[seg_idx].end) ++seg_idx;
        for (int b = 0; b < bands; ++b) {
            state[b] = ar * state[b] + innov * unit(rng);
            song.features.data(f, b) = templates(seq[seg_idx], b) + state[b];
        }
        song.features.frame_times[f] = time;
    }
    return song;
}

namespace {

std::vector<double> render_audio(const SongData& song, const MelConfig& mel) {
    // three sinusoids per section, keyed to the strongest mel bands of the
    // section's mean feature vector
    const auto n = static_cast<std::size_t>(song.duration() * mel.sample_rate);
    std::vector<double> audio(n, 0.0);
    const Matrix fb = detail::mel_filterbank(mel);
    for (const Segment& seg : song.annotation.segments()) {
        Vector mean = Vector::Zero(mel.mel_bands);
        int count = 0;
        for (std::size_t f = 0; f < song.features.frame_times.size(); ++f) {
            const double t = song.features.frame_times[f];
            if (t >= seg.start && t < seg.end) {
                mean += song.features.data.row(static_cast<Eigen::Index>(f)).transpose();
                ++count;
            }
        }
        if (count == 0) continue;
        mean /= count;
        std::vector<int> order(mel.mel_bands);
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + 3, order.end(),
                          [&](int a, int b) { return mean[a] > mean[b]; });
        const auto lo = static_cast<std::size_t>(seg.start * mel.sample_rate);
        const auto hi = std::min(n, static_cast<std::size_t>(seg.end * mel.sample_rate));
        for (int rank = 0; rank < 3; ++rank) {
            // peak frequency of the band's triangular filter
            Eigen::Index peak = 0;
            fb.row(order[rank]).maxCoeff(&peak);
            const double freq =
                static_cast<double>(peak) * mel.sample_rate / mel.fft_size;
            const double amp = 0.2 / (rank + 1);
            for (std::size_t s = lo; s < hi; ++s) {
                audio[s] += amp * std::sin(2.0 * std::numbers::pi * freq * s /
                                           mel.sample_rate);
            }
        }
    }
    return audio;
}

} // namespace

CorpusIndex synth_corpus(const SynthConfig& cfg,
                         const std::filesystem::path& out_dir) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir)) {
        throw DataError("cannot create output directory " + out_dir.string());
    }
    MelConfig mel;
    CorpusIndex index;
    for (int i = 0; i < cfg.n_songs; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "song_%03d", i);
        // per-song generator, so corpora are stable under n_songs changes
        std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(i));
        const SongData song = synth_song(cfg, id, rng);

        CorpusEntry entry;
        entry.song_id = id;
        entry.features = out_dir / (std::string(id) + ".feat");
        entry.annotation = out_dir / (std::string(id) + ".ann");
        entry.beats = out_dir / (std::string(id) + ".beats");
        save_matrix(song.features, entry.features);
        save_annotation(song.annotation, entry.annotation);
        {
            std::ostringstream beats;
            beats.precision(6);
            beats << std::fixed;
            const auto& t = song.beats.instants();
            for (std::size_t k = 0; k < t.size(); ++k) {
                beats << t[k] << '\t' << (k % 4) + 1 << '\n';
            }
            std::ofstream out(entry.beats, std::ios::binary | std::ios::trunc);
            if (!out) throw DataError("cannot write " + entry.beats.string());
            out << beats.str();
        }
        if (cfg.render_wav) {
            entry.audio = out_dir / (std::string(id) + ".wav");
            save_wav(render_audio(song, mel), mel.sample_rate, entry.audio);
        }
        index.entries.push_back(std::move(entry));
    }
    save_corpus_index(index, out_dir / "corpus.tsv");
    return index;
}

void save_corpus_index(const CorpusIndex& index, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const CorpusEntry& e : index.entries) {
        out << e.song_id << '\t' << e.features.filename().string() << '\t'
            << e.annotation.filename().string() << '\t'
            << e.beats.filename().string() << '\t'
            << (e.audio.empty() ? "-" : e.audio.filename().string()) << '\n';
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f << out.str();
}

CorpusIndex load_corpus_index(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    const auto dir = path.parent_path();
    CorpusIndex index;
    std::string line;
    int line_no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<std::string> cols;
        std::string col;
        while (std::getline(ls, col, '\t')) cols.push_back(col);
        if (cols.size() < 4) {
            throw DataError(path.string() + " line " + std::to_string(line_no) +
                            ": expected song_id, features, annotation, beats");
        }
        CorpusEntry e;
        e.song_id = cols[0];
        if (!seen.insert(e.song_id).second) {
            throw DataError("duplicate song id " + e.song_id);
        }
        e.features = dir / cols[1];
        e.annotation = dir / cols[2];
        e.beats = dir / cols[3];
        if (cols.size() > 4 && cols[4] != "-") e.audio = dir / cols[4];
        for (const auto& p : {e.features, e.annotation, e.beats}) {
            if (!std::filesystem::exists(p)) {
                throw DataError("missing file referenced by index: " + p.string());
            }
        }
        index.entries.push_back(std::move(e));
    }
    return index;
}

std::vector<SongData> load_corpus(const CorpusIndex& index) {
    std::vector<SongData> songs;
    for (const CorpusEntry& e : index.entries) {
        SongData song;
        song.id = e.song_id;
        song.features = load_matrix(e.features);
        song.annotation = load_annotation(e.annotation, e.song_id);
        const BeatGrids grids = load_beats(e.beats);
        song.beats = grids.beat;
        song.downbeats = grids.downbeat;
        songs.push_back(std::move(song));
    }
    return songs;
}

} // namespace msa
