/// @file synth.hpp
/// @brief Deterministic synthetic corpus generation for testing and
/// end-to-end runs.

#pragma once

#include "msa/train.hpp"
#include "msa/types.hpp"

#include <filesystem>

namespace msa {

struct SynthConfig {
    int n_songs = 10;
    int min_unique_labels = 5;
    int max_unique_labels = 8;
    int min_segments = 10;
    int max_segments = 16;
    double min_segment_seconds = 8.0;
    double max_segment_seconds = 32.0;
    double tempo_bpm = 120.0;
    double noise_std = 0.5;
    std::uint64_t seed = 1;
    bool render_wav = false;

    void validate() const;
};

struct CorpusEntry {
    std::string song_id;
    std::filesystem::path features;
    std::filesystem::path annotation;
    std::filesystem::path beats;
    std::filesystem::path audio; // empty unless WAV rendering was requested
};

struct CorpusIndex {
    std::vector<CorpusEntry> entries;
};

/// Generate one song in memory: per-label mel templates plus AR(1) noise
/// (coefficient 0.9, stationary std = noise_std), constant-tempo grids.
SongData synth_song(const SynthConfig& cfg, const std::string& song_id,
                    std::mt19937_64& rng);

/// Write a full corpus (features, annotations, beats, index file) under
/// out_dir. Deterministic for a fixed cfg.seed.
CorpusIndex synth_corpus(const SynthConfig& cfg,
                         const std::filesystem::path& out_dir);

void save_corpus_index(const CorpusIndex& index, const std::filesystem::path& path);
CorpusIndex load_corpus_index(const std::filesystem::path& path);

/// Load all songs referenced by an index.
std::vector<SongData> load_corpus(const CorpusIndex& index);

} // namespace msa
