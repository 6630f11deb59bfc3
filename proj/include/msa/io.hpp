/// @file io.hpp
/// @brief File formats: annotations, beats, matrices, checkpoints, PGM, WAV.

#pragma once

#include "msa/analyzers.hpp"
#include "msa/metrics.hpp"
#include "msa/net.hpp"
#include "msa/types.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace msa {

/// Annotation text: lines "start<TAB>end<TAB>label", '#' comments.
Annotation parse_annotation(const std::string& text, const std::string& song_id);
Annotation load_annotation(const std::filesystem::path& path,
                           const std::string& song_id);
std::string format_annotation(const Annotation& ann);
void save_annotation(const Annotation& ann, const std::filesystem::path& path);

struct BeatGrids {
    TimeGrid beat;
    TimeGrid downbeat;
};

/// Beats text: lines "time<TAB>position", position 1 marks downbeats.
BeatGrids parse_beats(const std::string& text);
BeatGrids load_beats(const std::filesystem::path& path);

/// Binary matrix file: magic "MSAMAT1\n", u32 LE rows, u32 LE cols,
/// rows*cols f32 LE row-major, then rows f64 LE frame times.
void save_matrix(const FeatureMatrix& fm, const std::filesystem::path& path);
FeatureMatrix load_matrix(const std::filesystem::path& path);

/// Checkpoint: magic "MSANET1\n", u32 LE tensor count, then per tensor
/// name (u16 LE length + UTF-8), rank (u8), u32 LE dims, f64 LE row-major
/// data; finally u32 LE byte length + UTF-8 "key=value\n" config text.
void save_checkpoint(EmbeddingNet& net,
                     const std::map<std::string, std::string>& config,
                     const std::filesystem::path& path);

struct Checkpoint {
    EmbeddingNet net;
    std::map<std::string, std::string> config;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Binary 8-bit PGM, pixel = round(255 * S_ij), row i top-down.
void render_ssm(const Ssm& ssm, const std::filesystem::path& path);

/// WAV: PCM 16/24-bit and float32; channels averaged to mono.
struct WavData {
    std::vector<double> samples;
    int sample_rate = 0;
};
WavData load_wav(const std::filesystem::path& path);
void save_wav(const std::vector<double>& samples, int sample_rate,
              const std::filesystem::path& path);

/// "key = value" config lines, '#' comments.
std::map<std::string, std::string> parse_config(const std::string& text);
std::map<std::string, std::string> load_config(const std::filesystem::path& path);

/// One metrics TSV row: song_id then the five values at 6 decimals.
std::string metrics_tsv_row(const std::string& song_id, const SegmentMetrics& m);

} // namespace msa
