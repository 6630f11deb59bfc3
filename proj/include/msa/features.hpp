/// @file features.hpp
/// @brief Log-mel spectrograms, window slicing modes, and beat synchronization.

#pragma once

#include "msa/types.hpp"

namespace msa {

struct MelConfig {
    int sample_rate = 16000;
    int fft_size = 512;
    int hop = 256;
    int mel_bands = 128;
    double window_seconds = 8.0;
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_floor = 1e-10;

    int window_samples() const {
        return static_cast<int>(window_seconds * sample_rate);
    }
    double frame_period() const {
        return static_cast<double>(hop) / sample_rate;
    }
};

enum class WindowMode { Center, Alone, Hann };

WindowMode window_mode_from_string(const std::string& s);
std::string to_string(WindowMode m);

/// Log-scaled mel spectrogram: Hann analysis window, triangular mel bank over
/// [fmin, fmax], natural log with floor cfg.log_floor. Frame k covers samples
/// [k*hop, k*hop + fft_size); frame_times are frame centers.
FeatureMatrix log_mel(const std::vector<double>& audio, const MelConfig& cfg);

/// 8-second window of samples centered at center_time, zero-padded past the
/// song edges. Alone mode zeroes the context outside the bar interval; Hann
/// mode ramps the context with half-Hann windows spanning the full context
/// on each side.
std::vector<double> slice_window(const std::vector<double>& audio,
                                 double center_time,
                                 double bar_start, double bar_end,
                                 WindowMode mode, const MelConfig& cfg);

/// One output row per grid interval: mean of input frames whose times fall in
/// [t_i, t_{i+1}); empty intervals copy the nearest frame. Output frame times
/// are the interval midpoints.
FeatureMatrix sync_to_grid(const FeatureMatrix& fm, const TimeGrid& grid);

/// Windowed-sinc (Kaiser, beta=8) polyphase resampler.
std::vector<double> resample(const std::vector<double>& audio,
                             int src_rate, int dst_rate);

/// Number of mel frames in one model input window.
int window_frames(const MelConfig& cfg);

/// Model input window taken directly from a precomputed log-mel feature
/// matrix: rows with times in [center - w/2, center + w/2), padded with the
/// log floor to the fixed frame count. Window modes act as amplitude masks on
/// the underlying power, i.e. each row gains 2*ln(mask).
Matrix window_from_features(const FeatureMatrix& fm, double center_time,
                            double bar_start, double bar_end,
                            WindowMode mode, const MelConfig& cfg);

/// Backbone pooling: split the window's time axis into 4 equal quarters and
/// take per-quarter per-band mean and standard deviation, giving a
/// mel_bands*2*4 vector.
Vector pool_window(const Matrix& window);

namespace detail {
/// In-place radix-2 FFT of interleaved complex data; n must be a power of 2.
void fft_pow2(std::vector<double>& re, std::vector<double>& im);
double hz_to_mel(double hz);
double mel_to_hz(double mel);
/// Triangular mel filterbank, rows = bands, cols = fft_size/2 + 1.
Matrix mel_filterbank(const MelConfig& cfg);
} // namespace detail

} // namespace msa
