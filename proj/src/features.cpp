#include "msa/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace msa {

namespace detail {

void fft_pow2(std::vector<double>& re, std::vector<double>& im) {
    const std::size_t n = re.size();
    if (n == 0 || (n & (n - 1)) != 0 || im.size() != n) {
        throw std::invalid_argument("fft_pow2 needs power-of-two length");
    }
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (std::size_t i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::size_t a = i + k, b = i + k + len / 2;
                const double tr = re[b] * cr - im[b] * ci;
                const double ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_filterbank(const MelConfig& cfg) {
    const int bins = cfg.fft_size / 2 + 1;
    const int bands = cfg.mel_bands;
    Matrix fb = Matrix::Zero(bands, bins);
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);
    std::vector<double> edges(bands + 2);
    for (int i = 0; i < bands + 2; ++i) {
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (bands + 1));
    }
    for (int b = 0; b < bands; ++b) {
        const double lo = edges[b], c = edges[b + 1], hi = edges[b + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
            if (f <= lo || f >= hi) continue;
            fb(b, k) = (f < c) ? (f - lo) / (c - lo) : (hi - f) / (hi - c);
        }
    }
    return fb;
}

// Modified Bessel I0 by power series, for the Kaiser window.
static double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double hx = 0.5 * x;
    for (int k = 1; k < 64; ++k) {
        term *= (hx / k) * (hx / k);
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

} // namespace detail

WindowMode window_mode_from_string(const std::string& s) {
    if (s == "center") return WindowMode::Center;
    if (s == "alone") return WindowMode::Alone;
    if (s == "hann") return WindowMode::Hann;
    throw DataError("unknown window mode: " + s);
}

std::string to_string(WindowMode m) {
    switch (m) {
        case WindowMode::Center: return "center";
        case WindowMode::Alone: return "alone";
        case WindowMode::Hann: return "hann";
    }
    return "?";
}

FeatureMatrix log_mel(const std::vector<double>& audio, const MelConfig& cfg) {
    if (audio.empty()) throw DataError("empty audio");
    const int n = static_cast<int>(audio.size());
    if (n < cfg.fft_size) throw DataError("audio shorter than one FFT frame");

    const int frames = 1 + (n - cfg.fft_size) / cfg.hop;
    const int bins = cfg.fft_size / 2 + 1;

    std::vector<double> hann(cfg.fft_size);
    for (int i = 0; i < cfg.fft_size; ++i) {
        hann[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / cfg.fft_size));
    }
    const Matrix fb = detail::mel_filterbank(cfg);

    FeatureMatrix out;
    out.data.resize(frames, cfg.mel_bands);
    out.frame_times.resize(frames);
    std::vector<double> re(cfg.fft_size), im(cfg.fft_size);
    Vector power(bins);
    for (int f = 0; f < frames; ++f) {
        const int off = f * cfg.hop;
        for (int i = 0; i < cfg.fft_size; ++i) {
            re[i] = audio[off + i] * hann[i];
            im[i] = 0.0;
        }
        detail::fft_pow2(re, im);
        for (int k = 0; k < bins; ++k) {
            power[k] = re[k] * re[k] + im[k] * im[k];
        }
        Vector mel = fb * power;
        for (int b = 0; b < cfg.mel_bands; ++b) {
            out.data(f, b) = std::log(mel[b] + cfg.log_floor);
        }
        out.frame_times[f] =
            (off + 0.5 * cfg.fft_size) / static_cast<double>(cfg.sample_rate);
    }
    return out;
}

namespace {

// Context amplitude mask at window sample index i (0-based), given the bar
// interval expressed as sample indices within the window.
double mode_mask(WindowMode mode, int i, int total, int bar_lo, int bar_hi) {
    if (mode == WindowMode::Center) return 1.0;
    if (i >= bar_lo && i < bar_hi) return 1.0;
    if (mode == WindowMode::Alone) return 0.0;
    // Hann ramps span the full context on each side.
    if (i < bar_lo) {
        if (bar_lo <= 0) return 1.0;
        return 0.5 * (1.0 - std::cos(std::numbers::pi * i / static_cast<double>(bar_lo)));
    }
    const int right = total - bar_hi;
    if (right <= 0) return 1.0;
    return 0.5 *
           (1.0 - std::cos(std::numbers::pi * (total - 1 - i) / static_cast<double>(right)));
}

} // namespace

std::vector<double> slice_window(const std::vector<double>& audio,
                                 double center_time,
                                 double bar_start, double bar_end,
                                 WindowMode mode, const MelConfig& cfg) {
    if (!(bar_end > bar_start)) throw DataError("degenerate bar interval");
    const int w = cfg.window_samples();
    const long start = std::lround(center_time * cfg.sample_rate) - w / 2;
    std::vector<double> out(w, 0.0);
    for (int i = 0; i < w; ++i) {
        const long s = start + i;
        if (s >= 0 && s < static_cast<long>(audio.size())) out[i] = audio[s];
    }
    if (mode != WindowMode::Center) {
        const int bar_lo = std::clamp<int>(
            static_cast<int>(std::lround(bar_start * cfg.sample_rate) - start), 0, w);
        const int bar_hi = std::clamp<int>(
            static_cast<int>(std::lround(bar_end * cfg.sample_rate) - start), 0, w);
        for (int i = 0; i < w; ++i) {
            out[i] *= mode_mask(mode, i, w, bar_lo, bar_hi);
        }
    }
    return out;
}

FeatureMatrix sync_to_grid(const FeatureMatrix& fm, const TimeGrid& grid) {
    fm.validate();
    const auto& t = grid.instants();
    const std::size_t n_out = grid.num_intervals();
    FeatureMatrix out;
    out.data.resize(static_cast<Eigen::Index>(n_out), fm.data.cols());
    out.frame_times.resize(n_out);
    for (std::size_t i = 0; i < n_out; ++i) {
        const double lo = t[i], hi = t[i + 1];
        const double mid = 0.5 * (lo + hi);
        Vector acc = Vector::Zero(fm.data.cols());
        int count = 0;
        for (std::size_t f = 0; f < fm.frame_times.size(); ++f) {
            if (fm.frame_times[f] >= lo && fm.frame_times[f] < hi) {
                acc += fm.data.row(f).transpose();
                ++count;
            }
        }
        if (count > 0) {
            out.data.row(i) = (acc / count).transpose();
        } else {
            // empty interval: copy the frame nearest to the midpoint
            std::size_t best = 0;
            double best_d = std::abs(fm.frame_times[0] - mid);
            for (std::size_t f = 1; f < fm.frame_times.size(); ++f) {
                const double d = std::abs(fm.frame_times[f] - mid);
                if (d < best_d) {
                    best_d = d;
                    best = f;
                }
            }
            out.data.row(i) = fm.data.row(best);
        }
        out.frame_times[i] = mid;
    }
    return out;
}

std::vector<double> resample(const std::vector<double>& audio,
                             int src_rate, int dst_rate) {
    if (src_rate <= 0 || dst_rate <= 0) throw DataError("bad sample rates");
    if (src_rate == dst_rate) return audio;
    const double ratio = static_cast<double>(src_rate) / dst_rate;
    const double fc = 0.5 * std::min(1.0, 1.0 / ratio); // cutoff, input-rate units
    const int half_taps = 32;
    const double beta = 8.0;
    const double i0b = detail::bessel_i0(beta);
    const auto n_out = static_cast<std::size_t>(
        std::floor(static_cast<double>(audio.size()) * dst_rate / src_rate));
    std::vector<double> out(n_out, 0.0);
    for (std::size_t n = 0; n < n_out; ++n) {
        const double pos = static_cast<double>(n) * ratio;
        const long m0 = static_cast<long>(std::floor(pos)) - half_taps + 1;
        const long m1 = static_cast<long>(std::floor(pos)) + half_taps;
        double acc = 0.0;
        for (long m = std::max<long>(0, m0);
             m <= std::min<long>(static_cast<long>(audio.size()) - 1, m1); ++m) {
            const double x = pos - static_cast<double>(m);
            const double u = x / half_taps;
            if (u <= -1.0 || u >= 1.0) continue;
            const double kaiser = detail::bessel_i0(beta * std::sqrt(1.0 - u * u)) / i0b;
            const double arg = 2.0 * fc * x;
            const double sinc =
                (std::abs(arg) < 1e-12) ? 1.0
                                        : std::sin(std::numbers::pi * arg) /
                                              (std::numbers::pi * arg);
            acc += audio[m] * 2.0 * fc * sinc * kaiser;
        }
        out[n] = acc;
    }
    return out;
}

int window_frames(const MelConfig& cfg) {
    return 1 + (cfg.window_samples() - cfg.fft_size) / cfg.hop;
}

Matrix window_from_features(const FeatureMatrix& fm, double center_time,
                            double bar_start, double bar_end,
                            WindowMode mode, const MelConfig& cfg) {
    if (!(bar_end > bar_start)) throw DataError("degenerate bar interval");
    fm.validate();
    const int frames = window_frames(cfg);
    const double floor_val = std::log(cfg.log_floor);
    const double win_start = center_time - 0.5 * cfg.window_seconds;
    const double period = cfg.frame_period();
    Matrix out(frames, fm.data.cols());

    // bar interval in window-frame units, for the mode mask
    const int bar_lo = std::clamp<int>(
        static_cast<int>(std::lround((bar_start - win_start) / period)), 0, frames);
    const int bar_hi = std::clamp<int>(
        static_cast<int>(std::lround((bar_end - win_start) / period)), 0, frames);

    for (int f = 0; f < frames; ++f) {
        const double t = win_start + (f * cfg.hop + 0.5 * cfg.fft_size) / cfg.sample_rate;
        // nearest input frame within half a period, otherwise pad with the floor
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        // frame_times are increasing; binary search for the neighbor
        auto it = std::lower_bound(fm.frame_times.begin(), fm.frame_times.end(), t);
        for (long j = static_cast<long>(it - fm.frame_times.begin()) - 1;
             j <= static_cast<long>(it - fm.frame_times.begin()); ++j) {
            if (j < 0 || j >= static_cast<long>(fm.frame_times.size())) continue;
            const double d = std::abs(fm.frame_times[j] - t);
            if (d < best_d) {
                best_d = d;
                best = static_cast<std::size_t>(j);
            }
        }
        const bool have = best_d <= 0.5 * period + 1e-9;
        const double mask = mode_mask(mode, f, frames, bar_lo, bar_hi);
        for (Eigen::Index b = 0; b < fm.data.cols(); ++b) {
            double v = have ? fm.data(best, b) : floor_val;
            if (mask <= 0.0) {
                v = floor_val;
            } else if (mask < 1.0) {
                v = std::max(v + 2.0 * std::log(mask), floor_val);
            }
            out(f, b) = v;
        }
    }
    return out;
}

Vector pool_window(const Matrix& window) {
    const Eigen::Index frames = window.rows();
    const Eigen::Index bands = window.cols();
    if (frames < 4) throw DataError("window too short to pool");
    Vector out(bands * 8);
    Eigen::Index pos = 0;
    for (int q = 0; q < 4; ++q) {
        const Eigen::Index lo = q * (frames / 4);
        const Eigen::Index hi = (q == 3) ? frames : (q + 1) * (frames / 4);
        const Eigen::Index n = hi - lo;
        for (Eigen::Index b = 0; b < bands; ++b) {
            const auto col = window.col(b).segment(lo, n);
            const double mean = col.mean();
            const double var = (col.array() - mean).square().sum() / static_cast<double>(n);
            out[pos + b] = mean;
            out[pos + bands + b] = std::sqrt(std::max(0.0, var));
        }
        pos += 2 * bands;
    }
    return out;
}

} // namespace msa
