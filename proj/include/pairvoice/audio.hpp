#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "pairvoice/matrix.hpp"

namespace pairvoice {

inline constexpr int kCanonicalSampleRate = 22050;

struct AudioClip {
    std::vector<double> samples;
    int sample_rate_hz = kCanonicalSampleRate;

    // Throws ConfigError when empty, non-finite or rate <= 0.
    void validate() const;
};

// Analysis parameters shared by framing and the spectrogram.
struct FrameConfig {
    double frame_ms = 25.0;
    double hop_ms = 10.0;
    int n_fft = 1024;
};

struct Frames {
    Matrix data;  // (T, frame_len), Hann-windowed
    int frame_len = 0;
    int hop = 0;
    int sample_rate_hz = 0;
};

struct Spectrogram {
    Matrix power;  // (T, d_freq), d_freq = n_fft/2 + 1
    int n_fft = 0;
    int frame_len = 0;
    int hop = 0;
    int sample_rate_hz = 0;

    std::size_t num_frames() const noexcept { return power.rows(); }
    std::size_t num_bins() const noexcept { return power.cols(); }
    double bin_hz(std::size_t bin) const noexcept {
        return static_cast<double>(bin) * sample_rate_hz / n_fft;
    }
};

struct MelFilterBank {
    Matrix weights;  // (d_freq, n_mel)
    double mel_low_hz = 0.0;
    double mel_high_hz = 0.0;
    int sample_rate_hz = 0;
};

AudioClip load_wav(const std::filesystem::path& path);
// Writes mono 16-bit PCM; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

AudioClip resample_linear(const AudioClip& clip, int target_hz);

// Frame length and hop in samples, floor(ms * sr / 1000).
int frame_length_samples(double ms, int sample_rate_hz);
// T = floor((N - L) / H) + 1, TooShortError when N < L.
std::size_t frame_count(std::size_t n, int frame_len, int hop);

Frames frame_signal(const AudioClip& clip, double frame_ms, double hop_ms);
Spectrogram stft_power(const Frames& frames, int n_fft);
Spectrogram spectrogram(const AudioClip& clip, const FrameConfig& cfg = {});

double hz_to_mel(double hz);
double mel_to_hz(double mel);
MelFilterBank mel_filterbank(std::size_t d_freq, std::size_t n_mel, int sample_rate_hz, double f_low,
                             double f_high);

inline constexpr double kLogFloor = 1e-10;

// Log mel energies followed by DCT-II; coefficients 1..n_coeff.
Matrix mfcc(const Spectrogram& spec, const MelFilterBank& bank, std::size_t n_coeff);

// In-place radix-2 FFT on interleaved real/imag arrays; size must be a power of two.
void fft_inplace(std::span<double> re, std::span<double> im);

}  // namespace pairvoice
