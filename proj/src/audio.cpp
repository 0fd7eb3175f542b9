#include "pairvoice/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

namespace pairvoice {

void AudioClip::validate() const {
    if (sample_rate_hz <= 0) throw ConfigError("audio clip: sample rate must be positive");
    if (samples.empty()) throw ConfigError("audio clip: no samples");
    for (double s : samples)
        if (!std::isfinite(s)) throw ConfigError("audio clip: non-finite sample");
}

// ---------------------------------------------------------------- WAV

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}
std::uint16_t read_u16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string where = path.string();

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError(where + ": not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t len = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        if (body + len > bytes.size()) {
            // Tolerate a truncated data chunk, a common artifact of interrupted recorders.
            if (std::memcmp(chunk, "data", 4) != 0) throw FormatError(where + ": truncated chunk");
        }
        const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (avail < 16) throw FormatError(where + ": short fmt chunk");
            format = read_u16(chunk + 8);
            channels = read_u16(chunk + 10);
            rate = read_u32(chunk + 12);
            bits = read_u16(chunk + 22);
            if (format == kFormatExtensible && avail >= 26) format = read_u16(chunk + 8 + 24);
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = chunk + 8;
            data_len = avail;
        }
        pos = body + len + (len & 1u);
    }

    if (!have_fmt) throw FormatError(where + ": missing fmt chunk");
    if (data == nullptr) throw FormatError(where + ": missing data chunk");
    if (format != kFormatPcm || bits != 16)
        throw UnsupportedError(where + ": only 16-bit PCM is supported (format " + std::to_string(format) +
                               ", " + std::to_string(bits) + " bits)");
    if (channels < 1 || channels > 2)
        throw UnsupportedError(where + ": unsupported channel count " + std::to_string(channels));
    if (rate == 0) throw FormatError(where + ": zero sample rate");

    const std::size_t frame_bytes = 2u * channels;
    const std::size_t n = data_len / frame_bytes;
    AudioClip clip;
    clip.sample_rate_hz = static_cast<int>(rate);
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const auto v = static_cast<std::int16_t>(read_u16(data + i * frame_bytes + 2 * c));
            acc += static_cast<double>(v) / 32768.0;
        }
        clip.samples[i] = acc / channels;
    }
    return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
    const auto n = static_cast<std::uint32_t>(clip.samples.size());
    std::string out;
    out.reserve(44 + 2 * n);
    out += "RIFF";
    put_u32(out, 36 + 2 * n);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out += "data";
    put_u32(out, 2 * n);
    for (double s : clip.samples) {
        const double c = std::clamp(s, -1.0, 1.0);
        const long q = std::lround(c * 32767.0);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

// ---------------------------------------------------------------- resampling

AudioClip resample_linear(const AudioClip& clip, int target_hz) {
    if (target_hz <= 0) throw ConfigError("resample_linear: target rate must be positive");
    clip.validate();
    if (target_hz == clip.sample_rate_hz) return clip;

    const std::size_t n = clip.samples.size();
    const auto m = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * target_hz / clip.sample_rate_hz));
    AudioClip out;
    out.sample_rate_hz = target_hz;
    out.samples.resize(std::max<std::size_t>(m, 1));
    if (out.samples.size() == 1 || n == 1) {
        std::fill(out.samples.begin(), out.samples.end(), clip.samples.front());
        return out;
    }
    // First and last samples are aligned so that a ramp maps onto a ramp.
    const double step = static_cast<double>(n - 1) / static_cast<double>(out.samples.size() - 1);
    for (std::size_t j = 0; j < out.samples.size(); ++j) {
        const double p = j * step;
        const auto i0 = std::min(static_cast<std::size_t>(p), n - 1);
        const std::size_t i1 = std::min(i0 + 1, n - 1);
        const double frac = p - static_cast<double>(i0);
        out.samples[j] = clip.samples[i0] + frac * (clip.samples[i1] - clip.samples[i0]);
    }
    return out;
}

// ---------------------------------------------------------------- framing / STFT

int frame_length_samples(double ms, int sample_rate_hz) {
    return static_cast<int>(std::floor(ms * sample_rate_hz / 1000.0 + 1e-9));
}

std::size_t frame_count(std::size_t n, int frame_len, int hop) {
    if (frame_len <= 0 || hop <= 0) throw ConfigError("frame length and hop must be positive");
    if (n < static_cast<std::size_t>(frame_len))
        throw TooShortError("signal of " + std::to_string(n) + " samples is shorter than one frame (" +
                            std::to_string(frame_len) + ")");
    return (n - static_cast<std::size_t>(frame_len)) / static_cast<std::size_t>(hop) + 1;
}

Frames frame_signal(const AudioClip& clip, double frame_ms, double hop_ms) {
    clip.validate();
    if (!(hop_ms > 0.0) || frame_ms < hop_ms) throw ConfigError("frame_signal: need frame_ms >= hop_ms > 0");
    const int len = frame_length_samples(frame_ms, clip.sample_rate_hz);
    const int hop = frame_length_samples(hop_ms, clip.sample_rate_hz);
    if (len < 2 || hop < 1) throw ConfigError("frame_signal: frame too short for the sample rate");
    const std::size_t t = frame_count(clip.samples.size(), len, hop);

    std::vector<double> window(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (len - 1));

    Frames f;
    f.data = Matrix(t, static_cast<std::size_t>(len));
    f.frame_len = len;
    f.hop = hop;
    f.sample_rate_hz = clip.sample_rate_hz;
    for (std::size_t r = 0; r < t; ++r) {
        const double* src = clip.samples.data() + r * static_cast<std::size_t>(hop);
        auto dst = f.data.row(r);
        for (int i = 0; i < len; ++i) dst[i] = src[i] * window[i];
    }
    return f;
}

void fft_inplace(std::span<double> re, std::span<double> im) {
    const std::size_t n = re.size();
    if (n != im.size() || n == 0 || (n & (n - 1)) != 0) throw ConfigError("fft: size must be a power of two");
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
        const std::size_t half = len / 2;
        for (std::size_t k = 0; k < half; ++k) {
            const double wr = std::cos(ang * k);
            const double wi = std::sin(ang * k);
            for (std::size_t i = k; i < n; i += len) {
                const std::size_t j = i + half;
                const double tr = re[j] * wr - im[j] * wi;
                const double ti = re[j] * wi + im[j] * wr;
                re[j] = re[i] - tr;
                im[j] = im[i] - ti;
                re[i] += tr;
                im[i] += ti;
            }
        }
    }
}

Spectrogram stft_power(const Frames& frames, int n_fft) {
    if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0) throw ConfigError("stft_power: n_fft must be a power of two");
    if (n_fft < frames.frame_len)
        throw ConfigError("stft_power: n_fft " + std::to_string(n_fft) + " < frame length " +
                          std::to_string(frames.frame_len));
    const std::size_t d_freq = static_cast<std::size_t>(n_fft) / 2 + 1;
    Spectrogram s;
    s.power = Matrix(frames.data.rows(), d_freq);
    s.n_fft = n_fft;
    s.frame_len = frames.frame_len;
    s.hop = frames.hop;
    s.sample_rate_hz = frames.sample_rate_hz;

    std::vector<double> re(static_cast<std::size_t>(n_fft)), im(static_cast<std::size_t>(n_fft));
    for (std::size_t t = 0; t < frames.data.rows(); ++t) {
        std::fill(re.begin(), re.end(), 0.0);
        std::fill(im.begin(), im.end(), 0.0);
        auto src = frames.data.row(t);
        std::copy(src.begin(), src.end(), re.begin());
        fft_inplace(re, im);
        auto dst = s.power.row(t);
        for (std::size_t k = 0; k < d_freq; ++k) dst[k] = re[k] * re[k] + im[k] * im[k];
    }
    return s;
}

Spectrogram spectrogram(const AudioClip& clip, const FrameConfig& cfg) {
    return stft_power(frame_signal(clip, cfg.frame_ms, cfg.hop_ms), cfg.n_fft);
}

// ---------------------------------------------------------------- mel / MFCC

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterBank mel_filterbank(std::size_t d_freq, std::size_t n_mel, int sample_rate_hz, double f_low,
                             double f_high) {
    if (sample_rate_hz <= 0) throw ConfigError("mel_filterbank: sample rate must be positive");
    if (n_mel < 2) throw ConfigError("mel_filterbank: need at least 2 filters");
    if (d_freq < 2) throw ConfigError("mel_filterbank: need at least 2 frequency bins");
    if (!(f_low >= 0.0 && f_low < f_high && f_high <= sample_rate_hz / 2.0))
        throw ConfigError("mel_filterbank: need 0 <= f_low < f_high <= sr/2");

    const double n_fft = 2.0 * static_cast<double>(d_freq - 1);
    const double mel_lo = hz_to_mel(f_low);
    const double mel_hi = hz_to_mel(f_high);
    std::vector<double> edges(n_mel + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_mel + 1));

    MelFilterBank bank;
    bank.weights = Matrix(d_freq, n_mel);
    bank.mel_low_hz = f_low;
    bank.mel_high_hz = f_high;
    bank.sample_rate_hz = sample_rate_hz;

    std::size_t prev_peak = 0;
    for (std::size_t j = 0; j < n_mel; ++j) {
        const double lo = edges[j], mid = edges[j + 1], hi = edges[j + 2];
        double peak = 0.0;
        std::size_t peak_bin = 0;
        for (std::size_t k = 0; k < d_freq; ++k) {
            const double f = static_cast<double>(k) * sample_rate_hz / n_fft;
            double w = 0.0;
            if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
            else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
            bank.weights(k, j) = w;
            if (w > peak) {
                peak = w;
                peak_bin = k;
            }
        }
        if (peak <= 0.0)
            throw ConfigError("mel_filterbank: filter " + std::to_string(j) +
                              " covers no frequency bin; use fewer filters or a larger n_fft");
        if (j > 0 && peak_bin <= prev_peak)
            throw ConfigError("mel_filterbank: filters " + std::to_string(j - 1) + " and " + std::to_string(j) +
                              " share a peak bin; use fewer filters or a larger n_fft");
        prev_peak = peak_bin;
        for (std::size_t k = 0; k < d_freq; ++k) bank.weights(k, j) /= peak;
    }
    return bank;
}

Matrix mfcc(const Spectrogram& spec, const MelFilterBank& bank, std::size_t n_coeff) {
    if (spec.num_bins() != bank.weights.rows())
        throw ShapeError("mfcc: spectrogram has " + std::to_string(spec.num_bins()) + " bins, filter bank " +
                         std::to_string(bank.weights.rows()));
    const std::size_t n_mel = bank.weights.cols();
    if (n_coeff == 0 || n_coeff >= n_mel)
        throw ConfigError("mfcc: n_coeff must be in [1, n_mel - 1]");

    Matrix energies = matmul(spec.power, bank.weights);
    Matrix out(spec.num_frames(), n_coeff);
    const double scale = std::sqrt(2.0 / static_cast<double>(n_mel));
    std::vector<double> logs(n_mel);
    for (std::size_t t = 0; t < energies.rows(); ++t) {
        for (std::size_t m = 0; m < n_mel; ++m) logs[m] = std::log(std::max(energies(t, m), kLogFloor));
        for (std::size_t k = 1; k <= n_coeff; ++k) {
            double acc = 0.0;
            for (std::size_t m = 0; m < n_mel; ++m)
                acc += logs[m] * std::cos(std::numbers::pi * static_cast<double>(k) * (m + 0.5) / n_mel);
            out(t, k - 1) = scale * acc;
        }
    }
    return out;
}

}  // namespace pairvoice
