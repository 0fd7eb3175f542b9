#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pairvoice/audio.hpp"
#include "pairvoice/errors.hpp"
#include "test_helpers.hpp"

using namespace pairvoice;
using testutil::TempDir;

TEST_CASE("load_wav: mono silence") {
    TempDir dir("wav");
    testutil::write_bytes(dir / "s.wav", testutil::wav_bytes(std::vector<std::int16_t>(22050, 0), 1, 22050));
    const AudioClip clip = load_wav(dir / "s.wav");
    CHECK(clip.sample_rate_hz == 22050);
    REQUIRE(clip.samples.size() == 22050);
    CHECK(std::all_of(clip.samples.begin(), clip.samples.end(), [](double x) { return x == 0.0; }));
}

TEST_CASE("load_wav: opposite stereo channels average to zero") {
    TempDir dir("wav");
    std::vector<std::int16_t> pcm;
    for (int i = 0; i < 100; ++i) {
        pcm.push_back(16384);
        pcm.push_back(-16384);
    }
    testutil::write_bytes(dir / "st.wav", testutil::wav_bytes(pcm, 2, 16000));
    const AudioClip clip = load_wav(dir / "st.wav");
    CHECK(clip.sample_rate_hz == 16000);
    REQUIRE(clip.samples.size() == 100);
    for (double x : clip.samples) CHECK(x == 0.0);
}

TEST_CASE("load_wav: full-scale negative sample maps to -1") {
    TempDir dir("wav");
    testutil::write_bytes(dir / "m.wav", testutil::wav_bytes({-32768, 16384, 0}, 1, 22050));
    const AudioClip clip = load_wav(dir / "m.wav");
    REQUIRE(clip.samples.size() == 3);
    CHECK(clip.samples[0] == -1.0);
    CHECK(clip.samples[1] == 0.5);
}

TEST_CASE("load_wav: malformed and unsupported files") {
    TempDir dir("wav");
    testutil::write_bytes(dir / "junk.wav", "this is not a wav file at all, not even close");
    CHECK_THROWS_AS(load_wav(dir / "junk.wav"), FormatError);
    testutil::write_bytes(dir / "float.wav", testutil::wav_bytes({0, 0, 0, 0}, 1, 22050, 3, 16));
    CHECK_THROWS_AS(load_wav(dir / "float.wav"), UnsupportedError);
    auto bytes = testutil::wav_bytes({1, 2, 3, 4}, 1, 22050);
    testutil::write_bytes(dir / "trunc.wav", bytes.substr(0, 30));
    CHECK_THROWS_AS(load_wav(dir / "trunc.wav"), FormatError);
}

TEST_CASE("write_wav then load_wav") {
    TempDir dir("wav");
    const AudioClip clip = testutil::sine(440, 0.5, 1000);
    write_wav(dir / "rt.wav", clip);
    const AudioClip back = load_wav(dir / "rt.wav");
    REQUIRE(back.samples.size() == clip.samples.size());
    for (std::size_t i = 0; i < clip.samples.size(); ++i) CHECK(back.samples[i] == doctest::Approx(clip.samples[i]).epsilon(1e-4));
}

TEST_CASE("resample_linear") {
    SUBCASE("identity at the same rate") {
        const AudioClip clip = testutil::sine(300, 0.7, 500);
        CHECK(resample_linear(clip, 22050).samples == clip.samples);
    }
    SUBCASE("constant stays constant") {
        AudioClip c{std::vector<double>(441, 0.3), 44100};
        const AudioClip out = resample_linear(c, 22050);
        CHECK(out.samples.size() == 221);
        for (double x : out.samples) CHECK(x == doctest::Approx(0.3));
    }
    SUBCASE("ramp upsampled two-fold") {
        AudioClip c;
        c.sample_rate_hz = 100;
        for (int i = 0; i < 100; ++i) c.samples.push_back(i / 99.0);
        const AudioClip out = resample_linear(c, 200);
        REQUIRE(out.samples.size() == 200);
        // End points are aligned, so the ideal output is the 200-point ramp j / 199.
        double worst = 0.0;
        for (std::size_t j = 0; j < out.samples.size(); ++j)
            worst = std::max(worst, std::abs(out.samples[j] - static_cast<double>(j) / 199.0));
        CHECK(worst < 1e-6);
    }
    CHECK_THROWS_AS(resample_linear(testutil::sine(1, 1, 10), 0), ConfigError);
}

TEST_CASE("frame_signal counts") {
    CHECK(frame_length_samples(25.0, 22050) == 551);
    CHECK(frame_length_samples(10.0, 22050) == 220);
    const Frames f = frame_signal(AudioClip{std::vector<double>(22050, 0.1), 22050}, 25.0, 10.0);
    CHECK(f.data.rows() == 98);
    CHECK(f.data.cols() == 551);
    CHECK(frame_signal(AudioClip{std::vector<double>(551, 0.1), 22050}, 25.0, 10.0).data.rows() == 1);
    CHECK_THROWS_AS(frame_signal(AudioClip{std::vector<double>(550, 0.1), 22050}, 25.0, 10.0), TooShortError);
    CHECK_THROWS_AS(frame_signal(AudioClip{std::vector<double>(2000, 0.1), 22050}, 10.0, 25.0), ConfigError);
}

TEST_CASE("frame_count formula for random sizes") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        const int L = 1 + static_cast<int>(rng() % 600);
        const int H = 1 + static_cast<int>(rng() % static_cast<unsigned>(L));
        const std::size_t N = static_cast<std::size_t>(L) + rng() % 5000;
        std::size_t expect = 0;
        for (std::size_t start = 0; start + static_cast<std::size_t>(L) <= N; start += static_cast<std::size_t>(H)) ++expect;
        CHECK(frame_count(N, L, H) == expect);
    }
}

TEST_CASE("stft_power basics") {
    const int sr = 22050, n_fft = 1024;
    SUBCASE("zeros in, zeros out") {
        const Spectrogram s = spectrogram(AudioClip{std::vector<double>(4000, 0.0), sr});
        CHECK(s.num_bins() == 513);
        for (double x : s.power.flat()) CHECK(x == 0.0);
    }
    SUBCASE("bin-centred sine peaks at its bin") {
        const int k = 37;
        const Spectrogram s = spectrogram(testutil::sine(k * static_cast<double>(sr) / n_fft, 0.8, 8000));
        for (std::size_t t = 0; t < s.num_frames(); ++t) {
            const auto row = s.power.row(t);
            CHECK(std::max_element(row.begin(), row.end()) - row.begin() == k);
        }
    }
    SUBCASE("Parseval") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> nd(0.0, 0.2);
        AudioClip c{std::vector<double>(3000), sr};
        for (auto& x : c.samples) x = nd(rng);
        const Frames f = frame_signal(c, 25.0, 10.0);
        const Spectrogram s = stft_power(f, n_fft);
        for (std::size_t t = 0; t < s.num_frames(); ++t) {
            // One-sided rows: recover the full two-sided sum by doubling the interior bins.
            double full = s.power(t, 0) + s.power(t, n_fft / 2);
            for (int b = 1; b < n_fft / 2; ++b) full += 2.0 * s.power(t, static_cast<std::size_t>(b));
            double energy = 0.0;
            for (double x : f.data.row(t)) energy += x * x;
            CHECK(full == doctest::Approx(n_fft * energy).epsilon(1e-6));
        }
    }
    SUBCASE("n_fft shorter than a frame") {
        const Frames f = frame_signal(testutil::sine(100, 0.5, 2000), 25.0, 10.0);
        CHECK_THROWS_AS(stft_power(f, 512), ConfigError);
    }
}

TEST_CASE("spectrogram invariants") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    AudioClip c{std::vector<double>(551 + 220 * 20), 22050};
    for (auto& x : c.samples) x = u(rng);
    const Spectrogram a = spectrogram(c);
    SUBCASE("sign flip") {
        AudioClip neg = c;
        for (auto& x : neg.samples) x = -x;
        CHECK(spectrogram(neg).power == a.power);
    }
    SUBCASE("trailing samples that never fill a frame") {
        AudioClip longer = c;
        for (int i = 0; i < 219; ++i) longer.samples.push_back(u(rng));
        CHECK(spectrogram(longer).power == a.power);
    }
}

TEST_CASE("fft against a direct DFT") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    const std::size_t n = 64;
    std::vector<double> re(n), im(n);
    for (auto& x : re) x = u(rng);
    for (auto& x : im) x = u(rng);
    const auto re0 = re, im0 = im;
    fft_inplace(re, im);
    for (std::size_t k = 0; k < n; ++k) {
        double sr = 0, si = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(j * k) / n;
            sr += re0[j] * std::cos(ang) - im0[j] * std::sin(ang);
            si += re0[j] * std::sin(ang) + im0[j] * std::cos(ang);
        }
        CHECK(re[k] == doctest::Approx(sr).epsilon(1e-9));
        CHECK(im[k] == doctest::Approx(si).epsilon(1e-9));
    }
}

TEST_CASE("mel scale") {
    CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
    CHECK(hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-4));
    for (double hz : {0.0, 123.0, 1000.0, 8000.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
}

TEST_CASE("mel filterbank shape") {
    const MelFilterBank bank = mel_filterbank(513, 26, 22050, 0.0, 11025.0);
    REQUIRE(bank.weights.rows() == 513);
    REQUIRE(bank.weights.cols() == 26);
    std::vector<std::size_t> peaks;
    for (std::size_t j = 0; j < 26; ++j) {
        std::size_t arg = 0, first = 513, last = 0;
        for (std::size_t b = 0; b < 513; ++b) {
            const double w = bank.weights(b, j);
            CHECK(w >= 0.0);
            if (w > bank.weights(arg, j)) arg = b;
            if (w > 0) {
                first = std::min(first, b);
                last = b;
            }
        }
        CHECK(bank.weights(arg, j) == doctest::Approx(1.0));
        // Unimodal with contiguous support.
        for (std::size_t b = first; b < arg; ++b) CHECK(bank.weights(b + 1, j) >= bank.weights(b, j));
        for (std::size_t b = arg; b < last; ++b) CHECK(bank.weights(b + 1, j) <= bank.weights(b, j));
        for (std::size_t b = first; b <= last; ++b) CHECK(bank.weights(b, j) > 0.0);
        peaks.push_back(arg);
    }
    for (std::size_t j = 1; j < peaks.size(); ++j) CHECK(peaks[j] > peaks[j - 1]);
    for (std::size_t j = 1; j < 26; ++j) {
        bool shared = false;
        for (std::size_t b = 0; b < 513; ++b) shared |= bank.weights(b, j) > 0 && bank.weights(b, j - 1) > 0;
        CHECK(shared);
    }
    for (std::size_t b = peaks.front(); b <= peaks.back(); ++b) {
        double total = 0.0;
        for (std::size_t j = 0; j < 26; ++j) total += bank.weights(b, j);
        CHECK(total > 0.0);
    }
    CHECK_THROWS_AS(mel_filterbank(513, 26, 22050, 500.0, 400.0), ConfigError);
    CHECK_THROWS_AS(mel_filterbank(513, 26, 22050, 0.0, 12000.0), ConfigError);
    CHECK_THROWS_AS(mel_filterbank(513, 1, 22050, 0.0, 8000.0), ConfigError);
}

TEST_CASE("mfcc") {
    const MelFilterBank bank = mel_filterbank(513, 26, 22050, 0.0, 11025.0);
    SUBCASE("silence gives zero coefficients") {
        const Spectrogram s = spectrogram(AudioClip{std::vector<double>(3000, 0.0), 22050});
        const Matrix m = mfcc(s, bank, 13);
        CHECK(m.cols() == 13);
        CHECK(m.rows() == s.num_frames());
        for (double x : m.flat()) CHECK(x == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("doubling power leaves coefficients unchanged") {
        // Broadband input keeps every mel band above the log floor.
        std::mt19937_64 rng(13);
        std::normal_distribution<double> nd(0.0, 0.2);
        AudioClip noise{std::vector<double>(4000), 22050};
        for (auto& x : noise.samples) x = nd(rng);
        const Spectrogram s = spectrogram(noise);
        Spectrogram d = s;
        for (auto& x : d.power.flat()) x *= 2.0;
        const Matrix a = mfcc(s, bank, 13), b = mfcc(d, bank, 13);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.flat()[i] == doctest::Approx(a.flat()[i]).epsilon(1e-9));
    }
    SUBCASE("bank size mismatch") {
        const Spectrogram s = spectrogram(testutil::sine(440, 0.3, 4000), FrameConfig{25, 10, 2048});
        CHECK_THROWS_AS(mfcc(s, bank, 13), ShapeError);
    }
}
