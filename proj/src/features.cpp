#include "pairvoice/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pairvoice/csv.hpp"

namespace pairvoice {

std::string to_string(Task t) {
    switch (t) {
        case Task::pg: return "pg";
        case Task::mm: return "mm";
        case Task::mlh: return "mlh";
        case Task::c: return "c";
    }
    return "?";
}

std::string to_string(Condition c) { return c == Condition::wet ? "wet" : "dry"; }

Task parse_task(std::string_view s) {
    const std::string t = csv::lower(csv::trim(s));
    if (t == "pg") return Task::pg;
    if (t == "mm") return Task::mm;
    if (t == "mlh") return Task::mlh;
    if (t == "c") return Task::c;
    throw SchemaError("unknown task token '" + std::string(s) + "' (expected pg, mm, mlh or c)");
}

Condition parse_condition(std::string_view s) {
    const std::string t = csv::lower(csv::trim(s));
    if (t == "wet") return Condition::wet;
    if (t == "dry") return Condition::dry;
    throw SchemaError("unknown condition token '" + std::string(s) + "' (expected wet or dry)");
}

void FeatureVector::validate() const {
    if (values.size() != names.size() || valid.size() != values.size())
        throw SchemaError("feature vector: names/values/valid lengths differ");
    std::set<std::string_view> seen;
    for (const auto& n : names)
        if (!seen.insert(n).second) throw SchemaError("feature vector: duplicate feature name '" + n + "'");
    for (double v : values)
        if (!std::isfinite(v)) throw SchemaError("feature vector: non-finite value");
}

// ---------------------------------------------------------------- pitch

namespace {

// Normalized autocorrelation of a mean-removed frame for lags [0, max_lag]:
// r(k) = sum x[n]x[n+k] / sqrt(sum_{n<L-k} x[n]^2 * sum_{n>=k} x[n]^2).
std::vector<double> normalized_autocorrelation(std::span<const double> frame, std::size_t max_lag) {
    const std::size_t len = frame.size();
    max_lag = std::min(max_lag, len - 1);
    const double mean = std::accumulate(frame.begin(), frame.end(), 0.0) / static_cast<double>(len);

    std::size_t n = 1;
    while (n < 2 * len) n <<= 1;
    std::vector<double> re(n, 0.0), im(n, 0.0);
    for (std::size_t i = 0; i < len; ++i) re[i] = frame[i] - mean;
    std::vector<double> x(re.begin(), re.begin() + static_cast<std::ptrdiff_t>(len));

    fft_inplace(re, im);
    for (std::size_t i = 0; i < n; ++i) {
        re[i] = re[i] * re[i] + im[i] * im[i];
        im[i] = 0.0;
    }
    // Inverse transform via conjugation; the spectrum is real and even.
    fft_inplace(re, im);

    std::vector<double> prefix(len + 1, 0.0);
    for (std::size_t i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];

    std::vector<double> r(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        const double num = re[k] / static_cast<double>(n);
        const double e1 = prefix[len - k];
        const double e2 = prefix[len] - prefix[k];
        const double den = std::sqrt(e1 * e2);
        r[k] = den > 0.0 ? num / den : 0.0;
    }
    return r;
}

struct FrameWalk {
    int len = 0;
    int hop = 0;
    std::size_t count = 0;
};

FrameWalk walk_for(const AudioClip& clip, double frame_ms, double hop_ms) {
    FrameWalk w;
    w.len = frame_length_samples(frame_ms, clip.sample_rate_hz);
    w.hop = frame_length_samples(hop_ms, clip.sample_rate_hz);
    w.count = frame_count(clip.samples.size(), w.len, w.hop);
    return w;
}

std::span<const double> raw_frame(const AudioClip& clip, const FrameWalk& w, std::size_t t) {
    return {clip.samples.data() + t * static_cast<std::size_t>(w.hop), static_cast<std::size_t>(w.len)};
}

double rms(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

double interpolate_at(const std::vector<double>& r, double lag) {
    const auto i0 = static_cast<std::size_t>(std::floor(lag));
    if (i0 + 1 >= r.size()) return r.back();
    const double frac = lag - static_cast<double>(i0);
    return r[i0] + frac * (r[i0 + 1] - r[i0]);
}

}  // namespace

PitchTrack pitch_track(const AudioClip& clip, const PitchConfig& cfg) {
    clip.validate();
    const double nyquist = clip.sample_rate_hz / 2.0;
    if (!(cfg.f_min > 0.0 && cfg.f_min < cfg.f_max && cfg.f_max <= nyquist))
        throw ConfigError("pitch: need 0 < f_min < f_max <= sr/2");
    const FrameWalk w = walk_for(clip, cfg.frame_ms, cfg.hop_ms);
    const double sr = clip.sample_rate_hz;
    const auto lag_lo = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(sr / cfg.f_max)));
    const auto lag_hi = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(sr / cfg.f_min)),
                                              static_cast<std::size_t>(w.len) - 2);
    if (lag_hi <= lag_lo) throw ConfigError("pitch: frame too short for the requested f_min");

    PitchTrack out;
    out.f0.name = "f0_hz";
    out.f0.frame_len = w.len;
    out.f0.hop = w.hop;
    out.f0.values.assign(w.count, 0.0);
    out.f0.voiced_mask.assign(w.count, false);
    out.peak_correlation.assign(w.count, 0.0);

    for (std::size_t t = 0; t < w.count; ++t) {
        const auto frame = raw_frame(clip, w, t);
        if (rms(frame) < cfg.rms_threshold) continue;
        const auto r = normalized_autocorrelation(frame, lag_hi + 1);

        double best = -1.0;
        for (std::size_t k = lag_lo; k <= lag_hi; ++k) best = std::max(best, r[k]);
        if (best < cfg.voicing_threshold) continue;

        // Smallest interior local maximum close to the global one; guards
        // against picking a multiple of the true period.
        std::size_t lag = 0;
        for (std::size_t k = lag_lo; k <= lag_hi; ++k) {
            if (r[k] >= r[k - 1] && r[k] >= r[k + 1] && r[k] >= 0.9 * best) {
                lag = k;
                break;
            }
        }
        if (lag == 0) continue;

        const double a = r[lag - 1], b = r[lag], c = r[lag + 1];
        const double denom = a - 2.0 * b + c;
        double shift = 0.0;
        if (denom < 0.0) shift = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
        const double peak = std::min(1.0, b - 0.25 * (a - c) * shift);
        if (peak < cfg.voicing_threshold) continue;

        out.f0.values[t] = sr / (static_cast<double>(lag) + shift);
        out.f0.voiced_mask[t] = true;
        out.peak_correlation[t] = peak;
    }
    return out;
}

LldTrack f0_autocorrelation(const AudioClip& clip, double f_min, double f_max) {
    PitchConfig cfg;
    cfg.f_min = f_min;
    cfg.f_max = f_max;
    return pitch_track(clip, cfg).f0;
}

// ---------------------------------------------------------------- voice quality

double local_perturbation(std::span<const double> values, const std::vector<bool>& mask) {
    if (mask.size() != values.size()) throw ShapeError("perturbation: mask length differs from track length");
    double diff_sum = 0.0;
    std::size_t pairs = 0;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!mask[k]) continue;
        sum += values[k];
        ++count;
        if (k > 0 && mask[k - 1]) {
            diff_sum += std::abs(values[k] - values[k - 1]);
            ++pairs;
        }
    }
    if (pairs == 0) throw InsufficientVoicingError("need at least two consecutive voiced frames");
    const double mean = sum / static_cast<double>(count);
    if (mean <= 0.0) throw InsufficientVoicingError("voiced frames carry no positive measure");
    return (diff_sum / static_cast<double>(pairs)) / mean;
}

double jitter_local(const LldTrack& f0) {
    if (f0.voiced_mask.size() != f0.values.size()) throw ShapeError("jitter: mask length differs");
    std::vector<double> periods(f0.values.size(), 0.0);
    std::vector<bool> mask = f0.voiced_mask;
    for (std::size_t k = 0; k < periods.size(); ++k) {
        if (mask[k] && f0.values[k] > 0.0) periods[k] = 1.0 / f0.values[k];
        else mask[k] = false;
    }
    return local_perturbation(periods, mask);
}

double shimmer_local(const AudioClip& clip, const LldTrack& f0) {
    if (f0.frame_len <= 0 || f0.hop <= 0) throw ConfigError("shimmer: f0 track carries no framing");
    FrameWalk w{f0.frame_len, f0.hop, 0};
    w.count = frame_count(clip.samples.size(), w.len, w.hop);
    if (w.count != f0.values.size()) throw ShapeError("shimmer: f0 track does not match the clip");
    std::vector<double> amps(w.count, 0.0);
    for (std::size_t t = 0; t < w.count; ++t) {
        if (!f0.voiced_mask[t]) continue;
        double peak = 0.0;
        for (double v : raw_frame(clip, w, t)) peak = std::max(peak, std::abs(v));
        amps[t] = peak;
    }
    return local_perturbation(amps, f0.voiced_mask);
}

double hnr_from_correlation(double r) {
    constexpr double eps = 1e-9;
    r = std::clamp(r, eps, 1.0 - eps);
    return 10.0 * std::log10(r / (1.0 - r));
}

double hnr_db(const AudioClip& clip, const LldTrack& f0) {
    if (f0.frame_len <= 0 || f0.hop <= 0) throw ConfigError("hnr: f0 track carries no framing");
    FrameWalk w{f0.frame_len, f0.hop, 0};
    w.count = frame_count(clip.samples.size(), w.len, w.hop);
    if (w.count != f0.values.size()) throw ShapeError("hnr: f0 track does not match the clip");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < w.count; ++t) {
        if (!f0.voiced_mask[t] || f0.values[t] <= 0.0) continue;
        const double lag = clip.sample_rate_hz / f0.values[t];
        if (lag + 1.0 >= static_cast<double>(w.len)) continue;
        const auto r = normalized_autocorrelation(raw_frame(clip, w, t), static_cast<std::size_t>(lag) + 1);
        sum += hnr_from_correlation(interpolate_at(r, lag));
        ++n;
    }
    if (n == 0) throw InsufficientVoicingError("hnr: no voiced frame");
    return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------- spectral

namespace {

double db(double ratio_or_power) { return 10.0 * std::log10(ratio_or_power); }

double band_sum(std::span<const double> row, const Spectrogram& s, double lo, double hi) {
    double acc = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
        const double f = s.bin_hz(k);
        if (f >= lo && f < hi) acc += row[k];
    }
    return acc;
}

double band_max(std::span<const double> row, const Spectrogram& s, double lo, double hi) {
    double m = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
        const double f = s.bin_hz(k);
        if (f >= lo && f < hi) m = std::max(m, row[k]);
    }
    return m;
}

double log_ratio(double num, double den) {
    if (num <= 0.0 && den <= 0.0) return 0.0;
    return db((num + kLogFloor) / (den + kLogFloor));
}

}  // namespace

std::vector<LldTrack> spectral_descriptors(const Spectrogram& spec) {
    const std::size_t t_count = spec.num_frames();
    if (t_count == 0 || spec.num_bins() == 0) throw ShapeError("spectral descriptors: empty spectrogram");

    struct Band {
        const char* name;
        double lo, hi;
    };
    static constexpr Band kBands[] = {{"band_0_250_db", 0.0, 250.0},
                                      {"band_250_650_db", 250.0, 650.0},
                                      {"band_650_1000_db", 650.0, 1000.0},
                                      {"band_1000_4000_db", 1000.0, 4000.0}};

    std::vector<LldTrack> tracks;
    auto add = [&](const char* name) -> LldTrack& {
        LldTrack tr;
        tr.name = name;
        tr.values.assign(t_count, 0.0);
        tr.voiced_mask.assign(t_count, true);
        tr.frame_len = spec.frame_len;
        tr.hop = spec.hop;
        tracks.push_back(std::move(tr));
        return tracks.back();
    };
    add("energy_db");
    add("centroid_hz");
    add("slope_db_per_khz");
    add("flux");
    add("alpha_ratio_db");
    add("hammarberg_db");
    for (const auto& b : kBands) add(b.name);
    auto& energy = tracks[0];
    auto& centroid = tracks[1];
    auto& slope = tracks[2];
    auto& flux = tracks[3];
    auto& alpha = tracks[4];
    auto& hammarberg = tracks[5];
    flux.voiced_mask[0] = false;

    // Regression abscissa for the slope: bins up to 5 kHz, in kHz.
    std::vector<std::size_t> slope_bins;
    for (std::size_t k = 0; k < spec.num_bins(); ++k)
        if (spec.bin_hz(k) <= 5000.0) slope_bins.push_back(k);

    std::vector<double> prev_norm, cur_norm(spec.num_bins());
    bool prev_valid = false;
    for (std::size_t t = 0; t < t_count; ++t) {
        const auto row = spec.power.row(t);
        const double total = std::accumulate(row.begin(), row.end(), 0.0);

        for (std::size_t k = 0; k < row.size(); ++k) cur_norm[k] = total > 0.0 ? row[k] / total : 0.0;
        if (prev_valid) {
            double d = 0.0;
            for (std::size_t k = 0; k < row.size(); ++k) d += (cur_norm[k] - prev_norm[k]) * (cur_norm[k] - prev_norm[k]);
            flux.values[t] = std::sqrt(d);
        }
        prev_norm = cur_norm;
        prev_valid = true;

        if (total <= 0.0) continue;  // all-zero frame: every descriptor stays 0

        energy.values[t] = db(total);
        double weighted = 0.0;
        for (std::size_t k = 0; k < row.size(); ++k) weighted += spec.bin_hz(k) * row[k];
        centroid.values[t] = weighted / total;

        if (slope_bins.size() >= 2) {
            double mx = 0.0, my = 0.0;
            for (auto k : slope_bins) {
                mx += spec.bin_hz(k) / 1000.0;
                my += db(row[k] + kLogFloor);
            }
            mx /= static_cast<double>(slope_bins.size());
            my /= static_cast<double>(slope_bins.size());
            double sxy = 0.0, sxx = 0.0;
            for (auto k : slope_bins) {
                const double dx = spec.bin_hz(k) / 1000.0 - mx;
                sxy += dx * (db(row[k] + kLogFloor) - my);
                sxx += dx * dx;
            }
            slope.values[t] = sxx > 0.0 ? sxy / sxx : 0.0;
        }

        alpha.values[t] = log_ratio(band_sum(row, spec, 1000.0, 5000.0), band_sum(row, spec, 50.0, 1000.0));
        hammarberg.values[t] = log_ratio(band_max(row, spec, 0.0, 2000.0), band_max(row, spec, 2000.0, 5000.0));
        for (std::size_t b = 0; b < std::size(kBands); ++b)
            tracks[6 + b].values[t] = db(band_sum(row, spec, kBands[b].lo, kBands[b].hi) + kLogFloor);
    }
    return tracks;
}

// ---------------------------------------------------------------- functionals

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw InsufficientDataError("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

FeatureVector apply_functionals(std::span<const LldTrack> tracks, const VoiceScalars& scalars) {
    if (tracks.empty()) throw InsufficientDataError("apply_functionals: no tracks");
    FeatureVector fv;
    auto push = [&](std::string name, double v, bool ok) {
        const bool finite = std::isfinite(v);
        fv.names.push_back(std::move(name));
        fv.values.push_back(ok && finite ? v : 0.0);
        fv.valid.push_back(ok && finite);
    };
    for (const auto& tr : tracks) {
        if (tr.voiced_mask.size() != tr.values.size())
            throw ShapeError("apply_functionals: track '" + tr.name + "' mask length differs");
        std::vector<double> v;
        for (std::size_t i = 0; i < tr.values.size(); ++i)
            if (tr.voiced_mask[i]) v.push_back(tr.values[i]);
        if (v.empty()) {
            for (const char* f : {"mean", "std", "p20", "p50", "p80"}) push(tr.name + "." + f, 0.0, false);
            continue;
        }
        const double n = static_cast<double>(v.size());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        push(tr.name + ".mean", mean, true);
        push(tr.name + ".std", std::sqrt(var / n), true);
        push(tr.name + ".p20", percentile(v, 0.2), true);
        push(tr.name + ".p50", percentile(v, 0.5), true);
        push(tr.name + ".p80", percentile(v, 0.8), true);
    }
    auto scalar = [&](const char* name, const std::optional<double>& v) {
        push(std::string("voice.") + name, v.value_or(0.0), v.has_value());
    };
    scalar("voiced_fraction", scalars.voiced_fraction);
    scalar("jitter_local", scalars.jitter);
    scalar("shimmer_local", scalars.shimmer);
    scalar("hnr_db", scalars.hnr_db);
    fv.validate();
    return fv;
}

FeatureVector extract_features(const AudioClip& input, const RecordingRef& ref) {
    const AudioClip clip = input.sample_rate_hz == kCanonicalSampleRate
                               ? input
                               : resample_linear(input, kCanonicalSampleRate);
    clip.validate();
    const PitchTrack pitch = pitch_track(clip);

    VoiceScalars scalars;
    const auto voiced = std::count(pitch.f0.voiced_mask.begin(), pitch.f0.voiced_mask.end(), true);
    scalars.voiced_fraction = static_cast<double>(voiced) / static_cast<double>(pitch.f0.values.size());
    try {
        scalars.jitter = jitter_local(pitch.f0);
        scalars.shimmer = shimmer_local(clip, pitch.f0);
    } catch (const InsufficientVoicingError&) {
    }
    try {
        scalars.hnr_db = hnr_db(clip, pitch.f0);
    } catch (const InsufficientVoicingError&) {
    }

    std::vector<LldTrack> tracks;
    tracks.push_back(pitch.f0);
    for (auto& tr : spectral_descriptors(spectrogram(clip))) tracks.push_back(std::move(tr));
    FeatureVector fv = apply_functionals(tracks, scalars);
    fv.ref = ref;
    return fv;
}

// ---------------------------------------------------------------- CSV

std::vector<FeatureVector> ingest_feature_csv(const std::filesystem::path& path) {
    const auto rows = csv::read(path);
    const std::string where = path.string();
    if (rows.empty()) throw SchemaError(where + ": empty feature CSV");
    const auto& header = rows.front();
    static const char* kKeys[] = {"patient_id", "task", "condition"};
    if (header.size() < 3) throw SchemaError(where + ": header needs patient_id,task,condition");
    for (std::size_t i = 0; i < 3; ++i)
        if (csv::lower(csv::trim(header[i])) != kKeys[i])
            throw SchemaError(where + ": header column " + std::to_string(i + 1) + " must be '" + kKeys[i] +
                              "', found '" + header[i] + "'");

    std::vector<std::string> names;
    for (std::size_t i = 3; i < header.size(); ++i) names.push_back(csv::trim(header[i]));
    {
        std::set<std::string_view> seen;
        for (const auto& n : names)
            if (!seen.insert(n).second) throw SchemaError(where + ": duplicate feature column '" + n + "'");
    }

    std::vector<FeatureVector> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string at = where + ": row " + std::to_string(r + 1);
        if (row.size() != header.size())
            throw ParseError(at + " has " + std::to_string(row.size()) + " fields, header has " +
                             std::to_string(header.size()));
        FeatureVector fv;
        fv.names = names;
        fv.ref.patient_id = csv::trim(row[0]);
        if (fv.ref.patient_id.empty()) throw ParseError(at + ": empty patient_id");
        try {
            fv.ref.task = parse_task(row[1]);
            fv.ref.condition = parse_condition(row[2]);
        } catch (const SchemaError& e) {
            throw ParseError(at + ": " + e.what());
        }
        for (std::size_t i = 3; i < row.size(); ++i) {
            const std::string cell = csv::trim(row[i]);
            std::optional<double> v;
            if (!cell.empty()) {
                v = csv::parse_double(cell);
                if (!v) throw ParseError(at + ", column '" + header[i] + "': non-numeric cell '" + cell + "'");
            }
            const bool ok = v && std::isfinite(*v);
            fv.values.push_back(ok ? *v : 0.0);
            fv.valid.push_back(ok);
        }
        out.push_back(std::move(fv));
    }
    return out;
}

std::vector<FeatureVector> ingest_feature_csvs(std::span<const std::filesystem::path> paths) {
    std::vector<FeatureVector> all;
    const std::vector<std::string>* first_names = nullptr;
    std::vector<std::string> reference;
    for (const auto& p : paths) {
        auto part = ingest_feature_csv(p);
        if (!part.empty()) {
            if (!first_names) {
                reference = part.front().names;
                first_names = &reference;
            } else if (part.front().names != reference) {
                throw SchemaError(p.string() + ": feature header differs from " + paths.front().string());
            }
        }
        for (auto& fv : part) all.push_back(std::move(fv));
    }
    return all;
}

void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureVector> vectors) {
    std::string text;
    csv::Row header{"patient_id", "task", "condition"};
    if (!vectors.empty())
        for (const auto& n : vectors.front().names) header.push_back(n);
    text += csv::join(header) + "\n";
    for (const auto& fv : vectors) {
        if (!vectors.empty() && fv.names != vectors.front().names)
            throw SchemaError("write_feature_csv: vectors carry different feature names");
        csv::Row row{fv.ref.patient_id, to_string(fv.ref.task), to_string(fv.ref.condition)};
        for (std::size_t i = 0; i < fv.values.size(); ++i) {
            const bool ok = fv.valid.empty() || fv.valid[i];
            row.push_back(ok ? csv::format_double(fv.values[i]) : "NaN");
        }
        text += csv::join(row) + "\n";
    }
    csv::write_text(path, text);
}

const FeatureVector* find_vector(std::span<const FeatureVector> vectors, const RecordingRef& ref) {
    for (const auto& fv : vectors)
        if (fv.ref == ref) return &fv;
    return nullptr;
}

}  // namespace pairvoice
