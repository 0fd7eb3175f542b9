#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pairvoice/audio.hpp"

namespace pairvoice {

enum class Task { pg, mm, mlh, c };
enum class Condition { wet, dry };

std::string to_string(Task t);
std::string to_string(Condition c);
// Case-insensitive; SchemaError on unknown tokens.
Task parse_task(std::string_view s);
Condition parse_condition(std::string_view s);

struct RecordingRef {
    std::string patient_id;
    Task task = Task::pg;
    Condition condition = Condition::wet;

    friend bool operator==(const RecordingRef&, const RecordingRef&) = default;
};

// Named per-recording feature vector. `valid[i]` is false where the value was
// missing or non-finite and has been replaced by 0.
struct FeatureVector {
    std::vector<double> values;
    std::vector<std::string> names;
    std::vector<bool> valid;
    RecordingRef ref;

    std::size_t size() const noexcept { return values.size(); }
    // Throws SchemaError on length mismatch, duplicate names or non-finite values.
    void validate() const;
};

struct LldTrack {
    std::string name;
    std::vector<double> values;
    std::vector<bool> voiced_mask;  // also used as the "valid frame" mask for functionals
    int frame_len = 0;
    int hop = 0;
};

struct PitchConfig {
    double f_min = 60.0;
    double f_max = 400.0;
    double frame_ms = 25.0;
    double hop_ms = 10.0;
    double voicing_threshold = 0.45;
    double rms_threshold = 0.01;
};

// Per-frame pitch. Also reports, per frame, the normalized autocorrelation at
// the chosen lag (0 for unvoiced frames) in `peak_correlation`.
struct PitchTrack {
    LldTrack f0;
    std::vector<double> peak_correlation;
};

PitchTrack pitch_track(const AudioClip& clip, const PitchConfig& cfg = {});
LldTrack f0_autocorrelation(const AudioClip& clip, double f_min = 60.0, double f_max = 400.0);

double jitter_local(const LldTrack& f0);
// Local perturbation of a per-frame measure over consecutive valid frames:
// mean |v_k - v_{k-1}| / mean v. Shared by jitter (periods) and shimmer (amplitudes).
double local_perturbation(std::span<const double> values, const std::vector<bool>& mask);
double shimmer_local(const AudioClip& clip, const LldTrack& f0);
double hnr_db(const AudioClip& clip, const LldTrack& f0);
// 10 log10(r / (1 - r)) with r clamped into (0, 1).
double hnr_from_correlation(double r);

std::vector<LldTrack> spectral_descriptors(const Spectrogram& spec);

struct VoiceScalars {
    std::optional<double> voiced_fraction;
    std::optional<double> jitter;
    std::optional<double> shimmer;
    std::optional<double> hnr_db;
};

inline constexpr std::size_t kFunctionalsPerTrack = 5;

// mean, std (population), p20, p50, p80 per track over valid frames, then the
// four voice scalars. Names are "<lld>.<functional>".
FeatureVector apply_functionals(std::span<const LldTrack> tracks, const VoiceScalars& scalars = {});

// Linear interpolation between order statistics, q in [0, 1].
double percentile(std::vector<double> values, double q);

// Full extraction: resample to 22050 Hz, frame, pitch, voice quality, spectral
// descriptors, functionals.
FeatureVector extract_features(const AudioClip& clip, const RecordingRef& ref = {});

// ---- Feature CSV: patient_id,task,condition,<feature...>

std::vector<FeatureVector> ingest_feature_csv(const std::filesystem::path& path);
// All files must carry the same header, SchemaError otherwise.
std::vector<FeatureVector> ingest_feature_csvs(std::span<const std::filesystem::path> paths);
void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureVector> vectors);

// Index of a vector by (patient, task, condition), nullptr when absent.
const FeatureVector* find_vector(std::span<const FeatureVector> vectors, const RecordingRef& ref);

}  // namespace pairvoice
