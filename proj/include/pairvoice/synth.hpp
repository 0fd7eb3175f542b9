#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pairvoice/audio.hpp"
#include "pairvoice/cohort.hpp"

namespace pairvoice::synth {

enum class Mode { feature, signal };
std::string to_string(Mode m);
Mode parse_mode(std::string_view s);

struct SynthConfig {
    Mode mode = Mode::feature;
    std::size_t n_patients = 60;
    double female_ratio = 0.5;
    double effect_scale = 1.0;    // delta
    double confound_scale = 3.0;  // sigma_s
    double noise_scale = 0.3;     // sigma_n
    double band_low_hz = 700.0;
    double band_high_hz = 900.0;
    std::uint64_t seed = 0;
    std::vector<Task> tasks{Task::pg};

    // feature mode
    std::size_t n_features = 60;
    double effect_fraction = 0.2;

    // signal mode
    int sample_rate_hz = 22050;
    double duration_s = 2.0;

    // ConfigError on negative scales, fewer than 2 patients, or a band that
    // is empty or reaches Nyquist.
    void validate() const;
    std::string to_json() const;
    static SynthConfig from_json(std::string_view text);
};

struct GroundTruth {
    std::vector<std::string> patient_ids;
    std::vector<Sex> sexes;
    // feature mode: one offset per feature; signal mode: {f0_hz, formant_scale, gain}
    std::vector<std::vector<double>> speaker_offsets;
    std::vector<std::string> feature_names;  // feature mode only
    std::vector<double> effect;              // feature mode only, per feature
    double band_low_hz = 0.0;
    double band_high_hz = 0.0;

    std::string to_json() const;
};

struct FeatureCohort {
    Cohort cohort;
    std::vector<ManifestEntry> manifest;
    std::vector<FeatureVector> vectors;  // manifest order
    GroundTruth truth;
};

// b = base_task + speaker + noise (dry), a = b + effect + noise (wet).
FeatureCohort gen_feature_cohort(const SynthConfig& cfg);

struct SignalRecording {
    ManifestEntry entry;
    AudioClip clip;
};

struct SignalCohort {
    std::vector<SignalRecording> recordings;
    GroundTruth truth;
};

// Harmonic source with speaker F0 and formant resonances; the wet clip adds
// tones inside the planted band scaled by delta; white noise sigma_n relative
// to the source RMS.
SignalCohort gen_signal_cohort(const SynthConfig& cfg);

// Writes manifest.csv, ground_truth.json, synth_config.json plus data
// (features.csv or wav/). RefusalError if `dir` is non-empty and !force.
void write_feature_cohort(const std::filesystem::path& dir, const FeatureCohort& c, const SynthConfig& cfg, bool force);
void write_signal_cohort(const std::filesystem::path& dir, const SignalCohort& c, const SynthConfig& cfg, bool force);
void prepare_output_dir(const std::filesystem::path& dir, bool force);

}  // namespace pairvoice::synth
