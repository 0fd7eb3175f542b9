#include "pairvoice/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "pairvoice/csv.hpp"

namespace pairvoice::synth {

using nlohmann::json;

std::string to_string(Mode m) { return m == Mode::feature ? "feature" : "signal"; }

Mode parse_mode(std::string_view s) {
    const std::string v = csv::lower(csv::trim(s));
    if (v == "feature") return Mode::feature;
    if (v == "signal") return Mode::signal;
    throw ConfigError("unknown synth mode '" + std::string(s) + "'");
}

void SynthConfig::validate() const {
    if (n_patients < 2) throw ConfigError("synth: n_patients must be >= 2");
    if (!(effect_scale >= 0.0) || !(confound_scale >= 0.0) || !(noise_scale >= 0.0))
        throw ConfigError("synth: scales must be >= 0");
    if (!(female_ratio >= 0.0 && female_ratio <= 1.0)) throw ConfigError("synth: female_ratio must lie in [0, 1]");
    if (tasks.empty()) throw ConfigError("synth: at least one task is required");
    if (!(band_low_hz >= 0.0 && band_high_hz > band_low_hz))
        throw ConfigError("synth: planted band must satisfy 0 <= low < high");
    if (sample_rate_hz <= 0) throw ConfigError("synth: sample_rate_hz must be positive");
    if (band_high_hz >= sample_rate_hz / 2.0)
        throw ConfigError("synth: planted band (" + csv::format_double(band_low_hz) + ", " +
                          csv::format_double(band_high_hz) + ") reaches Nyquist at " +
                          csv::format_double(sample_rate_hz / 2.0) + " Hz");
    if (mode == Mode::feature) {
        if (n_features == 0) throw ConfigError("synth: n_features must be positive");
        if (!(effect_fraction >= 0.0 && effect_fraction <= 1.0))
            throw ConfigError("synth: effect_fraction must lie in [0, 1]");
    } else if (!(duration_s > 0.1)) {
        throw ConfigError("synth: duration_s must exceed 0.1 s");
    }
}

std::string SynthConfig::to_json() const {
    json j;
    j["mode"] = to_string(mode);
    j["n_patients"] = n_patients;
    j["female_ratio"] = female_ratio;
    j["effect_scale"] = effect_scale;
    j["confound_scale"] = confound_scale;
    j["noise_scale"] = noise_scale;
    j["planted_band_hz"] = {band_low_hz, band_high_hz};
    j["seed"] = seed;
    std::vector<std::string> t;
    for (auto task : tasks) t.push_back(pairvoice::to_string(task));
    j["tasks"] = t;
    j["n_features"] = n_features;
    j["effect_fraction"] = effect_fraction;
    j["sample_rate_hz"] = sample_rate_hz;
    j["duration_s"] = duration_s;
    return j.dump(2);
}

SynthConfig SynthConfig::from_json(std::string_view text) {
    SynthConfig c;
    try {
        const json j = json::parse(text);
        if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
        c.n_patients = j.value("n_patients", c.n_patients);
        c.female_ratio = j.value("female_ratio", c.female_ratio);
        c.effect_scale = j.value("effect_scale", c.effect_scale);
        c.confound_scale = j.value("confound_scale", c.confound_scale);
        c.noise_scale = j.value("noise_scale", c.noise_scale);
        if (j.contains("planted_band_hz")) {
            const auto band = j["planted_band_hz"].get<std::vector<double>>();
            if (band.size() != 2) throw ConfigError("synth: planted_band_hz needs two values");
            c.band_low_hz = band[0];
            c.band_high_hz = band[1];
        }
        c.seed = j.value("seed", c.seed);
        if (j.contains("tasks")) {
            c.tasks.clear();
            for (const auto& t : j["tasks"]) c.tasks.push_back(parse_task(t.get<std::string>()));
        }
        c.n_features = j.value("n_features", c.n_features);
        c.effect_fraction = j.value("effect_fraction", c.effect_fraction);
        c.sample_rate_hz = j.value("sample_rate_hz", c.sample_rate_hz);
        c.duration_s = j.value("duration_s", c.duration_s);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
    return c;
}

std::string GroundTruth::to_json() const {
    json j;
    j["planted_band_hz"] = {band_low_hz, band_high_hz};
    j["feature_names"] = feature_names;
    j["effect"] = effect;
    json patients = json::array();
    for (std::size_t i = 0; i < patient_ids.size(); ++i)
        patients.push_back({{"patient_id", patient_ids[i]},
                            {"sex", pairvoice::to_string(sexes[i])},
                            {"speaker_offset", speaker_offsets[i]}});
    j["patients"] = patients;
    return j.dump(1);
}

namespace {

enum Stream : std::uint32_t { kSex = 1, kEffect, kBase, kSpeaker, kNoise, kSignal };

// Independent generator per (seed, stream, index) so each patient can be
// produced on its own.
std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream, std::uint32_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), index};
    return std::mt19937_64(seq);
}

std::string patient_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "P%03zu", i + 1);
    return buf;
}

std::vector<Sex> draw_sexes(const SynthConfig& cfg) {
    const auto n_female =
        static_cast<std::size_t>(std::llround(cfg.female_ratio * static_cast<double>(cfg.n_patients)));
    std::vector<Sex> sexes(cfg.n_patients, Sex::male);
    for (std::size_t i = 0; i < n_female; ++i) sexes[i] = Sex::female;
    auto rng = stream_rng(cfg.seed, kSex);
    for (std::size_t i = sexes.size(); i > 1; --i) std::swap(sexes[i - 1], sexes[rng() % i]);
    return sexes;
}

GroundTruth base_truth(const SynthConfig& cfg) {
    GroundTruth t;
    t.sexes = draw_sexes(cfg);
    for (std::size_t i = 0; i < cfg.n_patients; ++i) t.patient_ids.push_back(patient_name(i));
    t.band_low_hz = cfg.band_low_hz;
    t.band_high_hz = cfg.band_high_hz;
    return t;
}

}  // namespace

FeatureCohort gen_feature_cohort(const SynthConfig& cfg) {
    cfg.validate();
    if (cfg.mode != Mode::feature) throw ConfigError("gen_feature_cohort: mode must be 'feature'");
    const std::size_t n_feat = cfg.n_features;
    FeatureCohort out;
    GroundTruth& truth = out.truth;
    truth = base_truth(cfg);

    for (std::size_t f = 0; f < n_feat; ++f) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "synth.f%02zu", f);
        truth.feature_names.emplace_back(buf);
    }

    // Effect: delta with a random sign on a random subset of features.
    truth.effect.assign(n_feat, 0.0);
    {
        auto rng = stream_rng(cfg.seed, kEffect);
        std::vector<std::size_t> idx(n_feat);
        for (std::size_t f = 0; f < n_feat; ++f) idx[f] = f;
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
        const auto n_eff = static_cast<std::size_t>(std::llround(cfg.effect_fraction * static_cast<double>(n_feat)));
        for (std::size_t k = 0; k < n_eff; ++k) truth.effect[idx[k]] = (rng() >> 63) ? cfg.effect_scale : -cfg.effect_scale;
    }

    std::map<Task, std::vector<double>> base;
    for (std::size_t ti = 0; ti < cfg.tasks.size(); ++ti) {
        auto rng = stream_rng(cfg.seed, kBase, static_cast<std::uint32_t>(cfg.tasks[ti]));
        std::normal_distribution<double> nd(0.0, 1.0);
        auto& b = base[cfg.tasks[ti]];
        for (std::size_t f = 0; f < n_feat; ++f) b.push_back(nd(rng));
    }

    for (std::size_t i = 0; i < cfg.n_patients; ++i) {
        const auto pid = static_cast<std::uint32_t>(i);
        auto srng = stream_rng(cfg.seed, kSpeaker, pid);
        std::normal_distribution<double> speaker_nd(0.0, 1.0);
        std::vector<double> speaker(n_feat);
        for (auto& s : speaker) s = cfg.confound_scale * speaker_nd(srng);
        truth.speaker_offsets.push_back(speaker);

        auto nrng = stream_rng(cfg.seed, kNoise, pid);
        std::normal_distribution<double> noise(0.0, 1.0);
        PatientRecord rec;
        rec.patient_id = truth.patient_ids[i];
        rec.sex = truth.sexes[i];
        for (Task task : cfg.tasks) {
            const auto& bt = base.at(task);
            FeatureVector dry, wet;
            dry.names = wet.names = truth.feature_names;
            dry.values.resize(n_feat);
            wet.values.resize(n_feat);
            for (std::size_t f = 0; f < n_feat; ++f) {
                dry.values[f] = bt[f] + speaker[f] + cfg.noise_scale * noise(nrng);
                wet.values[f] = dry.values[f] + truth.effect[f] + cfg.noise_scale * noise(nrng);
            }
            dry.valid.assign(n_feat, true);
            wet.valid.assign(n_feat, true);
            dry.ref = {rec.patient_id, task, Condition::dry};
            wet.ref = {rec.patient_id, task, Condition::wet};
            for (const FeatureVector* fv : {&wet, &dry}) {
                out.manifest.push_back({rec.patient_id, rec.sex, task, fv->ref.condition, "features.csv"});
                out.vectors.push_back(*fv);
            }
            rec.tasks[task] = TaskRecordings{std::move(wet), std::move(dry)};
        }
        out.cohort.patients.push_back(std::move(rec));
    }
    return out;
}

namespace {

struct Formants {
    double f[3];
};

// Rough vowel-like resonances per task.
Formants task_formants(Task t) {
    switch (t) {
        case Task::pg: return {{730.0, 1090.0, 2440.0}};
        case Task::mm: return {{300.0, 870.0, 2240.0}};
        case Task::mlh: return {{500.0, 1500.0, 2500.0}};
        case Task::c: return {{400.0, 2000.0, 2600.0}};
    }
    return {{500.0, 1500.0, 2500.0}};
}

double envelope(double f, const Formants& fm, double scale) {
    constexpr double bw[3] = {90.0, 110.0, 160.0};
    constexpr double gain[3] = {1.0, 0.6, 0.3};
    double e = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = (f - fm.f[k] * scale) / bw[k];
        e += gain[k] / (1.0 + d * d);
    }
    return e + 0.02;
}

double rms(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace

SignalCohort gen_signal_cohort(const SynthConfig& cfg) {
    cfg.validate();
    if (cfg.mode != Mode::signal) throw ConfigError("gen_signal_cohort: mode must be 'signal'");
    SignalCohort out;
    out.truth = base_truth(cfg);
    const int sr = cfg.sample_rate_hz;
    const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * sr));
    const double two_pi = 2.0 * std::numbers::pi;
    const double nyq = sr / 2.0;

    for (std::size_t i = 0; i < cfg.n_patients; ++i) {
        const auto pid = static_cast<std::uint32_t>(i);
        const Sex sex = out.truth.sexes[i];
        auto srng = stream_rng(cfg.seed, kSpeaker, pid);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const double f0 = sex == Sex::male ? 90.0 + 70.0 * u01(srng) : 150.0 + 80.0 * u01(srng);
        // Formant scale spread grows with the confound scale (sigma_s = 0 gives one vocal tract).
        const double fscale = std::exp(0.05 * cfg.confound_scale / 3.0 * (2.0 * u01(srng) - 1.0)) *
                              (sex == Sex::female ? 1.12 : 1.0);
        const double gain = 0.2 * std::exp(0.3 * cfg.confound_scale / 3.0 * (2.0 * u01(srng) - 1.0));
        out.truth.speaker_offsets.push_back({f0, fscale, gain});

        auto nrng = stream_rng(cfg.seed, kNoise, pid);
        std::normal_distribution<double> nd(0.0, 1.0);
        auto prng = stream_rng(cfg.seed, kSignal, pid);

        for (Task task : cfg.tasks) {
            const Formants fm = task_formants(task);
            // Source shared by wet and dry apart from its own vibrato phase.
            for (Condition cond : {Condition::wet, Condition::dry}) {
                std::vector<double> x(n, 0.0);
                const double vib_phase = two_pi * u01(prng);
                const double vib_rate = 4.0 + 2.0 * u01(prng);
                std::vector<double> phase(n);
                double ph = 0.0;
                for (std::size_t s = 0; s < n; ++s) {
                    const double t = static_cast<double>(s) / sr;
                    const double f = f0 * (1.0 + 0.01 * std::sin(two_pi * vib_rate * t + vib_phase));
                    phase[s] = ph;
                    ph += two_pi * f / sr;
                }
                for (int h = 1; h * f0 * 1.02 < std::min(5000.0, nyq); ++h) {
                    const double amp = envelope(h * f0, fm, fscale) / std::sqrt(static_cast<double>(h));
                    for (std::size_t s = 0; s < n; ++s) x[s] += amp * std::sin(h * phase[s]);
                }
                const double src_rms = rms(x);
                const double scale = gain / (src_rms > 0.0 ? src_rms : 1.0);
                for (auto& v : x) v *= scale;
                if (cond == Condition::wet && cfg.effect_scale > 0.0) {
                    // Band-limited noise: many random-frequency components inside the planted band.
                    constexpr int kComponents = 40;
                    const double band_amp = cfg.effect_scale * 0.5 * gain * std::sqrt(2.0 / kComponents);
                    for (int k = 0; k < kComponents; ++k) {
                        const double f = cfg.band_low_hz + (cfg.band_high_hz - cfg.band_low_hz) * u01(prng);
                        const double p0 = two_pi * u01(prng);
                        const double w = two_pi * f / sr;
                        for (std::size_t s = 0; s < n; ++s) x[s] += band_amp * std::sin(w * static_cast<double>(s) + p0);
                    }
                }
                const double noise_sd = cfg.noise_scale * 0.1 * gain;
                for (auto& v : x) v = std::clamp(v + noise_sd * nd(nrng), -1.0, 1.0);

                SignalRecording r;
                r.entry = {out.truth.patient_ids[i], sex, task, cond,
                           "wav/" + out.truth.patient_ids[i] + "_" + pairvoice::to_string(task) + "_" +
                               pairvoice::to_string(cond) + ".wav"};
                r.clip = AudioClip{std::move(x), sr};
                out.recordings.push_back(std::move(r));
            }
        }
    }
    return out;
}

void prepare_output_dir(const std::filesystem::path& dir, bool force) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !force)
        throw RefusalError("output directory '" + dir.string() + "' is not empty; pass --force to overwrite");
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

void write_feature_cohort(const std::filesystem::path& dir, const FeatureCohort& c, const SynthConfig& cfg,
                          bool force) {
    prepare_output_dir(dir, force);
    write_feature_csv(dir / "features.csv", c.vectors);
    write_manifest(dir / "manifest.csv", c.manifest);
    csv::write_text(dir / "ground_truth.json", c.truth.to_json() + "\n");
    csv::write_text(dir / "synth_config.json", cfg.to_json() + "\n");
}

void write_signal_cohort(const std::filesystem::path& dir, const SignalCohort& c, const SynthConfig& cfg, bool force) {
    prepare_output_dir(dir, force);
    std::filesystem::create_directories(dir / "wav");
    std::vector<ManifestEntry> entries;
    for (const auto& r : c.recordings) {
        write_wav(dir / r.entry.source, r.clip);
        entries.push_back(r.entry);
    }
    write_manifest(dir / "manifest.csv", entries);
    csv::write_text(dir / "ground_truth.json", c.truth.to_json() + "\n");
    csv::write_text(dir / "synth_config.json", cfg.to_json() + "\n");
}

}  // namespace pairvoice::synth
