#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pairvoice/cohort.hpp"
#include "pairvoice/nn/aff.hpp"
#include "pairvoice/nn/aff_model.hpp"
#include "pairvoice/nn/metrics.hpp"

namespace pairvoice::experiment {

enum class Scheme { patientwise, pairwise };
std::string to_string(Scheme s);
Scheme parse_scheme(std::string_view s);

struct NetConfig {
    std::size_t hidden1 = 128;
    std::size_t hidden2 = 32;
    double lr = 1e-3;
    int epochs = 100;
    std::size_t batch = 16;
};

struct AffConfig {
    std::size_t d_new = 26;
    int trim_halfwidth_bins = 12;
    int trim_period_epochs = 5;
    std::string encoder = "mean_pool";
    std::size_t ff_dim = 32;
    double encoder_init_scale = 0.1;
    double lr = 1e-2;
    double aff_decay = 0.03;
    int epochs = 30;
    std::size_t batch = 8;
    double frame_ms = 25.0;
    double hop_ms = 10.0;
    int n_fft = 1024;
    double mel_low_hz = 0.0;
    double mel_high_hz = 0.0;  // 0 means Nyquist
    // Divide power by (sum of window)^2 so a unit sinusoid peaks at 0.25.
    bool calibrated_power = true;
};

struct ExperimentConfig {
    std::string manifest;
    std::vector<Task> tasks{Task::pg, Task::mm, Task::mlh, Task::c};
    std::vector<Group> groups{Group::female, Group::male, Group::all};
    std::vector<Scheme> schemes{Scheme::patientwise, Scheme::pairwise};
    std::vector<TestKind> kinds{TestKind::paired, TestKind::independent};
    double alpha = 0.05;
    double test_ratio = 0.3;
    std::vector<std::uint64_t> seeds{0};
    NetConfig net;
    AffConfig aff;
    std::string out_dir = "out";

    // ConfigError when a grid axis is empty or a value is out of range.
    void validate() const;
    std::string to_json() const;
    // Missing keys keep their defaults.
    static ExperimentConfig from_json(std::string_view text);
};

struct CellResult {
    Task task = Task::pg;
    Group group = Group::all;
    Scheme scheme = Scheme::patientwise;
    TestKind kind = TestKind::paired;
    std::uint64_t seed = 0;

    bool ok = false;
    std::string error_kind;
    std::string error;

    nn::Metrics metrics;
    std::vector<std::string> selected;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    SplitPlan split;
    std::vector<double> loss_curve;

    std::string label() const;
};

// selection (training patients only) -> split -> build -> train -> evaluate.
// Errors are caught and recorded on the cell.
CellResult run_cell(const Cohort& cohort, Task task, Group group, Scheme scheme, TestKind kind, std::uint64_t seed,
                    const ExperimentConfig& cfg);

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<CellResult> cells;

    std::size_t failed() const;
    // Mean F1 over successful cells, optionally restricted to one scheme / kind.
    std::optional<double> mean_f1(std::optional<Scheme> scheme = {}, std::optional<TestKind> kind = {}) const;

    std::string to_json() const;
    // One row per cell plus per-scheme average rows; F1 as a percentage.
    std::string to_csv() const;
    // Rows (scheme, t_test, sex), one column per task plus the average.
    std::string table_csv() const;
    // Inverse of to_json for the fields the renderings use.
    static ExperimentReport from_json(std::string_view text);
};

ExperimentReport run_experiment(const Cohort& cohort, const ExperimentConfig& cfg);

// Selection counts over the whole cohort for every task / group / kind.
SelectionReport selection_report(const Cohort& cohort, const std::vector<Task>& tasks,
                                 const std::vector<Group>& groups, const std::vector<TestKind>& kinds, double alpha,
                                 const std::string& feature_set = "all");

// ---- AFF path

struct AffRecording {
    std::string patient_id;
    Sex sex = Sex::male;
    Task task = Task::pg;
    Condition condition = Condition::wet;
    Spectrogram spec;
};

// Resampled to the canonical rate when needed.
Spectrogram aff_spectrogram(const AudioClip& clip, const AffConfig& cfg);
std::vector<AffRecording> load_aff_recordings(const std::filesystem::path& manifest_path, const AffConfig& cfg,
                                              std::vector<std::string>* failures = nullptr);

struct AffTaskResult {
    Task task = Task::pg;
    bool ok = false;
    std::string error_kind;
    std::string error;
    nn::Metrics metrics;
    std::vector<double> curve;
    std::vector<double> loss_curve;
    std::size_t empty_columns = 0;
    std::optional<nn::AffModel> model;
    SplitPlan split;
};

AffTaskResult run_aff_task(std::span<const AffRecording> recordings, Task task, std::uint64_t seed,
                           double test_ratio, const AffConfig& cfg);

struct AffReport {
    ExperimentConfig config;
    std::vector<AffTaskResult> tasks;
    double bin_hz = 0.0;
    nn::ImportanceAggregate aggregate;

    std::size_t failed() const;
    std::size_t peak_bin() const;
    std::string to_json() const;
    // Header bin_hz, one column per successful task, mean, std; one row per bin.
    std::string curve_csv() const;
    std::string svg() const;
};

AffReport run_aff(std::span<const AffRecording> recordings, const ExperimentConfig& cfg);

}  // namespace pairvoice::experiment
