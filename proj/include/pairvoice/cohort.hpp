#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pairvoice/features.hpp"
#include "pairvoice/stats.hpp"

namespace pairvoice {

enum class Sex { male, female };
enum class Group { female, male, all };

std::string to_string(Sex s);
std::string to_string(Group g);
Sex parse_sex(std::string_view s);
Group parse_group(std::string_view s);

// ---- Manifest: patient_id,sex,task,condition,source

struct ManifestEntry {
    std::string patient_id;
    Sex sex = Sex::male;
    Task task = Task::pg;
    Condition condition = Condition::wet;
    std::string source;  // wav path or feature CSV path, relative to the manifest directory
};

struct ManifestPatient {
    std::string patient_id;
    Sex sex = Sex::male;
    std::map<Task, std::map<Condition, std::string>> sources;

    bool complete(Task t) const;
};

struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestEntry> entries;
    std::vector<ManifestPatient> patients;  // first-appearance order

    std::size_t pairwise_eligible(Task t) const;
    std::filesystem::path resolve(const std::string& source) const;
};

// DuplicateError for a repeated (patient, task, condition), SchemaError for
// unknown tokens or inconsistent sex. Tokens are case-insensitive.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

// ---- Cohort with feature vectors attached

struct TaskRecordings {
    std::optional<FeatureVector> wet;  // A^i
    std::optional<FeatureVector> dry;  // B^i

    bool complete() const { return wet.has_value() && dry.has_value(); }
};

struct PatientRecord {
    std::string patient_id;
    Sex sex = Sex::male;
    std::map<Task, TaskRecordings> tasks;

    const TaskRecordings* task(Task t) const;
};

struct Cohort {
    std::vector<PatientRecord> patients;

    const PatientRecord* find(const std::string& id) const;
    std::vector<std::string> feature_names() const;
    // Throws SchemaError unless every vector carries the same names.
    void check_consistent_names() const;
};

// Attach vectors (looked up by patient, task, condition) to the manifest layout.
// Manifest entries without a vector are reported as missing via SchemaError.
Cohort assemble_cohort(const Manifest& manifest, std::span<const FeatureVector> vectors);
// Resolves every CSV source referenced by the manifest and assembles the cohort.
Cohort load_cohort(const std::filesystem::path& manifest_path);

Cohort filter_group(const Cohort& cohort, Group group);
// Patients with at least one recording for the task.
Cohort restrict_to_task(const Cohort& cohort, Task task);

// ---- Splits

struct SplitPlan {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::uint64_t seed = 0;
    double test_ratio = 0.3;

    bool is_train(const std::string& id) const;
    bool is_test(const std::string& id) const;
    // InsufficientDataError if the sides overlap or a side is empty.
    void check_disjoint() const;
    std::string to_json() const;
    static SplitPlan from_json(std::string_view text);
};

SplitPlan split_by_patient(const Cohort& cohort, double test_ratio, std::uint64_t seed);

// ---- Datasets

struct LabeledVector {
    std::vector<double> x;
    int label = 0;
    std::string patient_id;
};

struct PatientwiseData {
    std::vector<LabeledVector> train;
    std::vector<LabeledVector> test;
    std::vector<std::string> feature_names;
    std::vector<double> mean;  // training statistics used for z-scoring
    std::vector<double> stddev;
};

// Each recording becomes a point; wet = 1, dry = 0. Columns are z-scored
// with training statistics only.
PatientwiseData build_patientwise(const Cohort& cohort, const SplitPlan& split, const SelectionMask& selection,
                                  Task task);

struct PairSample {
    std::vector<double> x;
    int label = 0;
    std::string patient_id;
};

struct PairwiseData {
    std::vector<PairSample> train;
    std::vector<PairSample> test;
    std::vector<std::string> feature_names;
};

// x = A - B for label 1, B - A for label 0, from raw selected features.
PairSample make_pair_sample(std::span<const double> wet, std::span<const double> dry, int label,
                            std::string patient_id = {});

// One sample per complete patient; labels drawn from {0,1} with `seed`, in
// cohort order, independent of the split.
PairwiseData build_pairwise(const Cohort& cohort, const SplitPlan& split, const SelectionMask& selection, Task task,
                            std::uint64_t seed);

std::vector<double> select_columns(std::span<const double> values, const std::vector<std::size_t>& idx);

// Wet and dry vectors of the given patients for a task, for feature selection.
// With `complete_only` only patients holding both conditions contribute.
struct ConditionSets {
    std::vector<FeatureVector> wet;
    std::vector<FeatureVector> dry;
};
ConditionSets condition_sets(const Cohort& cohort, Task task, const std::vector<std::string>* only_ids,
                             bool complete_only);

}  // namespace pairvoice
