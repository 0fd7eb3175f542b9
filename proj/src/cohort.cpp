#include "pairvoice/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "pairvoice/csv.hpp"

namespace pairvoice {

std::string to_string(Sex s) { return s == Sex::male ? "male" : "female"; }

std::string to_string(Group g) {
    switch (g) {
        case Group::female: return "female";
        case Group::male: return "male";
        case Group::all: return "all";
    }
    return "?";
}

Sex parse_sex(std::string_view s) {
    const std::string t = csv::lower(csv::trim(s));
    if (t == "male" || t == "m") return Sex::male;
    if (t == "female" || t == "f") return Sex::female;
    throw SchemaError("unknown sex token '" + std::string(s) + "'");
}

Group parse_group(std::string_view s) {
    const std::string t = csv::lower(csv::trim(s));
    if (t == "female" || t == "f") return Group::female;
    if (t == "male" || t == "m") return Group::male;
    if (t == "all" || t == "combined") return Group::all;
    throw ConfigError("unknown group '" + std::string(s) + "' (expected female, male or all)");
}

// ---------------------------------------------------------------- manifest

bool ManifestPatient::complete(Task t) const {
    auto it = sources.find(t);
    return it != sources.end() && it->second.size() == 2;
}

std::size_t Manifest::pairwise_eligible(Task t) const {
    return static_cast<std::size_t>(
        std::count_if(patients.begin(), patients.end(), [&](const ManifestPatient& p) { return p.complete(t); }));
}

std::filesystem::path Manifest::resolve(const std::string& source) const {
    std::filesystem::path p(source);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw SchemaError("manifest: empty");
    static const char* kCols[] = {"patient_id", "sex", "task", "condition", "source"};
    const auto& header = rows.front();
    if (header.size() != 5) throw SchemaError("manifest: header must be patient_id,sex,task,condition,source");
    for (std::size_t i = 0; i < 5; ++i)
        if (csv::lower(csv::trim(header[i])) != kCols[i])
            throw SchemaError(std::string("manifest: column ") + std::to_string(i + 1) + " must be '" + kCols[i] + "'");

    Manifest m;
    m.base_dir = base_dir;
    std::set<std::tuple<std::string, Task, Condition>> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string at = "manifest row " + std::to_string(r + 1);
        if (row.size() != 5) throw ParseError(at + ": expected 5 fields, found " + std::to_string(row.size()));
        ManifestEntry e;
        e.patient_id = csv::trim(row[0]);
        if (e.patient_id.empty()) throw ParseError(at + ": empty patient_id");
        try {
            e.sex = parse_sex(row[1]);
            e.task = parse_task(row[2]);
            e.condition = parse_condition(row[3]);
        } catch (const SchemaError& err) {
            throw SchemaError(at + ": " + err.what());
        }
        e.source = csv::trim(row[4]);
        if (!seen.insert({e.patient_id, e.task, e.condition}).second)
            throw DuplicateError(at + ": duplicate (" + e.patient_id + ", " + to_string(e.task) + ", " +
                                 to_string(e.condition) + ")");

        auto it = std::find_if(m.patients.begin(), m.patients.end(),
                               [&](const ManifestPatient& p) { return p.patient_id == e.patient_id; });
        if (it == m.patients.end()) {
            m.patients.push_back(ManifestPatient{e.patient_id, e.sex, {}});
            it = std::prev(m.patients.end());
        } else if (it->sex != e.sex) {
            throw SchemaError(at + ": patient '" + e.patient_id + "' listed with two different sexes");
        }
        it->sources[e.task][e.condition] = e.source;
        m.entries.push_back(std::move(e));
    }
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_manifest(text, path.parent_path());
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    std::string text = "patient_id,sex,task,condition,source\n";
    for (const auto& e : entries)
        text += csv::join({e.patient_id, to_string(e.sex), to_string(e.task), to_string(e.condition), e.source}) + "\n";
    csv::write_text(path, text);
}

// ---------------------------------------------------------------- cohort

const TaskRecordings* PatientRecord::task(Task t) const {
    auto it = tasks.find(t);
    return it == tasks.end() ? nullptr : &it->second;
}

const PatientRecord* Cohort::find(const std::string& id) const {
    for (const auto& p : patients)
        if (p.patient_id == id) return &p;
    return nullptr;
}

std::vector<std::string> Cohort::feature_names() const {
    for (const auto& p : patients)
        for (const auto& [t, rec] : p.tasks) {
            if (rec.wet) return rec.wet->names;
            if (rec.dry) return rec.dry->names;
        }
    return {};
}

void Cohort::check_consistent_names() const {
    const auto ref = feature_names();
    for (const auto& p : patients)
        for (const auto& [t, rec] : p.tasks)
            for (const auto* fv : {rec.wet ? &*rec.wet : nullptr, rec.dry ? &*rec.dry : nullptr})
                if (fv && fv->names != ref)
                    throw SchemaError("cohort: patient '" + p.patient_id + "' task " + to_string(t) +
                                      " carries a different feature name set");
}

Cohort assemble_cohort(const Manifest& manifest, std::span<const FeatureVector> vectors) {
    std::map<std::tuple<std::string, Task, Condition>, const FeatureVector*> index;
    for (const auto& fv : vectors) index[{fv.ref.patient_id, fv.ref.task, fv.ref.condition}] = &fv;

    Cohort cohort;
    for (const auto& mp : manifest.patients) {
        PatientRecord rec;
        rec.patient_id = mp.patient_id;
        rec.sex = mp.sex;
        for (const auto& [task, conds] : mp.sources) {
            for (const auto& [cond, src] : conds) {
                auto it = index.find({mp.patient_id, task, cond});
                if (it == index.end())
                    throw SchemaError("no feature vector for (" + mp.patient_id + ", " + to_string(task) + ", " +
                                      to_string(cond) + ") referenced by " + src);
                auto& slot = cond == Condition::wet ? rec.tasks[task].wet : rec.tasks[task].dry;
                slot = *it->second;
            }
        }
        cohort.patients.push_back(std::move(rec));
    }
    cohort.check_consistent_names();
    return cohort;
}

Cohort load_cohort(const std::filesystem::path& manifest_path) {
    const Manifest manifest = load_manifest(manifest_path);
    std::vector<std::filesystem::path> csvs;
    std::vector<FeatureVector> vectors;
    for (const auto& e : manifest.entries) {
        const auto path = manifest.resolve(e.source);
        const std::string ext = csv::lower(path.extension().string());
        if (ext == ".csv") {
            if (std::find(csvs.begin(), csvs.end(), path) == csvs.end()) csvs.push_back(path);
        } else if (ext == ".wav") {
            vectors.push_back(extract_features(load_wav(path), RecordingRef{e.patient_id, e.task, e.condition}));
        } else {
            throw SchemaError("manifest source '" + e.source + "' is neither .wav nor .csv");
        }
    }
    for (auto& fv : ingest_feature_csvs(csvs)) vectors.push_back(std::move(fv));
    return assemble_cohort(manifest, vectors);
}

Cohort filter_group(const Cohort& cohort, Group group) {
    if (group == Group::all) return cohort;
    const Sex want = group == Group::male ? Sex::male : Sex::female;
    Cohort out;
    for (const auto& p : cohort.patients)
        if (p.sex == want) out.patients.push_back(p);
    return out;
}

Cohort restrict_to_task(const Cohort& cohort, Task task) {
    Cohort out;
    for (const auto& p : cohort.patients) {
        const auto* rec = p.task(task);
        if (!rec || (!rec->wet && !rec->dry)) continue;
        PatientRecord q;
        q.patient_id = p.patient_id;
        q.sex = p.sex;
        q.tasks[task] = *rec;
        out.patients.push_back(std::move(q));
    }
    return out;
}

// ---------------------------------------------------------------- splits

bool SplitPlan::is_train(const std::string& id) const {
    return std::find(train_ids.begin(), train_ids.end(), id) != train_ids.end();
}
bool SplitPlan::is_test(const std::string& id) const {
    return std::find(test_ids.begin(), test_ids.end(), id) != test_ids.end();
}

void SplitPlan::check_disjoint() const {
    if (train_ids.empty() || test_ids.empty()) throw InsufficientDataError("split: a side is empty");
    std::set<std::string> tr(train_ids.begin(), train_ids.end());
    for (const auto& id : test_ids)
        if (tr.count(id)) throw InsufficientDataError("split: patient '" + id + "' is on both sides");
}

std::string SplitPlan::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["test_ratio"] = test_ratio;
    j["train"] = train_ids;
    j["test"] = test_ids;
    return j.dump(2);
}

SplitPlan SplitPlan::from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        SplitPlan p;
        p.seed = j.at("seed").get<std::uint64_t>();
        p.test_ratio = j.at("test_ratio").get<double>();
        p.train_ids = j.at("train").get<std::vector<std::string>>();
        p.test_ids = j.at("test").get<std::vector<std::string>>();
        p.check_disjoint();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("split plan: ") + e.what());
    }
}

SplitPlan split_by_patient(const Cohort& cohort, double test_ratio, std::uint64_t seed) {
    if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw ConfigError("split: test_ratio must lie in (0, 1)");
    const std::size_t n = cohort.patients.size();
    if (n < 2) throw InsufficientDataError("split: need at least 2 patients, have " + std::to_string(n));

    const auto n_test = static_cast<std::size_t>(
        std::clamp<long long>(std::llround(static_cast<double>(n) * test_ratio), 1, static_cast<long long>(n) - 1));

    // Sex strata in cohort order; female first so ties in the largest
    // remainder allocation resolve the same way every time.
    std::vector<std::string> strata[2];
    for (const auto& p : cohort.patients) strata[p.sex == Sex::female ? 0 : 1].push_back(p.patient_id);

    std::size_t quota[2];
    double remainder[2];
    std::size_t assigned = 0;
    for (int s = 0; s < 2; ++s) {
        const double exact = static_cast<double>(strata[s].size()) * static_cast<double>(n_test) / static_cast<double>(n);
        quota[s] = static_cast<std::size_t>(std::floor(exact));
        remainder[s] = exact - static_cast<double>(quota[s]);
        assigned += quota[s];
    }
    while (assigned < n_test) {
        const int s = remainder[0] >= remainder[1] ? 0 : 1;
        const int pick = quota[s] < strata[s].size() ? s : 1 - s;
        ++quota[pick];
        remainder[pick] = -1.0;
        ++assigned;
    }

    std::mt19937_64 rng(seed);
    std::set<std::string> test;
    for (int s = 0; s < 2; ++s) {
        auto ids = strata[s];
        for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng() % i]);
        for (std::size_t i = 0; i < quota[s]; ++i) test.insert(ids[i]);
    }

    SplitPlan plan;
    plan.seed = seed;
    plan.test_ratio = test_ratio;
    for (const auto& p : cohort.patients)
        (test.count(p.patient_id) ? plan.test_ids : plan.train_ids).push_back(p.patient_id);
    plan.check_disjoint();
    return plan;
}

// ---------------------------------------------------------------- datasets

std::vector<double> select_columns(std::span<const double> values, const std::vector<std::size_t>& idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(values[i]);
    return out;
}

namespace {

std::vector<std::size_t> mask_columns(const Cohort& cohort, const SelectionMask& selection) {
    const auto idx = selection.selected_indices();
    if (idx.empty()) throw InsufficientDataError("feature selection is empty");
    const auto names = cohort.feature_names();
    if (names != selection.names) throw SchemaError("selection mask was computed on a different feature set");
    return idx;
}

}  // namespace

PatientwiseData build_patientwise(const Cohort& cohort, const SplitPlan& split, const SelectionMask& selection,
                                  Task task) {
    split.check_disjoint();
    const auto idx = mask_columns(cohort, selection);
    PatientwiseData data;
    for (auto i : idx) data.feature_names.push_back(selection.names[i]);

    for (const auto& p : cohort.patients) {
        const bool train = split.is_train(p.patient_id);
        if (!train && !split.is_test(p.patient_id)) continue;
        const auto* rec = p.task(task);
        if (!rec) continue;
        auto& dst = train ? data.train : data.test;
        if (rec->wet) dst.push_back({select_columns(rec->wet->values, idx), 1, p.patient_id});
        if (rec->dry) dst.push_back({select_columns(rec->dry->values, idx), 0, p.patient_id});
    }
    if (data.train.empty() || data.test.empty())
        throw InsufficientDataError("patient-wise: empty train or test set for task " + to_string(task));

    const std::size_t d = idx.size();
    data.mean.assign(d, 0.0);
    data.stddev.assign(d, 0.0);
    const double n = static_cast<double>(data.train.size());
    for (const auto& s : data.train)
        for (std::size_t j = 0; j < d; ++j) data.mean[j] += s.x[j];
    for (auto& m : data.mean) m /= n;
    for (const auto& s : data.train)
        for (std::size_t j = 0; j < d; ++j) data.stddev[j] += (s.x[j] - data.mean[j]) * (s.x[j] - data.mean[j]);
    for (auto& sd : data.stddev) {
        sd = std::sqrt(sd / n);
        if (!(sd > 0.0)) sd = 1.0;
    }
    for (auto* set : {&data.train, &data.test})
        for (auto& s : *set)
            for (std::size_t j = 0; j < d; ++j) s.x[j] = (s.x[j] - data.mean[j]) / data.stddev[j];
    return data;
}

PairSample make_pair_sample(std::span<const double> wet, std::span<const double> dry, int label,
                            std::string patient_id) {
    if (wet.size() != dry.size()) throw ShapeError("pair sample: wet and dry vectors differ in length");
    if (label != 0 && label != 1) throw ConfigError("pair sample: label must be 0 or 1");
    PairSample s;
    s.label = label;
    s.patient_id = std::move(patient_id);
    s.x.resize(wet.size());
    for (std::size_t i = 0; i < wet.size(); ++i) s.x[i] = label == 1 ? wet[i] - dry[i] : dry[i] - wet[i];
    return s;
}

PairwiseData build_pairwise(const Cohort& cohort, const SplitPlan& split, const SelectionMask& selection, Task task,
                            std::uint64_t seed) {
    split.check_disjoint();
    const auto idx = mask_columns(cohort, selection);
    PairwiseData data;
    for (auto i : idx) data.feature_names.push_back(selection.names[i]);

    std::mt19937_64 rng(seed);
    for (const auto& p : cohort.patients) {
        const auto* rec = p.task(task);
        if (!rec || !rec->complete()) continue;
        const int label = static_cast<int>(rng() >> 63);
        const bool train = split.is_train(p.patient_id);
        if (!train && !split.is_test(p.patient_id)) continue;
        (train ? data.train : data.test)
            .push_back(make_pair_sample(select_columns(rec->wet->values, idx), select_columns(rec->dry->values, idx),
                                        label, p.patient_id));
    }
    if (data.train.empty() && data.test.empty())
        throw InsufficientDataError("pair-wise: no patient has both conditions for task " + to_string(task));
    if (data.train.empty() || data.test.empty())
        throw InsufficientDataError("pair-wise: empty train or test set for task " + to_string(task));
    return data;
}

ConditionSets condition_sets(const Cohort& cohort, Task task, const std::vector<std::string>* only_ids,
                             bool complete_only) {
    ConditionSets out;
    for (const auto& p : cohort.patients) {
        if (only_ids && std::find(only_ids->begin(), only_ids->end(), p.patient_id) == only_ids->end()) continue;
        const auto* rec = p.task(task);
        if (!rec) continue;
        if (complete_only && !rec->complete()) continue;
        if (rec->wet) out.wet.push_back(*rec->wet);
        if (rec->dry) out.dry.push_back(*rec->dry);
    }
    return out;
}

}  // namespace pairvoice
