#include "pairvoice/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pairvoice/csv.hpp"
#include "pairvoice/log.hpp"
#include "pairvoice/nn/dense.hpp"
#include "pairvoice/nn/train.hpp"

namespace pairvoice::experiment {

using ojson = nlohmann::ordered_json;

std::string to_string(Scheme s) { return s == Scheme::patientwise ? "patient-wise" : "pair-wise"; }

Scheme parse_scheme(std::string_view s) {
    std::string v = csv::lower(csv::trim(s));
    v.erase(std::remove(v.begin(), v.end(), '-'), v.end());
    v.erase(std::remove(v.begin(), v.end(), '_'), v.end());
    if (v == "patientwise" || v == "patient") return Scheme::patientwise;
    if (v == "pairwise" || v == "pair") return Scheme::pairwise;
    throw ConfigError("unknown scheme '" + std::string(s) + "'");
}

namespace {

// Distinct, reproducible seeds for the random pieces of one cell.
std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
    return buf;
}

ojson metrics_json(const nn::Metrics& m) {
    return ojson{{"f1", m.f1},          {"f1_pct", pct(m.f1)},         {"precision", m.precision},
                 {"recall", m.recall},  {"accuracy", m.accuracy},      {"tp", m.tp},
                 {"fp", m.fp},          {"fn", m.fn},                  {"tn", m.tn},
                 {"f1_undefined", m.f1_undefined}};
}

template <class T, class F>
std::vector<std::string> names_of(const std::vector<T>& v, F&& f) {
    std::vector<std::string> out;
    for (const auto& x : v) out.push_back(f(x));
    return out;
}

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    if (tasks.empty() || groups.empty() || schemes.empty() || kinds.empty() || seeds.empty())
        throw ConfigError("config: tasks, groups, schemes, t_tests and seeds must be non-empty");
    if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw ConfigError("config: test_ratio must lie in (0, 1)");
    if (!(alpha <= 1.0)) throw ConfigError("config: alpha must be <= 1");
    if (net.hidden1 == 0 || net.hidden2 == 0 || net.batch == 0 || net.epochs < 0 || !(net.lr >= 0.0))
        throw ConfigError("config: invalid net hyperparameters");
    if (aff.d_new == 0 || aff.batch == 0 || aff.epochs < 0 || !(aff.lr >= 0.0) || aff.trim_halfwidth_bins < 0 ||
        !(aff.aff_decay >= 0.0 && aff.aff_decay < 1.0))
        throw ConfigError("config: invalid aff hyperparameters");
    nn::parse_encoder_kind(aff.encoder);
}

std::string ExperimentConfig::to_json() const {
    ojson j;
    j["manifest"] = manifest;
    j["tasks"] = names_of(tasks, [](Task t) { return pairvoice::to_string(t); });
    j["groups"] = names_of(groups, [](Group g) { return pairvoice::to_string(g); });
    j["schemes"] = names_of(schemes, [](Scheme s) { return to_string(s); });
    j["t_tests"] = names_of(kinds, [](TestKind k) { return pairvoice::to_string(k); });
    j["alpha"] = alpha;
    j["test_ratio"] = test_ratio;
    j["seeds"] = seeds;
    j["net"] = {{"hidden1", net.hidden1}, {"hidden2", net.hidden2}, {"lr", net.lr},
                {"epochs", net.epochs},   {"batch", net.batch}};
    j["aff"] = {{"d_new", aff.d_new},
                {"trim_halfwidth_bins", aff.trim_halfwidth_bins},
                {"trim_period_epochs", aff.trim_period_epochs},
                {"encoder", aff.encoder},
                {"ff_dim", aff.ff_dim},
                {"encoder_init_scale", aff.encoder_init_scale},
                {"lr", aff.lr},
                {"aff_decay", aff.aff_decay},
                {"epochs", aff.epochs},
                {"batch", aff.batch},
                {"frame_ms", aff.frame_ms},
                {"hop_ms", aff.hop_ms},
                {"n_fft", aff.n_fft},
                {"mel_low_hz", aff.mel_low_hz},
                {"mel_high_hz", aff.mel_high_hz},
                {"calibrated_power", aff.calibrated_power}};
    j["out_dir"] = out_dir;
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
    ExperimentConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        c.manifest = j.value("manifest", c.manifest);
        auto list = [&](const char* key, auto& dst, auto parse) {
            if (!j.contains(key)) return;
            dst.clear();
            for (const auto& v : j.at(key)) dst.push_back(parse(v.template get<std::string>()));
        };
        list("tasks", c.tasks, [](const std::string& s) { return parse_task(s); });
        list("groups", c.groups, [](const std::string& s) { return parse_group(s); });
        list("schemes", c.schemes, [](const std::string& s) { return parse_scheme(s); });
        list("t_tests", c.kinds, [](const std::string& s) { return parse_test_kind(s); });
        c.alpha = j.value("alpha", c.alpha);
        c.test_ratio = j.value("test_ratio", c.test_ratio);
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("net")) {
            const auto& n = j.at("net");
            c.net.hidden1 = n.value("hidden1", c.net.hidden1);
            c.net.hidden2 = n.value("hidden2", c.net.hidden2);
            c.net.lr = n.value("lr", c.net.lr);
            c.net.epochs = n.value("epochs", c.net.epochs);
            c.net.batch = n.value("batch", c.net.batch);
        }
        if (j.contains("aff")) {
            const auto& a = j.at("aff");
            c.aff.d_new = a.value("d_new", c.aff.d_new);
            c.aff.trim_halfwidth_bins = a.value("trim_halfwidth_bins", c.aff.trim_halfwidth_bins);
            c.aff.trim_period_epochs = a.value("trim_period_epochs", c.aff.trim_period_epochs);
            c.aff.encoder = a.value("encoder", c.aff.encoder);
            c.aff.ff_dim = a.value("ff_dim", c.aff.ff_dim);
            c.aff.encoder_init_scale = a.value("encoder_init_scale", c.aff.encoder_init_scale);
            c.aff.lr = a.value("lr", c.aff.lr);
            c.aff.aff_decay = a.value("aff_decay", c.aff.aff_decay);
            c.aff.epochs = a.value("epochs", c.aff.epochs);
            c.aff.batch = a.value("batch", c.aff.batch);
            c.aff.frame_ms = a.value("frame_ms", c.aff.frame_ms);
            c.aff.hop_ms = a.value("hop_ms", c.aff.hop_ms);
            c.aff.n_fft = a.value("n_fft", c.aff.n_fft);
            c.aff.mel_low_hz = a.value("mel_low_hz", c.aff.mel_low_hz);
            c.aff.mel_high_hz = a.value("mel_high_hz", c.aff.mel_high_hz);
            c.aff.calibrated_power = a.value("calibrated_power", c.aff.calibrated_power);
        }
        c.out_dir = j.value("out_dir", c.out_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------- grid cells

std::string CellResult::label() const {
    return pairvoice::to_string(task) + "/" + pairvoice::to_string(group) + "/" + to_string(scheme) + "/" +
           pairvoice::to_string(kind) + "/seed" + std::to_string(seed);
}

CellResult run_cell(const Cohort& cohort, Task task, Group group, Scheme scheme, TestKind kind, std::uint64_t seed,
                    const ExperimentConfig& cfg) {
    CellResult cell;
    cell.task = task;
    cell.group = group;
    cell.scheme = scheme;
    cell.kind = kind;
    cell.seed = seed;
    try {
        const Cohort sub = restrict_to_task(filter_group(cohort, group), task);
        if (sub.patients.size() < 2)
            throw InsufficientDataError("group " + pairvoice::to_string(group) + " has " +
                                        std::to_string(sub.patients.size()) + " patients for task " +
                                        pairvoice::to_string(task));
        cell.split = split_by_patient(sub, cfg.test_ratio, seed);

        const auto sets = condition_sets(sub, task, &cell.split.train_ids, kind == TestKind::paired);
        const SelectionMask mask = select_features(sets.wet, sets.dry, kind, cfg.alpha);
        cell.selected = mask.selected_names();
        if (cell.selected.empty()) throw InsufficientDataError("no feature passed selection at alpha " + csv::format_double(cfg.alpha));

        nn::DenseNet3 net(cell.selected.size(), cfg.net.hidden1, cfg.net.hidden2, derive(seed, 2));
        const nn::TrainConfig tc{cfg.net.lr, cfg.net.epochs, cfg.net.batch, derive(seed, 3)};
        std::vector<double> probs;
        std::vector<int> labels;
        if (scheme == Scheme::patientwise) {
            const auto data = build_patientwise(sub, cell.split, mask, task);
            cell.loss_curve = nn::train(net, std::span<const LabeledVector>(data.train), tc).loss_curve;
            probs = net.predict_positive(std::span<const LabeledVector>(data.test));
            for (const auto& s : data.test) labels.push_back(s.label);
            cell.n_train = data.train.size();
            cell.n_test = data.test.size();
        } else {
            const auto data = build_pairwise(sub, cell.split, mask, task, derive(seed, 1));
            cell.loss_curve = nn::train(net, std::span<const PairSample>(data.train), tc).loss_curve;
            probs = net.predict_positive(std::span<const PairSample>(data.test));
            for (const auto& s : data.test) labels.push_back(s.label);
            cell.n_train = data.train.size();
            cell.n_test = data.test.size();
        }
        cell.metrics = nn::evaluate(probs, labels);
        cell.ok = true;
    } catch (const Error& e) {
        cell.error_kind = e.kind();
        cell.error = e.what();
        log::warn("cell " + cell.label() + " failed: " + cell.error_kind + ": " + cell.error);
    }
    return cell;
}

ExperimentReport run_experiment(const Cohort& cohort, const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentReport report;
    report.config = cfg;
    for (Task task : cfg.tasks)
        for (Group group : cfg.groups)
            for (Scheme scheme : cfg.schemes)
                for (TestKind kind : cfg.kinds)
                    for (auto seed : cfg.seeds) {
                        report.cells.push_back(run_cell(cohort, task, group, scheme, kind, seed, cfg));
                        log::info("cell " + report.cells.back().label() + " done");
                    }
    return report;
}

// ---------------------------------------------------------------- report

std::size_t ExperimentReport::failed() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok; }));
}

std::optional<double> ExperimentReport::mean_f1(std::optional<Scheme> scheme, std::optional<TestKind> kind) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells) {
        if (!c.ok || (scheme && c.scheme != *scheme) || (kind && c.kind != *kind)) continue;
        sum += c.metrics.f1;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::string ExperimentReport::to_json() const {
    ojson j;
    j["config"] = ojson::parse(config.to_json());
    ojson cells_json = ojson::array();
    ojson failures = ojson::array();
    for (const auto& c : cells) {
        ojson cj;
        cj["task"] = pairvoice::to_string(c.task);
        cj["group"] = pairvoice::to_string(c.group);
        cj["scheme"] = to_string(c.scheme);
        cj["t_test"] = pairvoice::to_string(c.kind);
        cj["seed"] = c.seed;
        cj["status"] = c.ok ? "ok" : "failed";
        if (c.ok) {
            cj["metrics"] = metrics_json(c.metrics);
            cj["n_selected"] = c.selected.size();
            cj["selected"] = c.selected;
            cj["n_train"] = c.n_train;
            cj["n_test"] = c.n_test;
            cj["final_loss"] = c.loss_curve.empty() ? 0.0 : c.loss_curve.back();
        } else {
            cj["error_kind"] = c.error_kind;
            cj["error"] = c.error;
            failures.push_back({{"cell", c.label()}, {"error_kind", c.error_kind}, {"error", c.error}});
        }
        cj["split"] = ojson::parse(c.split.to_json());
        cells_json.push_back(std::move(cj));
    }
    j["cells"] = std::move(cells_json);

    ojson avg;
    auto put = [&](const std::string& key, std::optional<double> v) {
        avg[key] = v ? ojson{{"f1", *v}, {"f1_pct", pct(*v)}} : ojson(nullptr);
    };
    put("all", mean_f1());
    for (Scheme s : config.schemes) {
        put(to_string(s), mean_f1(s));
        for (TestKind k : config.kinds) put(to_string(s) + "/" + pairvoice::to_string(k), mean_f1(s, k));
    }
    j["average"] = std::move(avg);
    j["n_cells"] = cells.size();
    j["n_failed"] = failed();
    j["failures"] = std::move(failures);
    return j.dump(2);
}

std::string ExperimentReport::to_csv() const {
    std::string out = "task,group,scheme,t_test,seed,status,f1_pct,precision,recall,accuracy,n_selected,n_train,n_test,error\n";
    for (const auto& c : cells) {
        out += csv::join({pairvoice::to_string(c.task), pairvoice::to_string(c.group), to_string(c.scheme),
                          pairvoice::to_string(c.kind), std::to_string(c.seed), c.ok ? "ok" : "failed",
                          c.ok ? pct(c.metrics.f1) : "-", c.ok ? csv::format_double(c.metrics.precision) : "-",
                          c.ok ? csv::format_double(c.metrics.recall) : "-",
                          c.ok ? csv::format_double(c.metrics.accuracy) : "-",
                          c.ok ? std::to_string(c.selected.size()) : "-", std::to_string(c.n_train),
                          std::to_string(c.n_test), c.ok ? "" : c.error_kind + ": " + c.error});
        out += '\n';
    }
    for (Scheme s : config.schemes) {
        const auto m = mean_f1(s);
        out += csv::join({"Average", "-", to_string(s), "-", "-", m ? "ok" : "failed", m ? pct(*m) : "-", "-", "-",
                          "-", "-", "-", "-", ""});
        out += '\n';
    }
    return out;
}

std::string ExperimentReport::table_csv() const {
    std::string out = "scheme,t_test,sex";
    for (Task t : config.tasks) out += "," + pairvoice::to_string(t);
    out += ",average\n";
    for (Scheme s : config.schemes)
        for (TestKind k : config.kinds)
            for (Group g : config.groups) {
                std::vector<std::string> row{to_string(s), pairvoice::to_string(k), pairvoice::to_string(g)};
                double total = 0.0;
                std::size_t n_total = 0;
                for (Task t : config.tasks) {
                    double sum = 0.0;
                    std::size_t n = 0;
                    for (const auto& c : cells)
                        if (c.ok && c.scheme == s && c.kind == k && c.group == g && c.task == t) {
                            sum += c.metrics.f1;
                            ++n;
                        }
                    row.push_back(n ? pct(sum / static_cast<double>(n)) : "-");
                    total += sum;
                    n_total += n;
                }
                row.push_back(n_total ? pct(total / static_cast<double>(n_total)) : "-");
                out += csv::join(row) + "\n";
            }
    return out;
}

ExperimentReport ExperimentReport::from_json(std::string_view text) {
    ExperimentReport r;
    try {
        const auto j = nlohmann::json::parse(text);
        r.config = ExperimentConfig::from_json(j.at("config").dump());
        for (const auto& cj : j.at("cells")) {
            CellResult c;
            c.task = parse_task(cj.at("task").get<std::string>());
            c.group = parse_group(cj.at("group").get<std::string>());
            c.scheme = parse_scheme(cj.at("scheme").get<std::string>());
            c.kind = parse_test_kind(cj.at("t_test").get<std::string>());
            c.seed = cj.at("seed").get<std::uint64_t>();
            c.ok = cj.at("status").get<std::string>() == "ok";
            if (c.ok) {
                const auto& m = cj.at("metrics");
                c.metrics = nn::metrics_from_counts(m.at("tp").get<std::size_t>(), m.at("fp").get<std::size_t>(),
                                                    m.at("fn").get<std::size_t>(), m.at("tn").get<std::size_t>());
                c.selected = cj.at("selected").get<std::vector<std::string>>();
                c.n_train = cj.at("n_train").get<std::size_t>();
                c.n_test = cj.at("n_test").get<std::size_t>();
            } else {
                c.error_kind = cj.value("error_kind", std::string());
                c.error = cj.value("error", std::string());
            }
            if (cj.contains("split") && !cj.at("split").at("train").empty() && !cj.at("split").at("test").empty())
                c.split = SplitPlan::from_json(cj.at("split").dump());
            r.cells.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("report: ") + e.what());
    }
    return r;
}

SelectionReport selection_report(const Cohort& cohort, const std::vector<Task>& tasks,
                                 const std::vector<Group>& groups, const std::vector<TestKind>& kinds, double alpha,
                                 const std::string& feature_set) {
    SelectionReport report;
    for (Group g : groups) {
        const Cohort sub = filter_group(cohort, g);
        for (TestKind k : kinds)
            for (Task t : tasks) {
                std::optional<std::size_t> count;
                try {
                    const auto sets = condition_sets(sub, t, nullptr, k == TestKind::paired);
                    count = select_features(sets.wet, sets.dry, k, alpha).count();
                } catch (const Error& e) {
                    log::warn("selection " + pairvoice::to_string(g) + "/" + pairvoice::to_string(k) + "/" +
                              pairvoice::to_string(t) + " skipped: " + e.what());
                }
                report.add(feature_set, pairvoice::to_string(g), k, t, count);
            }
    }
    return report;
}

// ---------------------------------------------------------------- AFF

Spectrogram aff_spectrogram(const AudioClip& clip, const AffConfig& cfg) {
    const AudioClip c = clip.sample_rate_hz == kCanonicalSampleRate ? clip : resample_linear(clip, kCanonicalSampleRate);
    Spectrogram spec = spectrogram(c, FrameConfig{cfg.frame_ms, cfg.hop_ms, cfg.n_fft});
    if (cfg.calibrated_power) {
        // Symmetric Hann, as used by frame_signal.
        const int L = spec.frame_len;
        double sum = 0.0;
        for (int i = 0; i < L; ++i)
            sum += L > 1 ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (L - 1)) : 1.0;
        const double scale = 1.0 / (sum * sum);
        for (auto& v : spec.power.flat()) v *= scale;
    }
    return spec;
}

std::vector<AffRecording> load_aff_recordings(const std::filesystem::path& manifest_path, const AffConfig& cfg,
                                              std::vector<std::string>* failures) {
    const Manifest manifest = load_manifest(manifest_path);
    std::vector<AffRecording> out;
    for (const auto& e : manifest.entries) {
        const auto path = manifest.resolve(e.source);
        try {
            out.push_back({e.patient_id, e.sex, e.task, e.condition, aff_spectrogram(load_wav(path), cfg)});
        } catch (const Error& err) {
            const std::string msg = path.string() + ": " + err.kind() + ": " + err.what();
            log::warn("skipping " + msg);
            if (failures) failures->push_back(msg);
        }
    }
    return out;
}

AffTaskResult run_aff_task(std::span<const AffRecording> recordings, Task task, std::uint64_t seed,
                           double test_ratio, const AffConfig& cfg) {
    AffTaskResult r;
    r.task = task;
    try {
        Cohort people;
        std::vector<const AffRecording*> recs;
        for (const auto& rec : recordings) {
            if (rec.task != task) continue;
            recs.push_back(&rec);
            if (!people.find(rec.patient_id)) people.patients.push_back({rec.patient_id, rec.sex, {}});
        }
        if (recs.empty()) throw InsufficientDataError("no recordings for task " + pairvoice::to_string(task));
        r.split = split_by_patient(people, test_ratio, seed);

        std::vector<nn::LabeledSpectrogram> train, test;
        for (const auto* rec : recs) {
            nn::LabeledSpectrogram s{rec->spec.power, rec->condition == Condition::wet ? 1 : 0, rec->patient_id};
            (r.split.is_train(rec->patient_id) ? train : test).push_back(std::move(s));
        }
        const std::size_t d_freq = recs.front()->spec.num_bins();
        for (const auto* rec : recs)
            if (rec->spec.num_bins() != d_freq) throw ShapeError("AFF recordings differ in frequency resolution");
        const int sr = recs.front()->spec.sample_rate_hz;
        const double high = cfg.mel_high_hz > 0.0 ? cfg.mel_high_hz : sr / 2.0;

        const MelFilterBank bank = mel_filterbank(d_freq, cfg.d_new, sr, cfg.mel_low_hz, high);
        nn::AffMatrix aff = nn::aff_init_mfcc(bank, d_freq, cfg.d_new, cfg.trim_halfwidth_bins, cfg.trim_period_epochs);
        nn::SeqEncoder enc(nn::parse_encoder_kind(cfg.encoder), cfg.d_new, cfg.ff_dim, derive(seed, 4),
                           cfg.encoder_init_scale);
        nn::AffModel model(std::move(aff), std::move(enc), derive(seed, 5));
        model.aff_decay = cfg.aff_decay;
        const nn::TrainConfig tc{cfg.lr, cfg.epochs, cfg.batch, derive(seed, 6)};
        r.loss_curve = nn::train(model, std::span<const nn::LabeledSpectrogram>(train), tc).loss_curve;

        std::vector<int> labels;
        for (const auto& s : test) labels.push_back(s.label);
        r.metrics = nn::evaluate(model.predict_positive(std::span<const nn::LabeledSpectrogram>(test)), labels);
        r.empty_columns = nn::empty_columns(model.aff());
        if (r.empty_columns > 0)
            log::warn("AFF for task " + pairvoice::to_string(task) + " ends with " + std::to_string(r.empty_columns) +
                      " empty filters");
        r.curve = nn::importance_curve(model.aff());
        r.model = std::move(model);
        r.ok = true;
    } catch (const Error& e) {
        r.error_kind = e.kind();
        r.error = e.what();
        log::warn("AFF task " + pairvoice::to_string(task) + " failed: " + r.error_kind + ": " + r.error);
    }
    return r;
}

AffReport run_aff(std::span<const AffRecording> recordings, const ExperimentConfig& cfg) {
    cfg.validate();
    AffReport report;
    report.config = cfg;
    if (!recordings.empty()) {
        const auto& s = recordings.front().spec;
        report.bin_hz = static_cast<double>(s.sample_rate_hz) / s.n_fft;
    }
    std::vector<std::vector<double>> curves;
    for (Task t : cfg.tasks) {
        report.tasks.push_back(run_aff_task(recordings, t, cfg.seeds.front(), cfg.test_ratio, cfg.aff));
        if (report.tasks.back().ok) curves.push_back(report.tasks.back().curve);
    }
    if (!curves.empty()) report.aggregate = nn::aggregate_importance(curves);
    return report;
}

std::size_t AffReport::failed() const {
    return static_cast<std::size_t>(std::count_if(tasks.begin(), tasks.end(), [](const AffTaskResult& t) { return !t.ok; }));
}

std::size_t AffReport::peak_bin() const {
    const auto& m = aggregate.mean;
    if (m.empty()) return 0;
    return static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
}

std::string AffReport::to_json() const {
    ojson j;
    j["config"] = ojson::parse(config.to_json());
    j["bin_hz"] = bin_hz;
    ojson tj = ojson::array();
    for (const auto& t : tasks) {
        ojson x;
        x["task"] = pairvoice::to_string(t.task);
        x["status"] = t.ok ? "ok" : "failed";
        if (t.ok) {
            x["metrics"] = metrics_json(t.metrics);
            x["empty_filters"] = t.empty_columns;
            x["final_loss"] = t.loss_curve.empty() ? 0.0 : t.loss_curve.back();
            const auto it = std::max_element(t.curve.begin(), t.curve.end());
            x["peak_hz"] = bin_hz * static_cast<double>(it - t.curve.begin());
        } else {
            x["error_kind"] = t.error_kind;
            x["error"] = t.error;
        }
        tj.push_back(std::move(x));
    }
    j["tasks"] = std::move(tj);
    if (!aggregate.mean.empty()) j["aggregate_peak_hz"] = bin_hz * static_cast<double>(peak_bin());
    j["n_failed"] = failed();
    return j.dump(2);
}

std::string AffReport::curve_csv() const {
    std::vector<const AffTaskResult*> ok;
    for (const auto& t : tasks)
        if (t.ok) ok.push_back(&t);
    std::vector<std::string> header{"bin_hz"};
    for (const auto* t : ok) header.push_back(pairvoice::to_string(t->task));
    header.push_back("mean");
    header.push_back("std");
    std::string out = csv::join(header) + "\n";
    for (std::size_t b = 0; b < aggregate.mean.size(); ++b) {
        std::vector<std::string> row{csv::format_double(bin_hz * static_cast<double>(b))};
        for (const auto* t : ok) row.push_back(csv::format_double(t->curve[b]));
        row.push_back(csv::format_double(aggregate.mean[b]));
        row.push_back(csv::format_double(aggregate.stddev[b]));
        out += csv::join(row) + "\n";
    }
    return out;
}

std::string AffReport::svg() const {
    constexpr double W = 820.0, H = 420.0, L = 60.0, R = 20.0, T = 30.0, B = 50.0;
    const std::size_t n = aggregate.mean.size();
    const double f_max = n > 1 ? bin_hz * static_cast<double>(n - 1) : 1.0;
    auto px = [&](double hz) { return L + (W - L - R) * hz / f_max; };
    auto py = [&](double v) { return H - B - (H - T - B) * std::clamp(v, 0.0, 1.0); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", v);
        return std::string(buf);
    };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\">AFF frequency importance</text>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (double hz = 0.0; hz <= f_max + 1e-9; hz += 1000.0)
        s << "<text x=\"" << num(px(hz)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << hz / 1000.0
          << "k</text>\n";
    for (int k = 0; k <= 4; ++k)
        s << "<text x=\"" << L - 6 << "\" y=\"" << num(py(k / 4.0) + 4) << "\" text-anchor=\"end\">" << k / 4.0
          << "</text>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">frequency (Hz)</text>\n";

    if (n > 0) {
        // std band around the mean
        s << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
        for (std::size_t b = 0; b < n; ++b)
            s << num(px(bin_hz * b)) << ',' << num(py(aggregate.mean[b] + aggregate.stddev[b])) << ' ';
        for (std::size_t b = n; b-- > 0;)
            s << num(px(bin_hz * b)) << ',' << num(py(aggregate.mean[b] - aggregate.stddev[b])) << ' ';
        s << "\"/>\n";
        static const char* colors[] = {"#e6550d", "#31a354", "#756bb1", "#636363"};
        std::size_t ci = 0;
        for (const auto& t : tasks) {
            if (!t.ok) continue;
            s << "<polyline fill=\"none\" stroke=\"" << colors[ci % 4] << "\" stroke-width=\"0.8\" points=\"";
            for (std::size_t b = 0; b < n; ++b) s << num(px(bin_hz * b)) << ',' << num(py(t.curve[b])) << ' ';
            s << "\"/>\n";
            s << "<text x=\"" << W - R - 60 << "\" y=\"" << T + 14 * (ci + 1) << "\" fill=\"" << colors[ci % 4]
              << "\">" << pairvoice::to_string(t.task) << "</text>\n";
            ++ci;
        }
        s << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
        for (std::size_t b = 0; b < n; ++b) s << num(px(bin_hz * b)) << ',' << num(py(aggregate.mean[b])) << ' ';
        s << "\"/>\n";
        const double peak_hz = bin_hz * static_cast<double>(peak_bin());
        s << "<line x1=\"" << num(px(peak_hz)) << "\" y1=\"" << T << "\" x2=\"" << num(px(peak_hz)) << "\" y2=\""
          << H - B << "\" stroke=\"#a50f15\" stroke-dasharray=\"4 3\"/>\n";
        s << "<text id=\"peak\" x=\"" << num(px(peak_hz) + 4) << "\" y=\"" << T + 12 << "\" fill=\"#a50f15\">peak "
          << num(peak_hz) << " Hz</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace pairvoice::experiment
