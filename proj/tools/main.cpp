#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pairvoice/csv.hpp"
#include "pairvoice/experiment.hpp"
#include "pairvoice/log.hpp"
#include "pairvoice/nn/serialize.hpp"
#include "pairvoice/synth.hpp"

namespace fs = std::filesystem;
using namespace pairvoice;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

struct Common {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
    bool force = false;
};

std::string read_file(const std::string& path) { return nn::load_text(path); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!csv::trim(item).empty()) out.push_back(csv::trim(item));
    return out;
}

experiment::ExperimentConfig load_config(const Common& common, const std::string& manifest) {
    auto cfg = common.config.empty() ? experiment::ExperimentConfig{}
                                     : experiment::ExperimentConfig::from_json(read_file(common.config));
    if (!manifest.empty()) cfg.manifest = manifest;
    if (common.seed) cfg.seeds = {*common.seed};
    if (!common.out.empty()) cfg.out_dir = common.out;
    if (cfg.manifest.empty()) throw ConfigError("no manifest given (--manifest or \"manifest\" in the config)");
    cfg.validate();
    return cfg;
}

fs::path out_dir(const Common& common, const std::string& fallback) {
    return common.out.empty() ? fs::path(fallback) : fs::path(common.out);
}

void write(const fs::path& path, const std::string& text) {
    csv::write_text(path, text);
    log::info("wrote " + path.string());
}

int cmd_extract(const Common& common, const std::string& manifest_path) {
    const Manifest manifest = load_manifest(manifest_path);
    const fs::path dir = out_dir(common, "features");
    std::vector<FeatureVector> vectors;
    std::vector<ManifestEntry> kept;
    nlohmann::ordered_json failures = nlohmann::ordered_json::array();
    for (const auto& e : manifest.entries) {
        const fs::path path = manifest.resolve(e.source);
        try {
            vectors.push_back(extract_features(load_wav(path), RecordingRef{e.patient_id, e.task, e.condition}));
            ManifestEntry k = e;
            k.source = "features.csv";
            kept.push_back(std::move(k));
        } catch (const Error& err) {
            log::warn("extract: skipping " + path.string() + ": " + err.what());
            failures.push_back({{"patient_id", e.patient_id},
                                {"task", to_string(e.task)},
                                {"condition", to_string(e.condition)},
                                {"path", path.string()},
                                {"error_kind", err.kind()},
                                {"error", err.what()}});
        }
    }
    if (vectors.empty()) throw InsufficientDataError("extract: every recording failed");
    write_feature_csv(dir / "features.csv", vectors);
    write_manifest(dir / "manifest.csv", kept);
    nlohmann::ordered_json summary{{"manifest", manifest_path},
                                   {"n_recordings", manifest.entries.size()},
                                   {"n_extracted", vectors.size()},
                                   {"failures", failures}};
    write(dir / "extract_report.json", summary.dump(2) + "\n");
    std::cout << "extracted " << vectors.size() << "/" << manifest.entries.size() << " recordings -> "
              << (dir / "features.csv").string() << "\n";
    return failures.empty() ? kExitOk : kExitPartial;
}

int cmd_select(const Common& common, const std::string& manifest, std::optional<double> alpha_flag) {
    auto cfg = load_config(common, manifest);
    if (alpha_flag) cfg.alpha = *alpha_flag;
    const Cohort cohort = load_cohort(cfg.manifest);
    const auto report = experiment::selection_report(cohort, cfg.tasks, cfg.groups, cfg.kinds, cfg.alpha);
    const fs::path dir = out_dir(common, cfg.out_dir);
    write(dir / "selection.csv", report.to_csv());
    write(dir / "selection.json", report.to_json() + "\n");
    std::cout << report.to_csv();
    std::size_t missing = 0;
    for (const auto& [key, count] : report.cells)
        if (!count) ++missing;
    return missing ? kExitPartial : kExitOk;
}

void write_report(const fs::path& dir, const experiment::ExperimentReport& report) {
    write(dir / "report.json", report.to_json() + "\n");
    write(dir / "report.csv", report.to_csv());
    write(dir / "table.csv", report.table_csv());
}

int cmd_run(const Common& common, const std::string& manifest) {
    const auto cfg = load_config(common, manifest);
    const Cohort cohort = load_cohort(cfg.manifest);
    const auto report = experiment::run_experiment(cohort, cfg);
    write_report(cfg.out_dir, report);
    std::cout << report.table_csv();
    if (report.failed()) {
        std::cerr << report.failed() << " of " << report.cells.size() << " cells failed; see "
                  << (fs::path(cfg.out_dir) / "report.json").string() << "\n";
        return kExitPartial;
    }
    return kExitOk;
}

int cmd_aff(const Common& common, const std::string& manifest) {
    const auto cfg = load_config(common, manifest);
    std::vector<std::string> load_failures;
    const auto recs = experiment::load_aff_recordings(cfg.manifest, cfg.aff, &load_failures);
    if (recs.empty()) throw InsufficientDataError("aff: no readable recordings");
    const auto report = experiment::run_aff(recs, cfg);
    const fs::path dir = cfg.out_dir;
    auto doc = nlohmann::ordered_json::parse(report.to_json());
    doc["load_failures"] = load_failures;
    write(dir / "aff_report.json", doc.dump(2) + "\n");
    if (!report.aggregate.mean.empty()) {
        write(dir / "aff_importance.csv", report.curve_csv());
        write(dir / "aff_importance.svg", report.svg());
    }
    for (const auto& t : report.tasks)
        if (t.ok && t.model) write(dir / "models" / ("aff_" + to_string(t.task) + ".json"), nn::to_json(*t.model) + "\n");
    std::cout << "aff: " << report.tasks.size() - report.failed() << "/" << report.tasks.size() << " tasks trained";
    if (!report.aggregate.mean.empty())
        std::cout << ", aggregate peak " << csv::format_double(report.bin_hz * static_cast<double>(report.peak_bin()))
                  << " Hz";
    std::cout << "\n";
    if (report.failed() == report.tasks.size()) return kExitError;
    return report.failed() || !load_failures.empty() ? kExitPartial : kExitOk;
}

struct SynthFlags {
    std::string mode;
    std::optional<std::size_t> n;
    std::optional<double> delta, sigma_s, sigma_n, duration;
    std::string band, tasks;
};

int cmd_synth(const Common& common, const SynthFlags& f) {
    auto cfg = common.config.empty() ? synth::SynthConfig{} : synth::SynthConfig::from_json(read_file(common.config));
    if (!f.mode.empty()) cfg.mode = synth::parse_mode(f.mode);
    if (f.n) cfg.n_patients = *f.n;
    if (f.delta) cfg.effect_scale = *f.delta;
    if (f.sigma_s) cfg.confound_scale = *f.sigma_s;
    if (f.sigma_n) cfg.noise_scale = *f.sigma_n;
    if (f.duration) cfg.duration_s = *f.duration;
    if (common.seed) cfg.seed = *common.seed;
    if (!f.band.empty()) {
        const auto parts = split_list(f.band);
        if (parts.size() != 2) throw ConfigError("--band expects LOW,HIGH");
        const auto low = csv::parse_double(parts[0]), high = csv::parse_double(parts[1]);
        if (!low || !high) throw ConfigError("--band expects two numbers, got '" + f.band + "'");
        cfg.band_low_hz = *low;
        cfg.band_high_hz = *high;
    }
    if (!f.tasks.empty()) {
        cfg.tasks.clear();
        for (const auto& t : split_list(f.tasks)) cfg.tasks.push_back(parse_task(t));
    }
    cfg.validate();
    const fs::path dir = out_dir(common, "cohort");
    synth::prepare_output_dir(dir, common.force);
    if (cfg.mode == synth::Mode::feature) {
        synth::write_feature_cohort(dir, synth::gen_feature_cohort(cfg), cfg, true);
    } else {
        synth::write_signal_cohort(dir, synth::gen_signal_cohort(cfg), cfg, true);
    }
    std::cout << "synth: " << to_string(cfg.mode) << " cohort of " << cfg.n_patients << " patients -> "
              << (dir / "manifest.csv").string() << "\n";
    return kExitOk;
}

int cmd_report(const Common& common, const std::string& report_path) {
    const auto report = experiment::ExperimentReport::from_json(read_file(report_path));
    const fs::path dir = common.out.empty() ? fs::path(report_path).parent_path() : fs::path(common.out);
    write(dir / "report.csv", report.to_csv());
    write(dir / "table.csv", report.table_csv());
    std::cout << report.table_csv();
    return report.failed() ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pairvoice: wet/dry voice classification with pair-wise differencing"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--seed", common.seed, "Seed (overrides the config)");
    app.add_option("--config", common.config, "JSON config file");
    app.add_option("--out", common.out, "Output directory");
    app.add_flag("--force", common.force, "Overwrite a non-empty output directory");
    app.fallthrough();

    std::string manifest, report_path;
    std::optional<double> alpha;
    SynthFlags sf;

    auto* extract = app.add_subcommand("extract", "Extract acoustic features for every recording in a manifest");
    extract->add_option("manifest", manifest, "Manifest CSV")->required();

    auto* select = app.add_subcommand("select", "Count features passing paired / independent t-tests");
    select->add_option("--manifest", manifest, "Manifest CSV");
    select->add_option("--alpha", alpha, "Significance level");

    auto* run = app.add_subcommand("run", "Train and evaluate every cell of the experiment grid");
    run->add_option("--manifest", manifest, "Manifest CSV");

    auto* aff = app.add_subcommand("aff", "Train AFF classifiers on spectrograms and plot frequency importance");
    aff->add_option("--manifest", manifest, "Manifest CSV with wav sources");

    auto* syn = app.add_subcommand("synth", "Generate a synthetic paired cohort");
    syn->add_option("--mode", sf.mode, "feature | signal");
    syn->add_option("--n", sf.n, "Number of patients");
    syn->add_option("--delta", sf.delta, "Wet-state effect scale");
    syn->add_option("--sigma-s", sf.sigma_s, "Speaker offset scale");
    syn->add_option("--sigma-n", sf.sigma_n, "Noise scale");
    syn->add_option("--duration", sf.duration, "Clip length in seconds (signal mode)");
    syn->add_option("--band", sf.band, "Planted band LOW,HIGH in Hz");
    syn->add_option("--tasks", sf.tasks, "Comma-separated tasks (pg,mm,mlh,c)");

    auto* rep = app.add_subcommand("report", "Re-render CSV tables from a report JSON");
    rep->add_option("report", report_path, "report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*extract) return cmd_extract(common, manifest);
        if (*select) return cmd_select(common, manifest, alpha);
        if (*run) return cmd_run(common, manifest);
        if (*aff) return cmd_aff(common, manifest);
        if (*syn) return cmd_synth(common, sf);
        if (*rep) return cmd_report(common, report_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
