#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pairvoice/audio.hpp"
#include "pairvoice/errors.hpp"
#include "pairvoice/experiment.hpp"
#include "pairvoice/features.hpp"
#include "pairvoice/stats.hpp"
#include "pairvoice/synth.hpp"

namespace py = pybind11;
using namespace pairvoice;

namespace {

py::dict ttest_dict(const TTestResult& r) {
    py::dict d;
    d["t"] = r.t_stat;
    d["dof"] = r.dof;
    d["p"] = r.p_two_sided;
    d["kind"] = to_string(r.kind);
    return d;
}

AudioClip clip_from(std::vector<double> samples, int sample_rate_hz) {
    AudioClip c{std::move(samples), sample_rate_hz};
    c.validate();
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "pairvoice core bindings";

    static py::exception<Error> base(m, "PairvoiceError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(base, (std::string(e.kind()) + ": " + e.what()).c_str());
        }
    });

    m.def("student_t_p", &student_t_p, py::arg("t"), py::arg("dof"), "Two-sided Student-t tail probability.");
    m.def(
        "paired_ttest",
        [](const std::vector<double>& x, const std::vector<double>& y) { return ttest_dict(paired_ttest(x, y)); },
        py::arg("x"), py::arg("y"));
    m.def(
        "independent_ttest",
        [](const std::vector<double>& x, const std::vector<double>& y) { return ttest_dict(independent_ttest(x, y)); },
        py::arg("x"), py::arg("y"), "Welch t-test.");

    m.def(
        "load_wav",
        [](const std::filesystem::path& path) {
            const AudioClip c = load_wav(path);
            return py::make_tuple(c.samples, c.sample_rate_hz);
        },
        py::arg("path"), "Returns (samples, sample_rate_hz).");
    m.def(
        "extract_features",
        [](std::vector<double> samples, int sample_rate_hz) {
            const FeatureVector fv = extract_features(clip_from(std::move(samples), sample_rate_hz));
            py::dict d;
            for (std::size_t i = 0; i < fv.size(); ++i) d[py::str(fv.names[i])] = fv.values[i];
            return d;
        },
        py::arg("samples"), py::arg("sample_rate_hz") = kCanonicalSampleRate);
    m.def(
        "f0_track",
        [](std::vector<double> samples, int sample_rate_hz) {
            const LldTrack t = f0_autocorrelation(clip_from(std::move(samples), sample_rate_hz));
            return py::make_tuple(t.values, t.voiced_mask);
        },
        py::arg("samples"), py::arg("sample_rate_hz") = kCanonicalSampleRate, "Returns (f0_hz, voiced).");

    m.def(
        "synth",
        [](const std::filesystem::path& out_dir, const std::string& config_json, bool force) {
            const auto cfg = synth::SynthConfig::from_json(config_json.empty() ? "{}" : config_json);
            cfg.validate();
            synth::prepare_output_dir(out_dir, force);
            if (cfg.mode == synth::Mode::feature)
                synth::write_feature_cohort(out_dir, synth::gen_feature_cohort(cfg), cfg, true);
            else
                synth::write_signal_cohort(out_dir, synth::gen_signal_cohort(cfg), cfg, true);
            return out_dir / "manifest.csv";
        },
        py::arg("out_dir"), py::arg("config_json") = "", py::arg("force") = false,
        "Writes a synthetic cohort and returns its manifest path.");

    m.def(
        "run_experiment",
        [](const std::filesystem::path& manifest, const std::string& config_json) {
            auto cfg = experiment::ExperimentConfig::from_json(config_json.empty() ? "{}" : config_json);
            cfg.manifest = manifest.string();
            cfg.validate();
            py::gil_scoped_release release;
            const Cohort cohort = load_cohort(manifest);
            return experiment::run_experiment(cohort, cfg).to_json();
        },
        py::arg("manifest"), py::arg("config_json") = "", "Runs the grid and returns the report as JSON text.");
    m.def(
        "selection_table",
        [](const std::filesystem::path& manifest, const std::string& config_json) {
            auto cfg = experiment::ExperimentConfig::from_json(config_json.empty() ? "{}" : config_json);
            cfg.validate();
            const Cohort cohort = load_cohort(manifest);
            return experiment::selection_report(cohort, cfg.tasks, cfg.groups, cfg.kinds, cfg.alpha).to_csv();
        },
        py::arg("manifest"), py::arg("config_json") = "");
}
