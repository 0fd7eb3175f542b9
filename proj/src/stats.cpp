#include "pairvoice/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "pairvoice/csv.hpp"

namespace pairvoice {

std::string to_string(TestKind k) { return k == TestKind::paired ? "paired" : "independent"; }

TestKind parse_test_kind(std::string_view s) {
    const std::string t = csv::lower(csv::trim(s));
    if (t == "paired" || t == "pair") return TestKind::paired;
    if (t == "independent" || t == "ind") return TestKind::independent;
    throw ConfigError("unknown t-test kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- distributions

namespace {

constexpr int kMaxIterations = 300;
constexpr double kTolerance = 1e-12;
constexpr double kTiny = 1e-300;

double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kTolerance) return h;
    }
    throw NumericalError("incomplete beta: continued fraction did not converge (a=" + std::to_string(a) +
                         ", b=" + std::to_string(b) + ", x=" + std::to_string(x) + ")");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw NumericalError("incomplete beta: parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw NumericalError("incomplete beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_p(double t, double dof) {
    if (!(dof > 0.0)) throw ConfigError("student_t_p: dof must be positive");
    if (std::isnan(t)) throw NumericalError("student_t_p: t is NaN");
    if (std::isinf(t)) return 0.0;
    if (t == 0.0) return 1.0;
    const double t2 = t * t;
    // Evaluate on whichever side keeps the continued fraction short.
    const double x = dof / (dof + t2);
    double p;
    if (x > 0.5) p = 1.0 - incomplete_beta(0.5, dof / 2.0, t2 / (dof + t2));
    else p = incomplete_beta(dof / 2.0, 0.5, x);
    return std::clamp(p, 0.0, 1.0);
}

// ---------------------------------------------------------------- t-tests

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;  // sample (n - 1) variance
    std::size_t n = 0;
};

Moments moments(std::span<const double> v) {
    Moments m;
    m.n = v.size();
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(m.n);
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.var = m.n > 1 ? ss / static_cast<double>(m.n - 1) : 0.0;
    return m;
}

bool all_equal(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

TTestResult one_sample_ttest(std::span<const double> d, double mu) {
    if (d.size() < 2) throw InsufficientDataError("t-test needs at least 2 observations");
    if (all_equal(d)) throw DegenerateError("t-test: zero-variance sample");
    const Moments m = moments(d);
    TTestResult r;
    r.kind = TestKind::paired;
    r.dof = static_cast<double>(m.n - 1);
    r.t_stat = (m.mean - mu) / std::sqrt(m.var / static_cast<double>(m.n));
    r.p_two_sided = student_t_p(r.t_stat, r.dof);
    return r;
}

TTestResult paired_ttest(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ShapeError("paired t-test: samples differ in length");
    if (x.size() < 2) throw InsufficientDataError("paired t-test needs at least 2 pairs");
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - y[i];
    return one_sample_ttest(d);
}

TTestResult independent_ttest(std::span<const double> x, std::span<const double> y) {
    if (x.size() < 2 || y.size() < 2) throw InsufficientDataError("independent t-test needs 2+ per group");
    const Moments mx = moments(x), my = moments(y);
    const double vx = mx.var / static_cast<double>(mx.n);
    const double vy = my.var / static_cast<double>(my.n);
    const double se2 = vx + vy;
    TTestResult r;
    r.kind = TestKind::independent;
    if (se2 == 0.0) {
        if (mx.mean == my.mean) throw DegenerateError("independent t-test: both groups constant and equal");
        r.t_stat = mx.mean > my.mean ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity();
        r.dof = static_cast<double>(mx.n + my.n - 2);
        r.p_two_sided = 0.0;
        return r;
    }
    r.t_stat = (mx.mean - my.mean) / std::sqrt(se2);
    r.dof = se2 * se2 / (vx * vx / static_cast<double>(mx.n - 1) + vy * vy / static_cast<double>(my.n - 1));
    r.p_two_sided = student_t_p(r.t_stat, r.dof);
    return r;
}

// ---------------------------------------------------------------- selection

std::size_t SelectionMask::count() const { return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true)); }

std::size_t SelectionMask::degenerate_count() const {
    return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), true));
}

std::vector<std::string> SelectionMask::selected_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < names.size(); ++i)
        if (selected[i]) out.push_back(names[i]);
    return out;
}

std::vector<std::size_t> SelectionMask::selected_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < names.size(); ++i)
        if (selected[i]) out.push_back(i);
    return out;
}

namespace {

const std::vector<std::string>& common_names(std::span<const FeatureVector> wet, std::span<const FeatureVector> dry) {
    const FeatureVector* first = !wet.empty() ? &wet.front() : (!dry.empty() ? &dry.front() : nullptr);
    if (!first) throw InsufficientDataError("feature selection: no vectors");
    for (auto set : {wet, dry})
        for (const auto& fv : set)
            if (fv.names != first->names)
                throw SchemaError("feature selection: vector for patient '" + fv.ref.patient_id +
                                  "' has a different feature name set");
    return first->names;
}

}  // namespace

SelectionMask select_features(std::span<const FeatureVector> wet, std::span<const FeatureVector> dry, TestKind kind,
                              double alpha) {
    const auto& names = common_names(wet, dry);
    const std::size_t nf = names.size();

    // Row-aligned sample matrices, one column per feature.
    std::vector<const FeatureVector*> a, b;
    if (kind == TestKind::paired) {
        std::unordered_map<std::string, const FeatureVector*> by_id;
        for (const auto& fv : dry)
            if (!by_id.emplace(fv.ref.patient_id, &fv).second)
                throw AlignmentError("paired selection: patient '" + fv.ref.patient_id + "' appears twice (dry)");
        std::set<std::string> wet_ids;
        for (const auto& fv : wet) {
            if (!wet_ids.insert(fv.ref.patient_id).second)
                throw AlignmentError("paired selection: patient '" + fv.ref.patient_id + "' appears twice (wet)");
            auto it = by_id.find(fv.ref.patient_id);
            if (it == by_id.end())
                throw AlignmentError("paired selection: patient '" + fv.ref.patient_id + "' has no dry vector");
            a.push_back(&fv);
            b.push_back(it->second);
        }
        if (wet.size() != dry.size())
            throw AlignmentError("paired selection: wet and dry cover different patient sets");
    } else {
        for (const auto& fv : wet) a.push_back(&fv);
        for (const auto& fv : dry) b.push_back(&fv);
    }

    SelectionMask mask;
    mask.names = names;
    mask.alpha = alpha;
    mask.kind = kind;
    mask.selected.assign(nf, false);
    mask.p_values.assign(nf, 1.0);
    mask.t_stats.assign(nf, 0.0);
    mask.degenerate.assign(nf, false);

    std::vector<double> xa(a.size()), xb(b.size());
    for (std::size_t f = 0; f < nf; ++f) {
        for (std::size_t i = 0; i < a.size(); ++i) xa[i] = a[i]->values[f];
        for (std::size_t i = 0; i < b.size(); ++i) xb[i] = b[i]->values[f];
        try {
            const TTestResult r = kind == TestKind::paired ? paired_ttest(xa, xb) : independent_ttest(xa, xb);
            mask.p_values[f] = r.p_two_sided;
            mask.t_stats[f] = r.t_stat;
            mask.selected[f] = alpha > 0.0 && r.p_two_sided <= alpha;
        } catch (const DegenerateError&) {
            mask.degenerate[f] = true;
        }
    }
    return mask;
}

SelectionMask mask_from_names(const std::vector<std::string>& all_names, const std::vector<std::string>& chosen,
                              TestKind kind, double alpha) {
    SelectionMask m;
    m.names = all_names;
    m.kind = kind;
    m.alpha = alpha;
    m.selected.assign(all_names.size(), false);
    m.p_values.assign(all_names.size(), 1.0);
    m.t_stats.assign(all_names.size(), 0.0);
    m.degenerate.assign(all_names.size(), false);
    for (const auto& c : chosen) {
        auto it = std::find(all_names.begin(), all_names.end(), c);
        if (it == all_names.end()) throw SchemaError("mask names feature '" + c + "' which is not in the feature set");
        m.selected[static_cast<std::size_t>(it - all_names.begin())] = true;
    }
    return m;
}

// ---------------------------------------------------------------- report

void SelectionReport::add(const std::string& feature_set, const std::string& sex, TestKind kind, Task task,
                          std::optional<std::size_t> count) {
    cells[Key{feature_set, sex, kind, task}] = count;
}

namespace {

constexpr Task kAllTasks[] = {Task::pg, Task::mm, Task::mlh, Task::c};

struct RowKey {
    std::string feature_set, sex;
    TestKind kind;
    auto operator<=>(const RowKey&) const = default;
};

std::vector<RowKey> row_keys(const SelectionReport& rep) {
    std::set<RowKey> rows;
    for (const auto& [k, v] : rep.cells) rows.insert({k.feature_set, k.sex, k.kind});
    return {rows.begin(), rows.end()};
}

std::string short_kind(TestKind k) { return k == TestKind::paired ? "pair" : "ind"; }

}  // namespace

std::string SelectionReport::to_csv() const {
    std::string out = "feature_set,sex,t_test,pg,mm,mlh,c\n";
    for (const auto& r : row_keys(*this)) {
        csv::Row row{r.feature_set, r.sex, short_kind(r.kind)};
        for (Task t : kAllTasks) {
            auto it = cells.find(Key{r.feature_set, r.sex, r.kind, t});
            row.push_back(it == cells.end() || !it->second ? "-" : std::to_string(*it->second));
        }
        out += csv::join(row) + "\n";
    }
    return out;
}

std::string SelectionReport::to_json() const {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : row_keys(*this)) {
        nlohmann::ordered_json row;
        row["feature_set"] = r.feature_set;
        row["sex"] = r.sex;
        row["t_test"] = short_kind(r.kind);
        nlohmann::ordered_json counts;
        for (Task t : kAllTasks) {
            auto it = cells.find(Key{r.feature_set, r.sex, r.kind, t});
            if (it == cells.end() || !it->second) counts[to_string(t)] = nullptr;
            else counts[to_string(t)] = *it->second;
        }
        row["counts"] = counts;
        rows.push_back(row);
    }
    nlohmann::ordered_json doc;
    doc["rows"] = rows;
    return doc.dump(2);
}

}  // namespace pairvoice
