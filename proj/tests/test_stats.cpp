#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pairvoice/errors.hpp"
#include "pairvoice/stats.hpp"

using namespace pairvoice;

namespace {

double t_density(double x, double nu) {
    const double logc = std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * std::numbers::pi);
    return std::exp(logc - (nu + 1) / 2 * std::log1p(x * x / nu));
}

// Two-sided tail by trapezoid integration of the density over [0, |t|].
double t_p_oracle(double t, double nu) {
    const double a = std::abs(t);
    if (a == 0.0) return 1.0;
    const int n = 200000;
    const double h = a / n;
    double s = 0.5 * (t_density(0, nu) + t_density(a, nu));
    for (int i = 1; i < n; ++i) s += t_density(i * h, nu);
    return 1.0 - 2.0 * s * h;
}

FeatureVector fv(const std::string& pid, Condition c, std::vector<double> values, std::vector<std::string> names) {
    FeatureVector v;
    v.values = std::move(values);
    v.names = std::move(names);
    v.valid.assign(v.values.size(), true);
    v.ref = RecordingRef{pid, Task::pg, c};
    return v;
}

}  // namespace

TEST_CASE("student_t_p special values") {
    for (double nu : {1.0, 3.0, 50.0}) CHECK(student_t_p(0.0, nu) == 1.0);
    CHECK(student_t_p(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(student_t_p(1.96, 1e6) - 0.05) < 1e-3);
    CHECK(std::abs(student_t_p(1.96, 1e6) - std::erfc(1.96 / std::sqrt(2.0))) < 1e-5);
}

TEST_CASE("student_t_p agrees with trapezoid integration") {
    for (double nu : {1.0, 2.0, 5.0, 10.0, 30.0})
        for (double t = -5.0; t <= 5.0; t += 0.25) {
            CAPTURE(nu);
            CAPTURE(t);
            CHECK(std::abs(student_t_p(t, nu) - t_p_oracle(t, nu)) < 1e-6);
        }
}

TEST_CASE("student_t_p symmetry and monotonicity") {
    for (double nu : {1.0, 4.0, 17.5}) {
        double prev = 1.0 + 1e-12;
        for (double t = 0.0; t <= 8.0; t += 0.1) {
            const double p = student_t_p(t, nu);
            CHECK(p == student_t_p(-t, nu));
            CHECK(p < prev);
            prev = p;
        }
    }
    CHECK_THROWS_AS(student_t_p(1.0, 0.0), ConfigError);
}

TEST_CASE("incomplete beta against closed forms") {
    // I_x(1, b) = 1 - (1-x)^b and I_x(a, 1) = x^a.
    for (double x : {0.1, 0.5, 0.9}) {
        CHECK(incomplete_beta(1.0, 3.0, x) == doctest::Approx(1.0 - std::pow(1.0 - x, 3.0)).epsilon(1e-12));
        CHECK(incomplete_beta(2.5, 1.0, x) == doctest::Approx(std::pow(x, 2.5)).epsilon(1e-12));
    }
    CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
}

TEST_CASE("paired t-test") {
    const std::vector<double> x1{2, 4, 6}, y1{1, 3, 8};
    const auto r1 = paired_ttest(x1, y1);
    CHECK(r1.t_stat == doctest::Approx(0.0));
    CHECK(r1.p_two_sided == doctest::Approx(1.0));

    CHECK_THROWS_AS(paired_ttest(x1, x1), DegenerateError);
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(paired_ttest(one, one), InsufficientDataError);

    const std::vector<double> x{1, 2, 3, 4}, y{0, 0, 0, 0};
    const auto r = paired_ttest(x, y);
    const double sd = std::sqrt(5.0 / 3.0);
    CHECK(r.t_stat == doctest::Approx(2.5 / (sd / 2.0)));
    CHECK(r.t_stat == doctest::Approx(3.873).epsilon(1e-4));
    CHECK(r.dof == 3.0);
    CHECK(std::abs(r.p_two_sided - t_p_oracle(r.t_stat, 3.0)) < 1e-6);
    CHECK(std::abs(r.p_two_sided - 0.0305) < 5e-4);
}

TEST_CASE("paired equals one-sample on differences") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0.3, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(12), y(12), d(12);
        for (std::size_t i = 0; i < 12; ++i) {
            x[i] = nd(rng);
            y[i] = nd(rng) - 0.2;
            d[i] = x[i] - y[i];
        }
        const auto a = paired_ttest(x, y), b = one_sample_ttest(d);
        CHECK(std::abs(a.t_stat - b.t_stat) < 1e-12);
        CHECK(std::abs(a.p_two_sided - b.p_two_sided) < 1e-12);
    }
}

TEST_CASE("Welch t-test") {
    const std::vector<double> same{1, 2, 3};
    const auto r0 = independent_ttest(same, same);
    CHECK(r0.t_stat == 0.0);
    CHECK(r0.p_two_sided == doctest::Approx(1.0));

    const std::vector<double> x{1, 2, 3, 4, 5}, y{3, 4, 5, 6, 7};
    const auto r = independent_ttest(x, y);
    CHECK(r.t_stat == doctest::Approx(-2.0));
    CHECK(r.dof == doctest::Approx(8.0));
    CHECK(std::abs(r.p_two_sided - t_p_oracle(-2.0, 8.0)) < 1e-6);
    CHECK(std::abs(r.p_two_sided - 0.0805) < 5e-4);

    const auto s = independent_ttest(y, x);
    CHECK(s.t_stat == -r.t_stat);
    CHECK(s.p_two_sided == r.p_two_sided);

    const std::vector<double> c{2, 2, 2};
    CHECK_THROWS_AS(independent_ttest(c, c), DegenerateError);
}

TEST_CASE("feature selection") {
    const std::vector<std::string> names{"shifted", "noise", "constant"};
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<FeatureVector> wet, dry;
    for (int p = 0; p < 30; ++p) {
        const std::string id = "P" + std::to_string(p);
        const double n0 = nd(rng), n1 = nd(rng);
        dry.push_back(fv(id, Condition::dry, {nd(rng), n0, 1.0}, names));
        wet.push_back(fv(id, Condition::wet, {5.0 + nd(rng), n1, 1.0}, names));
    }
    for (TestKind kind : {TestKind::paired, TestKind::independent}) {
        const auto mask = select_features(wet, dry, kind);
        CHECK(mask.selected[0]);
        CHECK(mask.count() >= 1);
        CHECK(mask.degenerate[2]);
        CHECK_FALSE(mask.selected[2]);
        CHECK(mask.degenerate_count() == 1);
        const auto all = select_features(wet, dry, kind, 1.0);
        CHECK(all.count() == 2);
        CHECK(select_features(wet, dry, kind, 0.0).count() == 0);
    }

    SUBCASE("identical conditions select nothing") {
        std::vector<FeatureVector> copy = dry;
        for (auto& v : copy) v.ref.condition = Condition::wet;
        CHECK(select_features(copy, dry, TestKind::paired).count() == 0);
        CHECK(select_features(copy, dry, TestKind::independent).count() == 0);
    }
    SUBCASE("misaligned patients") {
        std::vector<FeatureVector> w = wet;
        w.back().ref.patient_id = "stranger";
        CHECK_THROWS_AS(select_features(w, dry, TestKind::paired), AlignmentError);
        CHECK_NOTHROW(select_features(w, dry, TestKind::independent));
    }
    SUBCASE("name mismatch") {
        std::vector<FeatureVector> w = wet;
        w[0].names[1] = "other";
        CHECK_THROWS_AS(select_features(w, dry, TestKind::independent), SchemaError);
    }
}

TEST_CASE("paired selection beats independent under speaker offsets") {
    // Effect 1 on the first half of the features, speaker offsets with sd 3.
    const std::size_t n_feat = 20;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n_feat; ++i) names.push_back("f" + std::to_string(i));
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<FeatureVector> wet, dry;
    for (int p = 0; p < 40; ++p) {
        std::vector<double> w(n_feat), d(n_feat);
        for (std::size_t i = 0; i < n_feat; ++i) {
            const double speaker = 3.0 * nd(rng);
            d[i] = speaker + 0.3 * nd(rng);
            w[i] = speaker + (i < n_feat / 2 ? 1.0 : 0.0) + 0.3 * nd(rng);
        }
        wet.push_back(fv("P" + std::to_string(p), Condition::wet, w, names));
        dry.push_back(fv("P" + std::to_string(p), Condition::dry, d, names));
    }
    const auto paired = select_features(wet, dry, TestKind::paired);
    const auto ind = select_features(wet, dry, TestKind::independent);
    CHECK(paired.count() >= ind.count());
    CHECK(paired.count() >= n_feat / 2);
}

TEST_CASE("selection report layout") {
    SelectionReport rep;
    rep.add("all", "female", TestKind::paired, Task::pg, 3);
    rep.add("all", "female", TestKind::paired, Task::mm, std::nullopt);
    const std::string csv = rep.to_csv();
    CHECK(csv.find("feature_set,sex,t_test,pg,mm,mlh,c") == 0);
    CHECK(csv.find("all,female,pair,3,-,-,-") != std::string::npos);
    CHECK(rep.to_json().find("\"pg\": 3") != std::string::npos);
}

TEST_CASE("mask from names") {
    const auto m = mask_from_names({"a", "b", "c"}, {"c", "a"}, TestKind::paired, 0.05);
    CHECK(m.selected == std::vector<bool>{true, false, true});
    CHECK(m.selected_names() == std::vector<std::string>{"a", "c"});
    CHECK_THROWS(mask_from_names({"a"}, {"z"}, TestKind::paired, 0.05));
}
