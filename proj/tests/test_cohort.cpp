#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "pairvoice/cohort.hpp"
#include "pairvoice/errors.hpp"
#include "test_helpers.hpp"

using namespace pairvoice;

namespace {

const std::vector<std::string> kNames{"a", "b", "c"};

FeatureVector vec(const std::string& id, Task t, Condition c, std::vector<double> v) {
    FeatureVector f;
    f.values = std::move(v);
    f.names = kNames;
    f.valid.assign(f.values.size(), true);
    f.ref = RecordingRef{id, t, c};
    return f;
}

// n patients, the first n_female female, pg task, both conditions unless wet_only.
Cohort make_cohort(std::size_t n, std::size_t n_female, std::uint64_t seed = 1, std::set<std::size_t> wet_only = {}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::string manifest = "patient_id,sex,task,condition,source\n";
    std::vector<FeatureVector> vectors;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = "P" + std::to_string(100 + i);
        const std::string sex = i < n_female ? "f" : "m";
        manifest += id + "," + sex + ",pg,wet,x.csv\n";
        vectors.push_back(vec(id, Task::pg, Condition::wet, {nd(rng) + 1, nd(rng), nd(rng)}));
        if (!wet_only.count(i)) {
            manifest += id + "," + sex + ",pg,dry,x.csv\n";
            vectors.push_back(vec(id, Task::pg, Condition::dry, {nd(rng), nd(rng), nd(rng)}));
        }
    }
    return assemble_cohort(parse_manifest(manifest), vectors);
}

SelectionMask all_selected() { return mask_from_names(kNames, kNames, TestKind::paired, 0.05); }

}  // namespace

TEST_CASE("manifest parsing") {
    const Manifest m = parse_manifest(
        "patient_id,sex,task,condition,source\n"
        "P1,F,pg,WET,a.wav\nP1,F,pg,dry,b.wav\nP2,male,pg,wet,c.wav\nP2,m,pg,Dry,d.wav\nP3,m,pg,wet,e.wav\n",
        "/data");
    REQUIRE(m.patients.size() == 3);
    CHECK(m.patients[0].sex == Sex::female);
    CHECK(m.patients[0].complete(Task::pg));
    CHECK_FALSE(m.patients[2].complete(Task::pg));
    CHECK(m.pairwise_eligible(Task::pg) == 2);
    CHECK(m.resolve("a.wav") == std::filesystem::path("/data/a.wav"));

    CHECK_THROWS_AS(parse_manifest("patient_id,sex,task,condition,source\nP1,f,pg,wet,a\nP1,f,pg,wet,b\n"),
                    DuplicateError);
    CHECK_THROWS_AS(parse_manifest("patient_id,sex,task,condition,source\nP1,f,pg,damp,a\n"), SchemaError);
    CHECK_THROWS_AS(parse_manifest("patient_id,sex,task,condition,source\nP1,f,zz,wet,a\n"), SchemaError);
    CHECK_THROWS_AS(parse_manifest("patient_id,sex,task,condition,source\nP1,f,pg,wet,a\nP1,m,pg,dry,b\n"),
                    SchemaError);
}

TEST_CASE("manifest write and reload") {
    testutil::TempDir dir("manifest");
    const std::vector<ManifestEntry> entries{{"P1", Sex::female, Task::mm, Condition::wet, "w.wav"},
                                             {"P1", Sex::female, Task::mm, Condition::dry, "d.wav"}};
    write_manifest(dir / "m.csv", entries);
    const Manifest m = load_manifest(dir / "m.csv");
    REQUIRE(m.entries.size() == 2);
    CHECK(m.entries[1].condition == Condition::dry);
    CHECK(m.entries[1].task == Task::mm);
    CHECK(m.base_dir == dir.path());
}

TEST_CASE("cohort assembly") {
    const Cohort c = make_cohort(4, 2, 1, {3});
    REQUIRE(c.patients.size() == 4);
    CHECK(c.patients[0].task(Task::pg)->complete());
    CHECK_FALSE(c.patients[3].task(Task::pg)->complete());
    CHECK(c.patients[0].task(Task::mm) == nullptr);
    CHECK(c.feature_names() == kNames);
    CHECK_NOTHROW(c.check_consistent_names());
    CHECK_THROWS_AS(assemble_cohort(parse_manifest("patient_id,sex,task,condition,source\nPX,f,pg,wet,a\n"),
                                    std::vector<FeatureVector>{}),
                    SchemaError);
}

TEST_CASE("group filters") {
    const Cohort c = make_cohort(5, 3);
    CHECK(filter_group(c, Group::male).patients.size() == 2);
    CHECK(filter_group(c, Group::female).patients.size() == 3);
    CHECK(filter_group(c, Group::all).patients.size() == 5);
    std::set<std::string> uni;
    for (Group g : {Group::female, Group::male})
        for (const auto& p : filter_group(c, g).patients) uni.insert(p.patient_id);
    CHECK(uni.size() == 5);
    CHECK(restrict_to_task(c, Task::mm).patients.empty());
}

TEST_CASE("patient split") {
    const Cohort c = make_cohort(10, 4);
    const SplitPlan a = split_by_patient(c, 0.3, 42);
    CHECK(a.train_ids.size() == 7);
    CHECK(a.test_ids.size() == 3);
    for (const auto& id : a.test_ids) CHECK_FALSE(a.is_train(id));
    const SplitPlan b = split_by_patient(c, 0.3, 42);
    CHECK(a.train_ids == b.train_ids);
    CHECK(a.test_ids == b.test_ids);

    const SplitPlan back = SplitPlan::from_json(a.to_json());
    CHECK(back.train_ids == a.train_ids);
    CHECK(back.seed == 42);

    CHECK_THROWS_AS(split_by_patient(make_cohort(1, 1), 0.3, 0), InsufficientDataError);
    SplitPlan bad = a;
    bad.test_ids.push_back(bad.train_ids.front());
    CHECK_THROWS_AS(bad.check_disjoint(), InsufficientDataError);
}

TEST_CASE("split of a 107-patient cohort at ratio 0.31 gives 74 / 33") {
    // pg group sizes: 68 male and 39 female patients.
    const Cohort c = make_cohort(107, 39);
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        const SplitPlan s = split_by_patient(c, 0.31, seed);
        CHECK(s.train_ids.size() == 74);
        CHECK(s.test_ids.size() == 33);
        std::size_t female_test = 0;
        for (const auto& id : s.test_ids) female_test += c.find(id)->sex == Sex::female;
        // Sex balance within one patient of the cohort proportion.
        CHECK(std::abs(static_cast<double>(female_test) - 33.0 * 39.0 / 107.0) <= 1.0);
    }
}

TEST_CASE("split disjointness and stratification for random cohorts") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 60;
        const std::size_t nf = rng() % (n + 1);
        const double ratio = 0.1 + 0.8 * static_cast<double>(rng() % 1000) / 1000.0;
        const Cohort c = make_cohort(n, nf, trial);
        const SplitPlan s = split_by_patient(c, ratio, rng());
        CHECK_NOTHROW(s.check_disjoint());
        CHECK(s.train_ids.size() + s.test_ids.size() == n);
        std::size_t ft = 0;
        for (const auto& id : s.test_ids) ft += c.find(id)->sex == Sex::female;
        const double expect = static_cast<double>(s.test_ids.size()) * static_cast<double>(nf) / static_cast<double>(n);
        CHECK(std::abs(static_cast<double>(ft) - expect) <= 1.0);
    }
}

TEST_CASE("patient-wise data") {
    const Cohort c = make_cohort(12, 6);
    const SplitPlan s = split_by_patient(c, 0.3, 3);
    const PatientwiseData d = build_patientwise(c, s, all_selected(), Task::pg);
    CHECK(d.train.size() == 2 * s.train_ids.size());
    CHECK(d.test.size() == 2 * s.test_ids.size());
    for (std::size_t j = 0; j < 3; ++j) {
        double m = 0, v = 0;
        for (const auto& x : d.train) m += x.x[j];
        m /= static_cast<double>(d.train.size());
        for (const auto& x : d.train) v += (x.x[j] - m) * (x.x[j] - m);
        v /= static_cast<double>(d.train.size());
        CHECK(std::abs(m) < 1e-12);
        CHECK(std::abs(std::sqrt(v) - 1.0) < 1e-9);
    }
    double test_mean = 0;
    for (const auto& x : d.test) test_mean += x.x[0];
    CHECK(test_mean != 0.0);
    std::size_t wet = 0;
    for (const auto& x : d.train) wet += x.label;
    CHECK(wet == s.train_ids.size());
    for (const auto& x : d.test) CHECK(s.is_test(x.patient_id));

    SUBCASE("one training patient gives two points") {
        const Cohort two = make_cohort(2, 1);
        SplitPlan one;
        one.train_ids = {two.patients[0].patient_id};
        one.test_ids = {two.patients[1].patient_id};
        const auto d2 = build_patientwise(two, one, all_selected(), Task::pg);
        REQUIRE(d2.train.size() == 2);
        CHECK(d2.train[0].label + d2.train[1].label == 1);
    }
    CHECK_THROWS_AS(build_patientwise(c, s, mask_from_names(kNames, {}, TestKind::paired, 0.05), Task::pg),
                    InsufficientDataError);
}

TEST_CASE("pair samples") {
    const std::vector<double> a{1.0, 2.0}, b{0.5, 1.0};
    CHECK(make_pair_sample(a, b, 1).x == std::vector<double>{0.5, 1.0});
    CHECK(make_pair_sample(a, b, 0).x == std::vector<double>{-0.5, -1.0});
    for (int label : {0, 1})
        for (double x : make_pair_sample(a, a, label).x) CHECK(x == 0.0);

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> w(5), d(5);
        for (auto& x : w) x = u(rng);
        for (auto& x : d) x = u(rng);
        const auto p1 = make_pair_sample(w, d, 1).x, p0 = make_pair_sample(w, d, 0).x;
        for (std::size_t i = 0; i < 5; ++i) CHECK(p1[i] == -p0[i]);
    }
}

TEST_CASE("pair-wise data") {
    const Cohort c = make_cohort(20, 10, 2, {0, 5});
    const SplitPlan s = split_by_patient(c, 0.3, 9);
    const PairwiseData d = build_pairwise(c, s, all_selected(), Task::pg, 5);
    CHECK(d.train.size() + d.test.size() == 18);
    std::set<std::string> seen;
    for (const auto* side : {&d.train, &d.test})
        for (const auto& p : *side) {
            CHECK(seen.insert(p.patient_id).second);
            CHECK((p.label == 0 || p.label == 1));
        }
    const PairwiseData again = build_pairwise(c, s, all_selected(), Task::pg, 5);
    for (std::size_t i = 0; i < d.train.size(); ++i) CHECK(again.train[i].label == d.train[i].label);

    SUBCASE("no eligible patients") {
        const Cohort w = make_cohort(4, 2, 1, {0, 1, 2, 3});
        const SplitPlan sw = split_by_patient(w, 0.5, 0);
        CHECK_THROWS_AS(build_pairwise(w, sw, all_selected(), Task::pg, 0), InsufficientDataError);
    }
}

TEST_CASE("pair labels are balanced over seeds") {
    // A constant predictor (always 1) scores accuracy = share of label 1.
    const Cohort c = make_cohort(10, 5);
    const SplitPlan s = split_by_patient(c, 0.3, 0);
    std::size_t ones = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto d = build_pairwise(c, s, all_selected(), Task::pg, seed);
        for (const auto& p : d.test) {
            ones += p.label;
            ++total;
        }
    }
    CHECK(std::abs(static_cast<double>(ones) / static_cast<double>(total) - 0.5) < 0.05);
}

TEST_CASE("per-patient offsets leave pair samples bit-identical") {
    // Dyadic values keep every sum and difference exact.
    std::mt19937_64 rng(12);
    auto dyadic = [&] { return static_cast<double>(static_cast<int>(rng() % 2001) - 1000) / 64.0; };
    std::string manifest = "patient_id,sex,task,condition,source\n";
    std::vector<FeatureVector> base, shifted;
    for (int i = 0; i < 8; ++i) {
        const std::string id = "P" + std::to_string(i);
        manifest += id + ",f,pg,wet,x\n" + id + ",f,pg,dry,x\n";
        std::vector<double> w(3), d(3), off(3);
        for (std::size_t j = 0; j < 3; ++j) {
            w[j] = dyadic();
            d[j] = dyadic();
            off[j] = dyadic();
        }
        base.push_back(vec(id, Task::pg, Condition::wet, w));
        base.push_back(vec(id, Task::pg, Condition::dry, d));
        for (std::size_t j = 0; j < 3; ++j) {
            w[j] += off[j];
            d[j] += off[j];
        }
        shifted.push_back(vec(id, Task::pg, Condition::wet, w));
        shifted.push_back(vec(id, Task::pg, Condition::dry, d));
    }
    const Manifest m = parse_manifest(manifest);
    const Cohort c0 = assemble_cohort(m, base), c1 = assemble_cohort(m, shifted);
    const SplitPlan s = split_by_patient(c0, 0.25, 4);
    const auto p0 = build_pairwise(c0, s, all_selected(), Task::pg, 8);
    const auto p1 = build_pairwise(c1, s, all_selected(), Task::pg, 8);
    REQUIRE(p0.train.size() == p1.train.size());
    for (std::size_t i = 0; i < p0.train.size(); ++i) {
        CHECK(p0.train[i].x == p1.train[i].x);
        CHECK(p0.train[i].label == p1.train[i].label);
    }
    for (std::size_t i = 0; i < p0.test.size(); ++i) CHECK(p0.test[i].x == p1.test[i].x);
}

TEST_CASE("condition sets") {
    const Cohort c = make_cohort(6, 3, 1, {2});
    const auto all = condition_sets(c, Task::pg, nullptr, false);
    CHECK(all.wet.size() == 6);
    CHECK(all.dry.size() == 5);
    const auto paired = condition_sets(c, Task::pg, nullptr, true);
    CHECK(paired.wet.size() == 5);
    const std::vector<std::string> only{"P100", "P101"};
    CHECK(condition_sets(c, Task::pg, &only, true).dry.size() == 2);
}
