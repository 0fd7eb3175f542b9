#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pairvoice/features.hpp"

namespace pairvoice {

enum class TestKind { paired, independent };

std::string to_string(TestKind k);
// Accepts "paired"/"pair" and "independent"/"ind".
TestKind parse_test_kind(std::string_view s);

struct TTestResult {
    double t_stat = 0.0;
    double dof = 0.0;
    double p_two_sided = 1.0;
    TestKind kind = TestKind::paired;
};

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
// NumericalError if the fraction fails to converge to 1e-12 in 300 terms.
double incomplete_beta(double a, double b, double x);

// Two-sided Student-t tail probability P(|T| >= |t|) for `dof` degrees of freedom.
double student_t_p(double t, double dof);

TTestResult paired_ttest(std::span<const double> x, std::span<const double> y);
TTestResult one_sample_ttest(std::span<const double> d, double mu = 0.0);
// Welch form with Welch-Satterthwaite degrees of freedom.
TTestResult independent_ttest(std::span<const double> x, std::span<const double> y);

struct SelectionMask {
    std::vector<std::string> names;
    std::vector<bool> selected;
    std::vector<double> p_values;  // 1 for degenerate features
    std::vector<double> t_stats;
    std::vector<bool> degenerate;
    double alpha = 0.05;
    TestKind kind = TestKind::paired;

    std::size_t count() const;
    std::size_t degenerate_count() const;
    std::vector<std::string> selected_names() const;
    std::vector<std::size_t> selected_indices() const;
};

// Per-feature test between wet and dry vectors. For the paired kind the two
// sets are aligned by patient_id and must cover the same patients.
// Degenerate features are left unselected. alpha <= 0 selects nothing.
SelectionMask select_features(std::span<const FeatureVector> wet, std::span<const FeatureVector> dry, TestKind kind,
                              double alpha = 0.05);

// Mask restricted to a fixed list of names (for applying a stored mask file).
SelectionMask mask_from_names(const std::vector<std::string>& all_names, const std::vector<std::string>& chosen,
                              TestKind kind, double alpha);

// Counts laid out as rows (feature set, sex, test kind) by task columns.
struct SelectionReport {
    struct Key {
        std::string feature_set;
        std::string sex;
        TestKind kind;
        Task task;
        auto operator<=>(const Key&) const = default;
    };
    std::map<Key, std::optional<std::size_t>> cells;

    void add(const std::string& feature_set, const std::string& sex, TestKind kind, Task task,
             std::optional<std::size_t> count);
    // Absent or empty cells render as "-".
    std::string to_csv() const;
    std::string to_json() const;
};

}  // namespace pairvoice
