#pragma once

#include "svem/dataset.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace svem {

/// Contrast coding for categorical factors. Models always use treatment
/// (reference = first sorted level); sum-to-zero coding exists for the
/// simulation truth surface.
enum class ContrastCoding { treatment, sum };

struct FactorInfo {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    bool blocking = false;
    std::vector<std::string> levels;  // sorted; levels[0] is the reference
    std::string mode_level;           // most frequent training level
    double min = 0.0;
    double max = 0.0;

    std::size_t contrast_columns() const { return kind == ColumnKind::numeric ? 1 : levels.size() - 1; }
};

/// One factor inside a term: a numeric factor raised to `power`, or the
/// `contrast`-th contrast column of a categorical factor.
struct TermComponent {
    std::size_t factor = 0;
    int power = 1;
    std::size_t contrast = 0;

    friend bool operator==(const TermComponent&, const TermComponent&) = default;
    friend auto operator<=>(const TermComponent&, const TermComponent&) = default;
};

struct Term {
    std::vector<TermComponent> parts;  // empty for the intercept
    std::string name;

    friend bool operator==(const Term&, const Term&) = default;
};

struct ExpansionOptions {
    std::vector<std::string> main_effects;
    std::vector<std::string> blocking;
    int factorial_order = 2;
    int polynomial_order = 2;
    bool include_pc_2way = false;
    ContrastCoding coding = ContrastCoding::treatment;
};

/// Frozen recipe mapping main-effect factors onto an ordered set of model
/// columns. The term list is a pure function of the options and the recorded
/// factor metadata.
struct ExpansionSpec {
    ExpansionOptions options;
    std::vector<FactorInfo> factors;  // main effects in order, then blocking factors
    std::vector<Term> terms;          // terms[0] is the intercept

    const FactorInfo& factor(const std::string& name) const;
    std::vector<std::string> column_names() const;
};

struct DesignMatrix {
    std::vector<std::string> column_names;
    Eigen::MatrixXd values;  // n x p_full, column 0 is the intercept

    std::size_t p_full() const { return static_cast<std::size_t>(values.cols()); }
    std::size_t n_rows() const { return static_cast<std::size_t>(values.rows()); }
};

ExpansionSpec build_expansion_spec(const Dataset& data, const ExpansionOptions& options);

/// Re-derives the ordered term list from factor metadata and options.
std::vector<Term> derive_terms(const std::vector<FactorInfo>& factors, const ExpansionOptions& options);

DesignMatrix expand_rows(const ExpansionSpec& spec, const Dataset& data);

std::size_t term_count(const ExpansionSpec& spec);

}  // namespace svem
