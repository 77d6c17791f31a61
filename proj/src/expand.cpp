#include "svem/expand.hpp"

#include "svem/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

namespace svem {

namespace {

void check_options(const ExpansionOptions& options) {
    if (options.factorial_order < 1 || options.polynomial_order < 1) {
        throw ConfigError("factorial_order and polynomial_order must be >= 1");
    }
    if (options.main_effects.empty()) throw ConfigError("at least one main effect is required");
    std::set<std::string> seen;
    for (const auto& name : options.main_effects) {
        if (!seen.insert(name).second) throw ConfigError("duplicate main effect '" + name + "'");
    }
    for (const auto& name : options.blocking) {
        if (!seen.insert(name).second) {
            throw ConfigError("factor '" + name + "' listed as both main effect and blocking (or twice)");
        }
    }
}

FactorInfo describe_factor(const Dataset& data, const std::string& name, bool blocking) {
    if (!data.has(name)) throw DataError("unknown factor '" + name + "'");
    const Column& col = data.column(name);
    FactorInfo info;
    info.name = name;
    info.kind = col.kind;
    info.blocking = blocking;
    if (col.kind == ColumnKind::numeric) {
        if (col.numbers.empty()) throw DataError("factor '" + name + "' has no rows");
        for (double v : col.numbers) {
            if (!std::isfinite(v)) throw DataError("factor '" + name + "' has missing or non-finite values");
        }
        const auto [lo, hi] = std::minmax_element(col.numbers.begin(), col.numbers.end());
        info.min = *lo;
        info.max = *hi;
        if (!(info.max > info.min)) throw DataError("numeric factor '" + name + "' is constant (zero range)");
    } else {
        std::map<std::string, std::size_t> counts;
        for (const auto& label : col.labels) ++counts[label];
        for (const auto& [label, count] : counts) info.levels.push_back(label);
        if (info.levels.size() < 2) throw DataError("categorical factor '" + name + "' has fewer than 2 levels");
        std::size_t best = 0;
        for (const auto& [label, count] : counts) {
            if (count > best) {
                best = count;
                info.mode_level = label;
            }
        }
    }
    return info;
}

std::string component_name(const FactorInfo& f, const TermComponent& c, ContrastCoding coding) {
    if (f.kind == ColumnKind::numeric) {
        return c.power == 1 ? f.name : f.name + "^" + std::to_string(c.power);
    }
    const std::size_t level = coding == ContrastCoding::treatment ? c.contrast + 1 : c.contrast;
    return f.name + "[" + f.levels[level] + "]";
}

// Expands a product of factors (each at a given power) into one term per
// combination of categorical contrast columns.
void append_product(std::vector<Term>& out, const std::vector<FactorInfo>& factors,
                    const std::vector<std::pair<std::size_t, int>>& product, ContrastCoding coding) {
    std::vector<Term> partial{Term{}};
    for (const auto& [fi, power] : product) {
        const FactorInfo& f = factors[fi];
        std::vector<Term> next;
        for (const auto& t : partial) {
            for (std::size_t c = 0; c < f.contrast_columns(); ++c) {
                Term extended = t;
                extended.parts.push_back(TermComponent{fi, power, c});
                next.push_back(std::move(extended));
            }
        }
        partial = std::move(next);
    }
    for (auto& t : partial) {
        for (std::size_t i = 0; i < t.parts.size(); ++i) {
            if (i) t.name += ":";
            t.name += component_name(factors[t.parts[i].factor], t.parts[i], coding);
        }
        out.push_back(std::move(t));
    }
}

void combinations(std::size_t n, std::size_t k, std::size_t start, std::vector<std::size_t>& current,
                  std::vector<std::vector<std::size_t>>& out) {
    if (current.size() == k) {
        out.push_back(current);
        return;
    }
    for (std::size_t i = start; i < n; ++i) {
        current.push_back(i);
        combinations(n, k, i + 1, current, out);
        current.pop_back();
    }
}

}  // namespace

const FactorInfo& ExpansionSpec::factor(const std::string& name) const {
    for (const auto& f : factors) {
        if (f.name == name) return f;
    }
    throw DataError("factor '" + name + "' is not part of the expansion");
}

std::vector<std::string> ExpansionSpec::column_names() const {
    std::vector<std::string> names;
    names.reserve(terms.size());
    for (const auto& t : terms) names.push_back(t.name);
    return names;
}

std::vector<Term> derive_terms(const std::vector<FactorInfo>& factors, const ExpansionOptions& options) {
    const ContrastCoding coding = options.coding;
    std::vector<std::size_t> mains, numeric_mains, categorical_mains, blocks;
    for (std::size_t i = 0; i < factors.size(); ++i) {
        if (factors[i].blocking) {
            blocks.push_back(i);
        } else {
            mains.push_back(i);
            (factors[i].kind == ColumnKind::numeric ? numeric_mains : categorical_mains).push_back(i);
        }
    }

    std::vector<Term> terms;
    terms.push_back(Term{{}, "(Intercept)"});
    for (auto i : numeric_mains) append_product(terms, factors, {{i, 1}}, coding);
    for (auto i : categorical_mains) append_product(terms, factors, {{i, 1}}, coding);
    for (auto i : blocks) append_product(terms, factors, {{i, 1}}, coding);

    const auto max_order = std::min<std::size_t>(static_cast<std::size_t>(options.factorial_order), mains.size());
    for (std::size_t order = 2; order <= max_order; ++order) {
        std::vector<std::vector<std::size_t>> combos;
        std::vector<std::size_t> current;
        combinations(mains.size(), order, 0, current, combos);
        for (const auto& combo : combos) {
            std::vector<std::pair<std::size_t, int>> product;
            for (auto c : combo) product.emplace_back(mains[c], 1);
            append_product(terms, factors, product, coding);
        }
    }

    for (int power = 2; power <= options.polynomial_order; ++power) {
        for (auto i : numeric_mains) append_product(terms, factors, {{i, power}}, coding);
    }

    if (options.include_pc_2way) {
        for (auto x : numeric_mains) {
            for (auto z : mains) {
                if (z == x) continue;
                append_product(terms, factors, {{x, 2}, {z, 1}}, coding);
            }
        }
    }

    // drop repeated terms, keeping the first occurrence
    std::set<std::vector<TermComponent>> seen;
    std::vector<Term> unique;
    unique.reserve(terms.size());
    for (auto& t : terms) {
        auto signature = t.parts;
        std::sort(signature.begin(), signature.end());
        if (seen.insert(signature).second) unique.push_back(std::move(t));
    }
    return unique;
}

ExpansionSpec build_expansion_spec(const Dataset& data, const ExpansionOptions& options) {
    check_options(options);
    ExpansionSpec spec;
    spec.options = options;
    for (const auto& name : options.main_effects) spec.factors.push_back(describe_factor(data, name, false));
    for (const auto& name : options.blocking) spec.factors.push_back(describe_factor(data, name, true));
    spec.terms = derive_terms(spec.factors, options);
    return spec;
}

DesignMatrix expand_rows(const ExpansionSpec& spec, const Dataset& data) {
    const std::size_t n = data.n_rows();
    const ContrastCoding coding = spec.options.coding;

    // per-factor numeric values or level indices
    std::vector<const std::vector<double>*> numeric(spec.factors.size(), nullptr);
    std::vector<std::vector<std::size_t>> level_index(spec.factors.size());
    for (std::size_t fi = 0; fi < spec.factors.size(); ++fi) {
        const FactorInfo& f = spec.factors[fi];
        if (!data.has(f.name)) throw DataError("missing factor '" + f.name + "'");
        const Column& col = data.column(f.name);
        if (f.kind == ColumnKind::numeric) {
            if (col.kind != ColumnKind::numeric) throw DataError("factor '" + f.name + "' must be numeric");
            for (double v : col.numbers) {
                if (!std::isfinite(v)) throw DataError("factor '" + f.name + "' has missing or non-finite values");
            }
            numeric[fi] = &col.numbers;
        } else {
            std::unordered_map<std::string, std::size_t> lookup;
            for (std::size_t l = 0; l < f.levels.size(); ++l) lookup.emplace(f.levels[l], l);
            auto& idx = level_index[fi];
            idx.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::string label =
                    col.kind == ColumnKind::categorical ? col.labels[i] : format_double(col.numbers[i]);
                auto it = lookup.find(label);
                if (it == lookup.end()) {
                    throw DataError("unseen level '" + label + "' for factor '" + f.name + "'");
                }
                idx.push_back(it->second);
            }
        }
    }

    DesignMatrix out;
    out.column_names = spec.column_names();
    out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.terms.size()));
    for (std::size_t j = 0; j < spec.terms.size(); ++j) {
        const Term& term = spec.terms[j];
        auto col = out.values.col(static_cast<Eigen::Index>(j));
        col.setOnes();
        for (const auto& part : term.parts) {
            const FactorInfo& f = spec.factors[part.factor];
            for (std::size_t i = 0; i < n; ++i) {
                double v;
                if (f.kind == ColumnKind::numeric) {
                    const double x = (*numeric[part.factor])[i];
                    v = part.power == 1 ? x : std::pow(x, part.power);
                } else {
                    const std::size_t level = level_index[part.factor][i];
                    if (coding == ContrastCoding::treatment) {
                        v = level == part.contrast + 1 ? 1.0 : 0.0;
                    } else {
                        v = level == part.contrast ? 1.0 : (level + 1 == f.levels.size() ? -1.0 : 0.0);
                    }
                }
                col[static_cast<Eigen::Index>(i)] *= v;
            }
        }
    }
    return out;
}

std::size_t term_count(const ExpansionSpec& spec) { return spec.terms.size(); }

}  // namespace svem
