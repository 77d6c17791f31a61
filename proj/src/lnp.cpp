#include "svem/lnp.hpp"

#include "svem/error.hpp"
#include "svem/rng.hpp"

#include <map>

namespace svem {

namespace {

const std::vector<std::string> kTypes{"H101", "H102", "H103"};

}  // namespace

MixtureGroup lnp_mixture_group() {
    MixtureGroup g;
    g.vars = {"PEG", "Helper", "Ionizable", "Cholesterol"};
    g.lower = {0.01, 0.10, 0.10, 0.10};
    g.upper = {0.05, 0.60, 0.60, 0.60};
    g.total = 1.0;
    return g;
}

LnpTruth lnp_truth(const Dataset& d) {
    const auto& peg = d.numeric("PEG");
    const auto& helper = d.numeric("Helper");
    const auto& ion = d.numeric("Ionizable");
    const auto& np = d.numeric("N_P_ratio");
    const auto& flow = d.numeric("flow_rate");
    const auto& type = d.column("Ionizable_Lipid_Type").labels;
    const auto& op = d.column("Operator").labels;
    static const std::map<std::string, double> type_potency{{"H101", 2.0}, {"H102", 0.0}, {"H103", -5.0}};
    static const std::map<std::string, double> type_size{{"H101", 0.0}, {"H102", -6.0}, {"H103", 4.0}};
    LnpTruth t;
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        // coded units on [-1, 1]
        const double p = (peg[i] - 0.03) / 0.02;
        const double h = (helper[i] - 0.35) / 0.25;
        const double z = (ion[i] - 0.35) / 0.25;
        const double n = (np[i] - 8.0) / 4.0;
        const double f = (flow[i] - 2.0) / 1.0;
        const double block = op[i] == "B" ? 1.5 : 0.0;
        t.potency.push_back(84.0 + 5.0 * n - 4.0 * n * n + 6.0 * z - 3.0 * z * z - 2.0 * p +
                            type_potency.at(type[i]) + block);
        t.size.push_back(85.0 - 14.0 * f - 9.0 * h + 6.0 * p + 5.0 * z * f + 4.0 * f * f + type_size.at(type[i]) +
                         0.5 * block);
        t.pdi.push_back(0.18);
    }
    return t;
}

Dataset gen_lnp(const LnpOptions& o) {
    if (o.n_runs < 12) throw ConfigError("gen-lnp needs at least 12 runs");
    if (!(o.noise_scale >= 0.0)) throw ConfigError("noise_scale must be non-negative");
    Rng rng(o.seed);
    const auto mix = sample_mixture(lnp_mixture_group(), o.n_runs, rng);
    Dataset d;
    const char* names[] = {"PEG", "Helper", "Ionizable", "Cholesterol"};
    for (std::size_t c = 0; c < 4; ++c) {
        std::vector<double> v;
        for (const auto& row : mix) v.push_back(row[c]);
        d.add_numeric(names[c], std::move(v));
    }
    std::vector<std::string> type(o.n_runs), op(o.n_runs);
    for (std::size_t i = 0; i < o.n_runs; ++i) type[i] = kTypes[i % 3];
    rng.shuffle(type);
    d.add_categorical("Ionizable_Lipid_Type", std::move(type), kTypes);
    std::vector<double> np(o.n_runs), flow(o.n_runs);
    for (auto& v : np) v = rng.uniform(4.0, 12.0);
    for (auto& v : flow) v = rng.uniform(1.0, 3.0);
    d.add_numeric("N_P_ratio", std::move(np));
    d.add_numeric("flow_rate", std::move(flow));
    // operators alternate over run order
    for (std::size_t i = 0; i < o.n_runs; ++i) op[i] = i % 2 == 0 ? "A" : "B";
    d.add_categorical("Operator", std::move(op), {"A", "B"});

    const LnpTruth t = lnp_truth(d);
    std::vector<double> potency, size, pdi;
    for (std::size_t i = 0; i < o.n_runs; ++i) {
        potency.push_back(t.potency[i] + o.noise_scale * 2.0 * rng.normal());
        size.push_back(t.size[i] + o.noise_scale * 4.0 * rng.normal());
        pdi.push_back(t.pdi[i] + o.noise_scale * 0.03 * rng.normal());
    }
    d.add_numeric("Potency", std::move(potency));
    d.add_numeric("Size", std::move(size));
    d.add_numeric("PDI", std::move(pdi));
    return d;
}

}  // namespace svem
