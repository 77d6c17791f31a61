#pragma once

#include "svem/dataset.hpp"
#include "svem/optimize.hpp"

#include <cstdint>
#include <vector>

namespace svem {

/// Synthetic lipid-nanoparticle screening data: four mixture components
/// (PEG, Helper, Ionizable, Cholesterol), Ionizable_Lipid_Type (H101..H103),
/// N_P_ratio, flow_rate, a two-level Operator blocking factor, and responses
/// Potency and Size with planted effects plus PDI, which is pure noise.
struct LnpOptions {
    std::size_t n_runs = 60;
    std::uint64_t seed = 1;
    double noise_scale = 1.0;
};

Dataset gen_lnp(const LnpOptions& options);

/// PEG 0.01-0.05, the other three 0.10-0.60, summing to one.
MixtureGroup lnp_mixture_group();

/// Noiseless means of the planted responses at the given settings.
struct LnpTruth {
    std::vector<double> potency;
    std::vector<double> size;
    std::vector<double> pdi;
};
LnpTruth lnp_truth(const Dataset& settings);

}  // namespace svem
