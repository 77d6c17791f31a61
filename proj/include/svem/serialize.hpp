#pragma once

#include "svem/expand.hpp"
#include "svem/optimize.hpp"
#include "svem/simulate.hpp"
#include "svem/svem.hpp"
#include "svem/wmt.hpp"

#if __has_include(<json.hpp>)
#include <json.hpp>
#else
#include <nlohmann/json.hpp>
#endif

#include <string>
#include <vector>

namespace svem {

using Json = nlohmann::json;

/// Version of the JSON documents written by this library.
inline constexpr int kDocumentVersion = 1;

std::string package_version();

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const Json& config);

/// Reads a JSON file; unreadable or malformed files are ConfigErrors.
Json read_json_file(const std::string& path);
/// Pretty-printed, trailing newline.
void write_json_file(const std::string& path, const Json& doc);

Json to_json(const ExpansionOptions& options);
ExpansionOptions expansion_options_from_json(const Json& j);

/// The term list is stored for readability and re-derived on load; a
/// mismatch means the document was edited or written by another version.
Json to_json(const ExpansionSpec& spec);
ExpansionSpec expansion_spec_from_json(const Json& j);

Json to_json(const SvemModel& model);
SvemModel svem_model_from_json(const Json& j);

Json to_json(const WmtResult& result);
WmtResult wmt_result_from_json(const Json& j);

/// Fit settings: family, B, alpha_grid, gamma_grid, relax, objective, debias,
/// seed, nlambda, lambda_min_ratio. Absent keys keep the values of `base`.
SvemOptions svem_options_from_json(const Json& j, SvemOptions base = {});
Json to_json(const SvemOptions& options);

/// Goals as an object keyed by response ({"Potency": {"goal": "max",
/// "weight": 0.6}}) or as an array of objects with a "response" key.
std::vector<ResponseGoal> goals_from_json(const Json& j);
std::vector<SpecLimit> specs_from_json(const Json& j);
std::vector<MixtureGroup> mixture_groups_from_json(const Json& j);
CandidateQuery query_from_json(const Json& j);

/// Simulation grid: one cell per (n_total, target_r2, order) combination.
std::vector<SimCell> sim_cells_from_json(const Json& j);

}  // namespace svem
