#pragma once

// JSON forms of the pipeline's artifacts. Readers validate shape and throw
// DataError naming the file on malformed input.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ampcal/bayescnv.hpp"
#include "ampcal/comparators.hpp"
#include "ampcal/harness.hpp"
#include "ampcal/imputation.hpp"
#include "ampcal/stratify.hpp"
#include "ampcal/synth.hpp"
#include "ampcal/tolerance.hpp"

namespace ampcal {

using Json = nlohmann::ordered_json;

Json to_json(const PosteriorSummary& s);
PosteriorSummary posterior_from_json(const Json& j);

Json to_json(const ComparatorInterval& c);
Json to_json(const BulkFit& f);
Json to_json(const ImputedCohort& c);
ImputedCohort imputed_from_json(const Json& j);
Json to_json(const GammaToleranceModel& m);
GammaToleranceModel tolerance_from_json(const Json& j);
Json to_json(const CalibrationReport& r);
Json to_json(const SweepResult& r);
Json to_json(const StratifiedAssignment& a);
Json to_json(const MixtureResult& r);
Json to_json(const SampleLabel& l);
SampleLabel label_from_json(const Json& j);

// Imputation output: sample ids, m, and every repetition of every gene.
struct ImputedFile {
    std::vector<std::string> sample_ids;
    std::size_t m = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<ImputedCohort>> genes;  // [gene][repetition]
};
Json to_json(const ImputedFile& f);
ImputedFile imputed_file_from_json(const Json& j);

// Prior file:
//   {"effective_sample_size": 5,
//    "genes":   {"MET": {"values": [...]}, "KIT": {"alpha": a, "scale": s, "count": 1000, "seed": 7}},
//    "default": {...}}
// An entry with "values" is replayed as given; one with alpha/scale is
// generated. The ESS argument, when non-negative, overrides the file.
PriorSet prior_set_from_json(const Json& j, double ess_override = -1.0);
Json to_json(const PriorSet& p);
PriorSet load_prior_set(const std::filesystem::path& path, double ess_override = -1.0);

SynthSpec synth_spec_from_json(const Json& j);
Json to_json(const SynthSpec& s);

Json read_json_file(const std::filesystem::path& path);
// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Every *.json in a directory (sorted by name) or a single file.
std::vector<PosteriorSummary> read_posteriors(const std::filesystem::path& path);

}  // namespace ampcal
