#pragma once

// Median split of a validation cohort on log model evidence, with separate
// tolerance fits per stratum.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ampcal/bayescnv.hpp"
#include "ampcal/tolerance.hpp"

namespace ampcal {

enum class Stratum { plus, minus };

inline const char* to_string(Stratum s) { return s == Stratum::plus ? "PLUS" : "MINUS"; }

inline constexpr std::size_t kMinStratifyCohort = 20;
inline constexpr std::size_t kMinStratumSize = 10;

struct StratifiedAssignment {
    std::vector<std::string> sample_ids;
    std::vector<double> evidence;
    double z_med = 0.0;
    std::vector<Stratum> stratum;
    std::vector<std::string> warnings;

    std::size_t count(Stratum s) const;
    std::map<std::string, Stratum> as_map() const;
    // Stratum of a new sample with evidence z (PLUS iff z >= z_med).
    Stratum classify(double z) const { return z >= z_med ? Stratum::plus : Stratum::minus; }
};

// PLUS iff Z_s >= median(Z). Refuses cohorts with fewer than 20 samples
// unless `force` is set, and always refuses a stratum below 10 samples.
StratifiedAssignment evidence_split(const std::vector<std::string>& sample_ids, const std::vector<double>& evidence,
                                    bool force = false);
StratifiedAssignment evidence_split(const std::vector<PosteriorSummary>& summaries, bool force = false);

struct StratifiedGene {
    std::string gene;
    GammaToleranceModel plus;
    GammaToleranceModel minus;
};

struct StratifiedResult {
    StratifiedAssignment assignment;
    std::vector<StratifiedGene> genes;
};

// Per-stratum imputation and Gamma fits. `mu_hat[j][s]` is gene j in sample
// s, aligned with the assignment. Both strata use the same prior.
std::vector<StratifiedGene> stratified_tolerance(const StratifiedAssignment& assignment,
                                                 const std::vector<std::string>& genes,
                                                 const std::vector<std::vector<double>>& mu_hat,
                                                 const PriorSet& priors, const ToleranceConfig& config,
                                                 std::uint64_t seed);

// Per-stratum ToleranceFit for every gene; used where a fit is re-evaluated
// at several levels.
struct StratifiedFits {
    std::vector<ToleranceFit> plus;
    std::vector<ToleranceFit> minus;
};
StratifiedFits stratified_fits(const StratifiedAssignment& assignment, const std::vector<std::string>& genes,
                               const std::vector<std::vector<double>>& mu_hat, const PriorSet& priors,
                               const ToleranceConfig& config, std::uint64_t seed);

}  // namespace ampcal
