#pragma once

// Evaluation studies driven by a flat key-value file. Each study writes
// <name>.csv (plot-ready rows) and <name>.json (summary) into the output
// directory.
//
//   loo           LOO coverage and MACE per gene and method
//   sweep         bias / SE / MSE of the four quantile estimators
//   impute-sweep  relative tolerance error against the imputed fraction
//   mixture       pooled versus evidence-stratified tolerance
//   biasvar       bias / variance of gene means against reference makeup

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ampcal/config.hpp"
#include "ampcal/harness.hpp"

namespace ampcal {

const std::vector<std::string>& study_names();

// Keys accepted by a study, for --help and validation.
const std::vector<std::string>& study_keys(const std::string& study);

std::vector<std::filesystem::path> run_study(const std::string& study, const KeyValues& config, std::uint64_t seed,
                                             const std::filesystem::path& out_dir);

// Synthetic gene-level cohort with labelled positives: gene means drawn
// from Normal(delta, tau2); the first `positives` samples of `positive_gene`
// are shifted by log(copy_number / 2). Result is [gene][sample].
struct GeneCohort {
    std::vector<std::string> genes;
    std::vector<std::vector<double>> mu;
    std::vector<std::vector<bool>> positive;
};
GeneCohort synthetic_gene_cohort(std::size_t genes, std::size_t K, double delta, double tau2,
                                 const std::string& positive_gene, std::size_t positives, double copy_number,
                                 std::uint64_t seed);

}  // namespace ampcal
