#pragma once

// End-to-end run: lcnr -> fit -> impute -> tolerance (-> stratify), with a
// manifest recording the config hash, seeds, version and a digest of every
// output file.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ampcal/config.hpp"
#include "ampcal/serialize.hpp"

namespace ampcal {

struct OutputRecord {
    std::string path;  // relative to the output directory
    std::string digest;
};

struct StageRecord {
    std::string name;
    std::string status;  // "ok" or "failed"
    std::vector<OutputRecord> outputs;
    std::string error;
};

struct RunManifest {
    std::string version;
    std::string config_hash;
    std::uint64_t master_seed = 0;
    std::vector<std::pair<std::string, std::uint64_t>> seeds;
    std::vector<StageRecord> stages;
    std::string status = "ok";
    std::vector<std::string> warnings;
};

Json to_json(const RunManifest& m);

// 16 hex digits of FNV-1a over the file bytes.
std::string file_digest(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

// Seed of a named stage: derive_seed(master, "stage:" + name).
std::uint64_t stage_seed(std::uint64_t master, const std::string& stage);

// Normalized lCNRs of every non-reference sample. With no reference ids
// each sample is compared with its own ref_count column.
std::vector<LcnrMatrix> lcnr_cohort(const PanelDef& panel, const std::vector<SampleCounts>& counts,
                                    const std::vector<std::string>& reference_ids, double pseudo_count);

// Posterior means arranged [gene][sample]; throws DataError when the
// summaries disagree on the gene list.
std::vector<std::vector<double>> mu_by_gene(const std::vector<PosteriorSummary>& posteriors);

// Imputation of every gene with R repetitions; gene j uses `seed` and the
// tag "impute:" + gene.
ImputedFile impute_posteriors(const std::vector<PosteriorSummary>& posteriors, const ToleranceConfig& config,
                              std::uint64_t seed);

// Gamma tolerance per gene from an imputation file (priors may be empty).
std::vector<GammaToleranceModel> tolerance_from_imputed(const ImputedFile& imputed, const PriorSet& priors,
                                                        double p);

// Runs every stage into config.out_dir. On failure the error is rethrown
// after writing manifest.json (status "failed") and a FAILED marker naming
// the stage; outputs of completed stages are kept.
RunManifest run_pipeline(const RunConfig& config);

// Checks that need no computation: config ranges, input files and the
// prior file when ess > 0.
void preflight(const RunConfig& config);

}  // namespace ampcal
