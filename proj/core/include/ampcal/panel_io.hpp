#pragma once

// Panel definitions, read-count ingestion and lCNR features.
//
// A panel is an ordered list of genes, each tiled by one or more amplicons.
// The raw log copy-number ratio of an amplicon is
//     log(test + c) - log(ref + c)
// and the normalized value subtracts the median over every amplicon of the
// sample, so a copy-neutral amplicon sits at zero.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ampcal {

struct GeneDef {
    std::string name;
    std::vector<std::string> amplicon_ids;
};

class PanelDef {
public:
    PanelDef() = default;
    // Validates unique gene names, globally unique amplicon ids and that
    // every gene has at least one amplicon. Throws DataError otherwise.
    explicit PanelDef(std::vector<GeneDef> genes);

    const std::vector<GeneDef>& genes() const { return genes_; }
    std::size_t gene_count() const { return genes_.size(); }
    std::size_t amplicon_count() const { return amplicon_count_; }
    std::size_t amplicons_in(std::size_t gene) const { return genes_[gene].amplicon_ids.size(); }

    struct Slot {
        std::size_t gene;
        std::size_t index;
    };
    // Position of an amplicon id; nullptr when the id is not on the panel.
    const Slot* find(const std::string& amplicon_id) const;
    std::vector<std::string> gene_names() const;

    // Panel with genes named `names[j]` tiled by `sizes[j]` amplicons
    // called "<gene>_<k>" (k from 1).
    static PanelDef synthetic(std::span<const std::string> names,
                              std::span<const std::size_t> sizes);

private:
    std::vector<GeneDef> genes_;
    std::unordered_map<std::string, Slot> index_;
    std::size_t amplicon_count_ = 0;
};

// Parses `{gene: [amplicon ids]}` keeping the file's gene order.
PanelDef load_panel(const std::filesystem::path& path);
PanelDef parse_panel_json(const std::string& text);

struct CountsRecord {
    std::string sample_id;
    std::string amplicon_id;
    std::uint64_t test_count = 0;
    std::uint64_t ref_count = 0;
};

// All records of one sample, in panel order (gene-major, amplicon-minor).
struct SampleCounts {
    std::string sample_id;
    std::vector<CountsRecord> records;
};

// Reads the TSV counts file (header: sample_id amplicon_id test_count
// ref_count). Samples are returned in order of first appearance. Throws
// DataError naming the offending line on malformed rows, unknown or missing
// amplicons, and duplicate (sample, amplicon) pairs.
std::vector<SampleCounts> load_counts(const std::filesystem::path& path, const PanelDef& panel);
std::vector<SampleCounts> parse_counts_tsv(const std::string& text, const PanelDef& panel,
                                           const std::string& source = "<counts>");

// Per-gene values on a panel. `values[j][k]` is amplicon k of gene j.
struct LcnrMatrix {
    std::string sample_id;
    std::shared_ptr<const PanelDef> panel;
    std::vector<std::vector<double>> values;
    double pseudo_count = 0.5;

    std::size_t gene_count() const { return values.size(); }
    std::size_t amplicon_count() const;
    std::vector<double> flattened() const;
};

// log(test + c) - log(ref + c). Counts may be non-integral when the
// reference is an average over several samples. Requires c > 0 unless both
// counts are strictly positive, in which case c >= 0 is accepted.
double compute_raw_lcnr(double test_count, double ref_count, double c);

// Subtracts the median over all amplicons from every value.
LcnrMatrix median_normalize(const LcnrMatrix& raw);

// Per-amplicon reference counts averaged over `reference_ids` (panel order).
std::vector<double> reference_counts(std::span<const SampleCounts> samples,
                                     std::span<const std::string> reference_ids);

// Normalized lCNRs of one sample against a per-amplicon reference. When
// `reference` is empty the ref_count column of the sample itself is used.
LcnrMatrix sample_lcnr(const SampleCounts& sample, std::shared_ptr<const PanelDef> panel,
                       std::span<const double> reference, double pseudo_count);

// One TSV per sample with columns gene, amplicon_id, lcnr.
void write_lcnr_tsv(const LcnrMatrix& m, const std::filesystem::path& path);
LcnrMatrix read_lcnr_tsv(const std::filesystem::path& path, const std::string& sample_id);
// Reads a single TSV or every *.tsv in a directory (sorted by file name);
// the sample id is the file stem.
std::vector<LcnrMatrix> read_lcnr_inputs(const std::filesystem::path& path);

}  // namespace ampcal
