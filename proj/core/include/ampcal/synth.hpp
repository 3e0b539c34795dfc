#pragma once

// Synthetic cohorts at the lCNR level.
//
// Sample s, gene j: the true gene mean is
//     delta_j + bias_g + N(0, tau2_j) + log(CN_sj / 2)
// where g is the sample's stratum, and every amplicon adds independent
// noise of the stratum's scale. Noise is SoftLaplace (the model's own
// likelihood), Gaussian, or Student-t for deliberate misspecification.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ampcal/panel_io.hpp"

namespace ampcal {

enum class NoiseKind { soft_laplace, gaussian, student_t };

std::string to_string(NoiseKind k);
NoiseKind parse_noise_kind(const std::string& name);

struct GeneSpec {
    std::string name;
    std::size_t amplicons = 8;
    double delta = 0.0;
    double tau2 = 0.01;
};

struct StratumSpec {
    std::string name = "matched";
    double fraction = 1.0;
    double noise_scale = 0.1;
    double bias = 0.0;  // added to every gene mean of the stratum
};

struct Positive {
    std::size_t sample = 0;  // 0-based sample index
    std::string gene;
    double copy_number = 2.0;
};

struct SynthSpec {
    std::vector<GeneSpec> genes;
    NoiseKind noise = NoiseKind::soft_laplace;
    double noise_df = 4.0;  // Student-t degrees of freedom
    std::vector<StratumSpec> strata{StratumSpec{}};
    std::vector<Positive> positives;
    std::uint64_t seed = 1;

    // Throws ConfigError on a non-positive variance or scale, negative copy
    // number, unknown gene or fractions not summing to one.
    void validate() const;
    std::shared_ptr<const PanelDef> panel() const;
    std::vector<std::string> gene_names() const;

    // Five CNV genes with 4, 8, 12, 16 and 20 amplicons plus seven backbone
    // genes of 16 amplicons: 172 amplicons in all.
    static SynthSpec default_panel();
};

struct SampleLabel {
    std::string sample_id;
    std::string stratum;
    std::map<std::string, double> copy_number;  // only genes with CN != 2
};

struct SyntheticCohort {
    std::shared_ptr<const PanelDef> panel;
    std::vector<LcnrMatrix> samples;
    std::vector<SampleLabel> labels;
    std::vector<std::vector<double>> true_means;  // [sample][gene]
};

// "S001", "S002", ...
std::string synthetic_sample_id(std::size_t index);

// Standard SoftLaplace: density 1 / (pi cosh z), cdf (2/pi) atan(e^z).
double softlaplace_cdf(double z);
double softlaplace_quantile(double u);

// Stratum index of each of N samples: contiguous blocks sized by
// round-half-up of the cumulative fractions.
std::vector<std::size_t> stratum_layout(const SynthSpec& spec, std::size_t N);

// N i.i.d. Normal(delta_j, tau2_j) draws per gene: result[j][s].
std::vector<std::vector<double>> gen_gene_means(const SynthSpec& spec, std::size_t N);

// Full panel simulation with positives and strata.
SyntheticCohort gen_panel(const SynthSpec& spec, std::size_t N);

}  // namespace ampcal
