#include "ampcal/synth.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/rng.hpp"
#include "ampcal/stats.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include <boost/math/distributions/students_t.hpp>

namespace ampcal {

std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::soft_laplace: return "soft_laplace";
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::student_t: return "student_t";
    }
    return "unknown";
}

NoiseKind parse_noise_kind(const std::string& name) {
    if (name == "soft_laplace") return NoiseKind::soft_laplace;
    if (name == "gaussian") return NoiseKind::gaussian;
    if (name == "student_t") return NoiseKind::student_t;
    throw ConfigError("unknown noise kind '" + name + "'");
}

void SynthSpec::validate() const {
    if (genes.empty()) throw ConfigError("synth: no genes");
    std::set<std::string> names;
    for (const auto& g : genes) {
        if (!names.insert(g.name).second) throw ConfigError("synth: duplicate gene '" + g.name + "'");
        if (g.amplicons == 0) throw ConfigError("synth: gene '" + g.name + "' has no amplicons");
        if (!(g.tau2 > 0.0) || !std::isfinite(g.tau2)) throw ConfigError("synth: tau2 must be positive");
        if (!std::isfinite(g.delta)) throw ConfigError("synth: delta must be finite");
    }
    if (strata.empty()) throw ConfigError("synth: at least one stratum is required");
    double total = 0.0;
    for (const auto& s : strata) {
        if (!(s.fraction >= 0.0)) throw ConfigError("synth: stratum fractions must be non-negative");
        if (!(s.noise_scale > 0.0) || !std::isfinite(s.noise_scale))
            throw ConfigError("synth: noise scale must be positive");
        total += s.fraction;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("synth: stratum fractions must sum to 1");
    if (noise == NoiseKind::student_t && !(noise_df > 0.0)) throw ConfigError("synth: noise_df must be positive");
    for (const auto& p : positives) {
        if (!(p.copy_number >= 0.0)) throw ConfigError("synth: copy number must be non-negative");
        if (!names.count(p.gene)) throw ConfigError("synth: positive on unknown gene '" + p.gene + "'");
    }
}

std::vector<std::string> SynthSpec::gene_names() const {
    std::vector<std::string> out;
    for (const auto& g : genes) out.push_back(g.name);
    return out;
}

std::shared_ptr<const PanelDef> SynthSpec::panel() const {
    std::vector<std::size_t> sizes;
    for (const auto& g : genes) sizes.push_back(g.amplicons);
    const auto names = gene_names();
    return std::make_shared<const PanelDef>(PanelDef::synthetic(names, sizes));
}

SynthSpec SynthSpec::default_panel() {
    SynthSpec spec;
    const char* cnv[] = {"PIK3CA", "KIT", "MET", "FGFR1", "ERBB2"};
    const std::size_t sizes[] = {4, 8, 12, 16, 20};
    for (int j = 0; j < 5; ++j) spec.genes.push_back({cnv[j], sizes[j], 0.0, 0.01});
    for (int j = 1; j <= 7; ++j) spec.genes.push_back({"BB" + std::to_string(j), 16, 0.0, 0.01});
    return spec;
}

std::string synthetic_sample_id(std::size_t index) {
    std::string n = std::to_string(index + 1);
    if (n.size() < 3) n.insert(0, 3 - n.size(), '0');
    return "S" + n;
}

double softlaplace_cdf(double z) { return 2.0 / std::numbers::pi * std::atan(std::exp(z)); }

double softlaplace_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) throw NumericalError("softlaplace: probability must lie in (0, 1)");
    return std::log(std::tan(0.5 * std::numbers::pi * u));
}

std::vector<std::size_t> stratum_layout(const SynthSpec& spec, std::size_t N) {
    std::vector<std::size_t> out(N, spec.strata.size() - 1);
    double cum = 0.0;
    std::size_t start = 0;
    for (std::size_t g = 0; g < spec.strata.size(); ++g) {
        cum += spec.strata[g].fraction;
        const auto end = std::min(N, static_cast<std::size_t>(std::floor(cum * static_cast<double>(N) + 0.5)));
        for (std::size_t s = start; s < end; ++s) out[s] = g;
        start = std::max(start, end);
    }
    return out;
}

std::vector<std::vector<double>> gen_gene_means(const SynthSpec& spec, std::size_t N) {
    spec.validate();
    std::vector<std::vector<double>> out;
    for (const auto& g : spec.genes) {
        Rng rng(derive_seed(spec.seed, "means:" + g.name));
        const double sd = std::sqrt(g.tau2);
        std::vector<double> v(N);
        for (auto& x : v) x = g.delta + sd * standard_normal(rng);
        out.push_back(std::move(v));
    }
    return out;
}

namespace {

double noise_draw(const SynthSpec& spec, double u) {
    switch (spec.noise) {
        case NoiseKind::soft_laplace: return softlaplace_quantile(u);
        case NoiseKind::gaussian: return normal_quantile(u);
        case NoiseKind::student_t:
            return boost::math::quantile(boost::math::students_t_distribution<double>(spec.noise_df), u);
    }
    return 0.0;
}

}  // namespace

SyntheticCohort gen_panel(const SynthSpec& spec, std::size_t N) {
    spec.validate();
    for (const auto& p : spec.positives)
        if (p.sample >= N) throw ConfigError("synth: positive on sample index beyond N");

    SyntheticCohort out;
    out.panel = spec.panel();
    const auto layout = stratum_layout(spec, N);
    const std::size_t J = spec.genes.size();

    for (std::size_t s = 0; s < N; ++s) {
        const auto& stratum = spec.strata[layout[s]];
        SampleLabel label{synthetic_sample_id(s), stratum.name, {}};
        std::vector<double> cn(J, 2.0);
        for (const auto& p : spec.positives) {
            if (p.sample != s) continue;
            for (std::size_t j = 0; j < J; ++j)
                if (spec.genes[j].name == p.gene) cn[j] = p.copy_number;
            label.copy_number[p.gene] = p.copy_number;
        }

        Rng rng(derive_seed(spec.seed, "panel", {s}));
        LcnrMatrix m;
        m.sample_id = label.sample_id;
        m.panel = out.panel;
        std::vector<double> truth(J);
        for (std::size_t j = 0; j < J; ++j) {
            const auto& g = spec.genes[j];
            // CN = 0 would be log 0; clamp to a deep deletion.
            const double shift = std::log(std::max(cn[j], 1e-3) / 2.0);
            truth[j] = g.delta + stratum.bias + std::sqrt(g.tau2) * standard_normal(rng) + shift;
            std::vector<double> amp(g.amplicons);
            for (auto& x : amp) x = truth[j] + stratum.noise_scale * noise_draw(spec, uniform_open(rng));
            m.values.push_back(std::move(amp));
        }
        out.samples.push_back(std::move(m));
        out.labels.push_back(std::move(label));
        out.true_means.push_back(std::move(truth));
    }
    return out;
}

}  // namespace ampcal
