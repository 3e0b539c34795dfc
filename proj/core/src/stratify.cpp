#include "ampcal/stratify.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/rng.hpp"
#include "ampcal/stats.hpp"

#include <set>

namespace ampcal {

std::size_t StratifiedAssignment::count(Stratum s) const {
    std::size_t n = 0;
    for (auto v : stratum) n += v == s;
    return n;
}

std::map<std::string, Stratum> StratifiedAssignment::as_map() const {
    std::map<std::string, Stratum> out;
    for (std::size_t i = 0; i < sample_ids.size(); ++i) out.emplace(sample_ids[i], stratum[i]);
    return out;
}

StratifiedAssignment evidence_split(const std::vector<std::string>& sample_ids, const std::vector<double>& evidence,
                                    bool force) {
    if (sample_ids.size() != evidence.size()) throw DataError("stratify: ids and evidence differ in length");
    const std::size_t K = evidence.size();
    StratifiedAssignment a;
    if (K < kMinStratifyCohort) {
        const std::string msg = "stratify: K = " + std::to_string(K) +
                                " samples; evidence stratification requires K > 20 so that each stratum "
                                "retains at least ten observations";
        if (!force) throw DataError(msg);
        a.warnings.push_back(msg + " (forced)");
    }
    if (K == 0) throw DataError("stratify: empty cohort");
    for (double z : evidence)
        if (!std::isfinite(z)) throw DataError("stratify: non-finite log evidence");
    a.sample_ids = sample_ids;
    a.evidence = evidence;
    a.z_med = median(evidence);
    for (double z : evidence) a.stratum.push_back(a.classify(z));
    const std::size_t n_plus = a.count(Stratum::plus), n_minus = a.count(Stratum::minus);
    if (n_plus < kMinStratumSize || n_minus < kMinStratumSize)
        throw DataError("stratify: strata of size " + std::to_string(n_plus) + "/" + std::to_string(n_minus) +
                        "; each stratum must retain at least ten observations");
    return a;
}

StratifiedAssignment evidence_split(const std::vector<PosteriorSummary>& summaries, bool force) {
    std::vector<std::string> ids;
    std::vector<double> z;
    for (const auto& s : summaries) {
        ids.push_back(s.sample_id);
        z.push_back(s.log_evidence);
    }
    return evidence_split(ids, z, force);
}

StratifiedFits stratified_fits(const StratifiedAssignment& assignment, const std::vector<std::string>& genes,
                               const std::vector<std::vector<double>>& mu_hat, const PriorSet& priors,
                               const ToleranceConfig& config, std::uint64_t seed) {
    if (mu_hat.size() != genes.size()) throw DataError("stratify: one row of posterior means per gene required");
    std::vector<std::size_t> plus_idx, minus_idx;
    for (std::size_t s = 0; s < assignment.stratum.size(); ++s)
        (assignment.stratum[s] == Stratum::plus ? plus_idx : minus_idx).push_back(s);

    // Leakage audit: the two strata partition the cohort.
    std::set<std::string> seen;
    for (const auto& id : assignment.sample_ids)
        if (!seen.insert(id).second) throw DataError("stratify: duplicate sample id '" + id + "'");
    if (plus_idx.size() + minus_idx.size() != assignment.sample_ids.size())
        throw DataError("stratify: strata do not partition the cohort");

    StratifiedFits out;
    for (std::size_t j = 0; j < genes.size(); ++j) {
        if (mu_hat[j].size() != assignment.stratum.size())
            throw DataError("stratify: posterior means of gene '" + genes[j] + "' do not match the assignment");
        std::vector<double> plus, minus;
        for (std::size_t s : plus_idx) plus.push_back(mu_hat[j][s]);
        for (std::size_t s : minus_idx) minus.push_back(mu_hat[j][s]);
        const PseudoPriorSpec* prior = priors.find(genes[j]);
        out.plus.push_back(fit_gene(plus, config, prior, derive_seed(seed, "stratum:plus"), genes[j]));
        out.minus.push_back(fit_gene(minus, config, prior, derive_seed(seed, "stratum:minus"), genes[j]));
    }
    return out;
}

std::vector<StratifiedGene> stratified_tolerance(const StratifiedAssignment& assignment,
                                                 const std::vector<std::string>& genes,
                                                 const std::vector<std::vector<double>>& mu_hat,
                                                 const PriorSet& priors, const ToleranceConfig& config,
                                                 std::uint64_t seed) {
    const auto fits = stratified_fits(assignment, genes, mu_hat, priors, config, seed);
    std::vector<StratifiedGene> out;
    for (std::size_t j = 0; j < genes.size(); ++j)
        out.push_back({genes[j], fits.plus[j].model(config.p), fits.minus[j].model(config.p)});
    return out;
}

}  // namespace ampcal
