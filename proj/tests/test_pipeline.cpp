#include "doctest.h"

#include "ampcal/errors.hpp"
#include "ampcal/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace ampcal;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Workspace {
    fs::path dir;

    Workspace(const std::string& name, std::size_t samples) : dir(fs::temp_directory_path() / ("ampcal_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
        const std::vector<std::pair<std::string, int>> genes{{"EGFR", 6}, {"MYC", 5}, {"CDK4", 7}};
        std::ofstream panel(dir / "panel.json");
        panel << "{";
        for (std::size_t j = 0; j < genes.size(); ++j) {
            panel << (j ? ", " : "") << '"' << genes[j].first << "\": [";
            for (int k = 0; k < genes[j].second; ++k)
                panel << (k ? ", " : "") << '"' << genes[j].first << "_a" << k << '"';
            panel << "]";
        }
        panel << "}\n";

        std::mt19937_64 gen(2024);
        std::ofstream counts(dir / "counts.tsv");
        counts << "sample_id\tamplicon_id\ttest_count\tref_count\n";
        for (std::size_t s = 0; s < samples; ++s) {
            for (const auto& [g, n] : genes) {
                const double cn = (s == 0 && g == "MYC") ? 6.0 : 2.0;
                for (int k = 0; k < n; ++k) {
                    std::lognormal_distribution<double> depth(std::log(800.0), 0.3);
                    const double d = depth(gen);
                    std::poisson_distribution<long> t(d * cn / 2.0), r(d);
                    counts << "P" << s << '\t' << g << "_a" << k << '\t' << t(gen) << '\t' << r(gen) << '\n';
                }
            }
        }
    }
    ~Workspace() { fs::remove_all(dir); }

    RunConfig config(const std::string& out) const {
        RunConfig c;
        c.counts = (dir / "counts.tsv").string();
        c.panel = (dir / "panel.json").string();
        c.out_dir = (dir / out).string();
        c.warmup = 150;
        c.draws = 200;
        c.leapfrog = 16;
        c.repetitions = 5;
        c.ess = 0.0;
        c.seed = 42;
        return c;
    }
};

}  // namespace

TEST_CASE("pipeline runs end to end and is byte-reproducible") {
    Workspace w("pipeline_repro", 8);
    const auto a = run_pipeline(w.config("a"));
    const auto b = run_pipeline(w.config("b"));
    CHECK(a.status == "ok");
    REQUIRE(a.stages.size() == 4);
    for (const auto& s : a.stages) CHECK(s.status == "ok");
    CHECK(a.config_hash == b.config_hash);

    std::size_t files = 0;
    for (const auto& s : a.stages)
        for (const auto& o : s.outputs) {
            ++files;
            INFO(o.path);
            CHECK(slurp(w.dir / "a" / o.path) == slurp(w.dir / "b" / o.path));
            CHECK(file_digest(w.dir / "a" / o.path) == o.digest);
        }
    CHECK(files == 8 + 8 + 2);
    CHECK(slurp(w.dir / "a" / "manifest.json") == slurp(w.dir / "b" / "manifest.json"));
    CHECK_FALSE(fs::exists(w.dir / "a" / "FAILED"));

    const auto tol = read_json_file(w.dir / "a" / "tolerance.json");
    CHECK(tol.at("genes").size() == 3);
    CHECK(tol.at("m").get<std::size_t>() == 2);  // ceil(0.2 * 8)

    auto other = w.config("c");
    other.seed = 43;
    run_pipeline(other);
    CHECK(slurp(w.dir / "a" / "imputed.json") != slurp(w.dir / "c" / "imputed.json"));
}

TEST_CASE("missing prior with ess > 0 fails before any computation") {
    Workspace w("pipeline_prior", 6);
    auto c = w.config("out");
    c.ess = 5.0;
    CHECK_THROWS_WITH_AS(run_pipeline(c), doctest::Contains("requires a prior file"), ConfigError);
    CHECK_FALSE(fs::exists(w.dir / "out"));
    c.prior = (w.dir / "nope.json").string();
    CHECK_THROWS_AS(preflight(c), ConfigError);
}

TEST_CASE("stratification refuses a small cohort and leaves a marker") {
    Workspace w("pipeline_strat", 15);
    auto c = w.config("out");
    c.stratify = true;
    CHECK_THROWS_WITH_AS(run_pipeline(c), doctest::Contains("K > 20"), DataError);
    REQUIRE(fs::exists(w.dir / "out" / "FAILED"));
    CHECK(slurp(w.dir / "out" / "FAILED").find("stage: lcnr") != std::string::npos);
    const auto m = read_json_file(w.dir / "out" / "manifest.json");
    CHECK(m.at("status") == "failed");
}

TEST_CASE("an empty prior file fails the run with a marker") {
    Workspace w("pipeline_partial", 6);
    auto c = w.config("out");
    c.ess = 5.0;
    c.prior = (w.dir / "prior.json").string();
    std::ofstream(w.dir / "prior.json") << "{\"genes\": {}}\n";
    CHECK_THROWS_AS(run_pipeline(c), DataError);
    CHECK(fs::exists(w.dir / "out" / "FAILED"));
}

TEST_CASE("bad counts name the offending line") {
    Workspace w("pipeline_counts", 6);
    std::ofstream(w.dir / "counts.tsv", std::ios::app) << "P0\tEGFR_a0\tten\t5\n";
    CHECK_THROWS_WITH_AS(run_pipeline(w.config("out")), doctest::Contains("line"), DataError);
}

TEST_CASE("stage seeds are distinct and stable") {
    CHECK(stage_seed(1, "fit") == stage_seed(1, "fit"));
    CHECK(stage_seed(1, "fit") != stage_seed(1, "impute"));
    CHECK(stage_seed(1, "fit") != stage_seed(2, "fit"));
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}
