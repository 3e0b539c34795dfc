#include "doctest.h"

#include "ampcal/errors.hpp"
#include "ampcal/panel_io.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace ampcal;

namespace {

std::shared_ptr<const PanelDef> two_gene_panel() {
    const std::vector<std::string> names{"A", "B"};
    const std::vector<std::size_t> sizes{2, 1};
    return std::make_shared<const PanelDef>(PanelDef::synthetic(names, sizes));
}

LcnrMatrix flat(std::vector<double> v) {
    const std::vector<std::string> names{"G"};
    const std::vector<std::size_t> sizes{v.size()};
    return LcnrMatrix{"s", std::make_shared<const PanelDef>(PanelDef::synthetic(names, sizes)), {v}, 0.5};
}

const char* kCounts =
    "sample_id\tamplicon_id\ttest_count\tref_count\n"
    "s1\tA_1\t100\t100\n"
    "s1\tA_2\t200\t100\n"
    "s1\tB_1\t50\t100\n"
    "s2\tA_1\t10\t20\n"
    "s2\tA_2\t10\t20\n"
    "s2\tB_1\t10\t20\n";

}  // namespace

TEST_CASE("raw lcnr examples") {
    CHECK(compute_raw_lcnr(100, 100, 0.5) == 0.0);
    CHECK(compute_raw_lcnr(200, 100, 0.0) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(compute_raw_lcnr(0, 0, 0.5) == 0.0);
}

TEST_CASE("raw lcnr rejects bad input") {
    CHECK_THROWS_AS(compute_raw_lcnr(0, 10, 0.0), DataError);
    CHECK_THROWS_AS(compute_raw_lcnr(10, 0, -1.0), Error);
    CHECK_THROWS_AS(compute_raw_lcnr(-1, 10, 0.5), DataError);
}

TEST_CASE("raw lcnr is antisymmetric") {
    std::mt19937_64 gen(3);
    std::uniform_int_distribution<int> d(0, 5000);
    for (int i = 0; i < 200; ++i) {
        const double a = d(gen), b = d(gen);
        CHECK(compute_raw_lcnr(a, b, 0.5) == doctest::Approx(-compute_raw_lcnr(b, a, 0.5)).epsilon(1e-14));
    }
}

TEST_CASE("median normalize examples") {
    auto r = median_normalize(flat({0.1, 0.3, 0.5})).values[0];
    CHECK(r[0] == doctest::Approx(-0.2));
    CHECK(r[1] == doctest::Approx(0.0));
    CHECK(r[2] == doctest::Approx(0.2));
    const auto zeros = median_normalize(flat({0.7, 0.7, 0.7, 0.7}));
    for (double v : zeros.values[0]) CHECK(v == 0.0);
    r = median_normalize(flat({0.0, 1.0})).values[0];
    CHECK(r[0] == -0.5);
    CHECK(r[1] == 0.5);
}

TEST_CASE("median normalize errors") {
    CHECK_THROWS(median_normalize(LcnrMatrix{}));
    CHECK_THROWS_AS(median_normalize(flat({0.1, NAN})), DataError);
}

TEST_CASE("median normalize is idempotent and shift invariant") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> v(5 + rep);
        for (auto& x : v) x = nd(gen);
        const auto once = median_normalize(flat(v));
        const auto twice = median_normalize(once);
        std::vector<double> shifted = v;
        const double c = nd(gen) * 10.0;
        for (auto& x : shifted) x += c;
        const auto moved = median_normalize(flat(shifted));
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(std::abs(twice.values[0][i] - once.values[0][i]) < 1e-12);
            CHECK(std::abs(moved.values[0][i] - once.values[0][i]) < 1e-12);
        }
    }
}

TEST_CASE("panel json keeps file order and validates") {
    const auto p = parse_panel_json(R"({"MET": ["m1", "m2"], "KIT": ["k1"]})");
    REQUIRE(p.gene_count() == 2);
    CHECK(p.genes()[0].name == "MET");
    CHECK(p.amplicon_count() == 3);
    REQUIRE(p.find("k1") != nullptr);
    CHECK(p.find("k1")->gene == 1);
    CHECK(p.find("zz") == nullptr);
    CHECK_THROWS_AS(parse_panel_json(R"({"MET": ["m1"], "KIT": ["m1"]})"), DataError);
    CHECK_THROWS_AS(parse_panel_json(R"({"MET": []})"), DataError);
    CHECK_THROWS_AS(parse_panel_json("[1, 2"), DataError);
}

TEST_CASE("counts parsing") {
    const auto panel = two_gene_panel();
    const auto s = parse_counts_tsv(kCounts, *panel);
    REQUIRE(s.size() == 2);
    CHECK(s[0].sample_id == "s1");
    REQUIRE(s[0].records.size() == 3);
    CHECK(s[0].records[1].test_count == 200);
}

TEST_CASE("counts diagnostics name the row") {
    const auto panel = two_gene_panel();
    const std::string head = "sample_id\tamplicon_id\ttest_count\tref_count\n";
    auto message = [&](const std::string& body) {
        try {
            parse_counts_tsv(head + body, *panel, "c.tsv");
        } catch (const DataError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    const std::string full = "s1\tA_1\t1\t1\ns1\tA_2\t1\t1\ns1\tB_1\t1\t1\n";
    const auto unknown = message(full + "s1\tZZ\t1\t1\n");
    const auto dup = message(full + "s1\tA_1\t1\t1\n");
    const auto bad = message(full + "s1\tA_1\tx\t1\n");
    const auto missing = message("s1\tA_1\t1\t1\ns1\tA_2\t1\t1\n");
    CHECK(unknown.find("c.tsv:5") != std::string::npos);
    CHECK(unknown.find("ZZ") != std::string::npos);
    CHECK(dup.find("duplicate") != std::string::npos);
    CHECK(bad.find("c.tsv:5") != std::string::npos);
    CHECK(missing.find("B_1") != std::string::npos);
    CHECK(unknown != dup);
    CHECK(dup != bad);
    CHECK_FALSE(missing.empty());
}

TEST_CASE("averaged reference and sample lcnr") {
    const auto panel = two_gene_panel();
    const auto s = parse_counts_tsv(kCounts, *panel);
    const std::vector<std::string> refs{"s2"};
    const auto ref = reference_counts(s, refs);
    REQUIRE(ref.size() == 3);
    CHECK(ref[0] == 10.0);
    const auto x = sample_lcnr(s[0], panel, ref, 0.5);
    // raw: log(100.5/10.5), log(200.5/10.5), log(50.5/10.5); median is the first
    const double m = std::log(100.5 / 10.5);
    CHECK(x.values[0][1] == doctest::Approx(std::log(200.5 / 10.5) - m));
    CHECK(x.values[1][0] == doctest::Approx(std::log(50.5 / 10.5) - m));
    const auto own = sample_lcnr(s[0], panel, {}, 0.5);
    CHECK(own.values[0][0] == doctest::Approx(0.0));
}

TEST_CASE("lcnr tsv round trip") {
    const auto panel = two_gene_panel();
    LcnrMatrix m{"s9", panel, {{0.125, -1.0 / 3.0}, {2.0e-7}}, 0.5};
    const auto dir = std::filesystem::temp_directory_path() / "ampcal_test_lcnr";
    std::filesystem::remove_all(dir);
    write_lcnr_tsv(m, dir / "s9.tsv");
    const auto back = read_lcnr_inputs(dir);
    REQUIRE(back.size() == 1);
    CHECK(back[0].sample_id == "s9");
    CHECK(back[0].values == m.values);
    CHECK(back[0].panel->gene_names() == panel->gene_names());
    std::filesystem::remove_all(dir);
}
