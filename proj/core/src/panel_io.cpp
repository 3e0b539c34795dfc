#include "ampcal/panel_io.hpp"

#include "ampcal/errors.hpp"
#include "ampcal/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ampcal {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

bool parse_count(const std::string& field, std::uint64_t& out) {
    if (field.empty() || field.front() == '-' || field.front() == '+') return false;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

PanelDef::PanelDef(std::vector<GeneDef> genes) : genes_(std::move(genes)) {
    std::set<std::string> names;
    for (std::size_t j = 0; j < genes_.size(); ++j) {
        const auto& g = genes_[j];
        if (g.name.empty()) throw DataError("panel: empty gene name");
        if (!names.insert(g.name).second) throw DataError("panel: duplicate gene '" + g.name + "'");
        if (g.amplicon_ids.empty()) throw DataError("panel: gene '" + g.name + "' has no amplicons");
        for (std::size_t k = 0; k < g.amplicon_ids.size(); ++k) {
            const auto& id = g.amplicon_ids[k];
            if (!index_.emplace(id, Slot{j, k}).second)
                throw DataError("panel: amplicon '" + id + "' listed more than once");
        }
        amplicon_count_ += g.amplicon_ids.size();
    }
}

const PanelDef::Slot* PanelDef::find(const std::string& amplicon_id) const {
    const auto it = index_.find(amplicon_id);
    return it == index_.end() ? nullptr : &it->second;
}

std::vector<std::string> PanelDef::gene_names() const {
    std::vector<std::string> out;
    out.reserve(genes_.size());
    for (const auto& g : genes_) out.push_back(g.name);
    return out;
}

PanelDef PanelDef::synthetic(std::span<const std::string> names, std::span<const std::size_t> sizes) {
    if (names.size() != sizes.size()) throw DataError("synthetic panel: names/sizes length mismatch");
    std::vector<GeneDef> genes;
    for (std::size_t j = 0; j < names.size(); ++j) {
        GeneDef g{names[j], {}};
        for (std::size_t k = 0; k < sizes[j]; ++k) g.amplicon_ids.push_back(names[j] + "_" + std::to_string(k + 1));
        genes.push_back(std::move(g));
    }
    return PanelDef(std::move(genes));
}

PanelDef parse_panel_json(const std::string& text) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("panel: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw DataError("panel: expected an object {gene: [amplicon ids]}");
    std::vector<GeneDef> genes;
    for (const auto& [name, ids] : doc.items()) {
        if (!ids.is_array()) throw DataError("panel: gene '" + name + "' must map to a list of amplicon ids");
        GeneDef g{name, {}};
        for (const auto& id : ids) {
            if (!id.is_string()) throw DataError("panel: gene '" + name + "' has a non-string amplicon id");
            g.amplicon_ids.push_back(id.get<std::string>());
        }
        genes.push_back(std::move(g));
    }
    return PanelDef(std::move(genes));
}

PanelDef load_panel(const std::filesystem::path& path) { return parse_panel_json(read_file(path)); }

std::vector<SampleCounts> parse_counts_tsv(const std::string& text, const PanelDef& panel,
                                           const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };

    if (!std::getline(in, line)) throw DataError(source + ": empty counts file");
    ++line_no;
    const auto header = split_tabs(strip_cr(line));
    const std::vector<std::string> expected{"sample_id", "amplicon_id", "test_count", "ref_count"};
    if (header != expected)
        throw DataError(where() + "header must be 'sample_id\tamplicon_id\ttest_count\tref_count'");

    std::vector<std::string> order;
    std::map<std::string, std::vector<std::optional<CountsRecord>>> by_sample;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (f.size() != 4) throw DataError(where() + "malformed row: expected 4 tab-separated fields");
        CountsRecord rec{f[0], f[1], 0, 0};
        if (rec.sample_id.empty()) throw DataError(where() + "malformed row: empty sample_id");
        if (!parse_count(f[2], rec.test_count))
            throw DataError(where() + "malformed row: test_count '" + f[2] + "' is not a non-negative integer");
        if (!parse_count(f[3], rec.ref_count))
            throw DataError(where() + "malformed row: ref_count '" + f[3] + "' is not a non-negative integer");
        const auto* slot = panel.find(rec.amplicon_id);
        if (slot == nullptr) throw DataError(where() + "unknown amplicon '" + rec.amplicon_id + "'");

        auto [it, inserted] = by_sample.try_emplace(rec.sample_id);
        if (inserted) {
            order.push_back(rec.sample_id);
            it->second.resize(panel.amplicon_count());
        }
        std::size_t flat = 0;
        for (std::size_t j = 0; j < slot->gene; ++j) flat += panel.amplicons_in(j);
        flat += slot->index;
        if (it->second[flat])
            throw DataError(where() + "duplicate row for sample '" + rec.sample_id + "', amplicon '" +
                            rec.amplicon_id + "'");
        it->second[flat] = std::move(rec);
    }

    std::vector<SampleCounts> out;
    for (const auto& id : order) {
        SampleCounts s{id, {}};
        std::size_t flat = 0;
        for (const auto& gene : panel.genes()) {
            for (const auto& amp : gene.amplicon_ids) {
                const auto& rec = by_sample[id][flat++];
                if (!rec) throw DataError(source + ": sample '" + id + "' is missing amplicon '" + amp + "'");
                s.records.push_back(*rec);
            }
        }
        out.push_back(std::move(s));
    }
    if (out.empty()) throw DataError(source + ": no data rows");
    return out;
}

std::vector<SampleCounts> load_counts(const std::filesystem::path& path, const PanelDef& panel) {
    return parse_counts_tsv(read_file(path), panel, path.string());
}

std::size_t LcnrMatrix::amplicon_count() const {
    std::size_t n = 0;
    for (const auto& g : values) n += g.size();
    return n;
}

std::vector<double> LcnrMatrix::flattened() const {
    std::vector<double> out;
    out.reserve(amplicon_count());
    for (const auto& g : values) out.insert(out.end(), g.begin(), g.end());
    return out;
}

double compute_raw_lcnr(double test_count, double ref_count, double c) {
    if (!(test_count >= 0.0) || !(ref_count >= 0.0)) throw DataError("lcnr: counts must be non-negative");
    if (!std::isfinite(c) || c < 0.0) throw DataError("lcnr: pseudo-count must be a finite non-negative number");
    if (c == 0.0 && (test_count == 0.0 || ref_count == 0.0))
        throw DataError("lcnr: pseudo-count must be positive when a count is zero");
    const double v = std::log(test_count + c) - std::log(ref_count + c);
    if (!std::isfinite(v)) throw DataError("lcnr: non-finite log ratio");
    return v;
}

LcnrMatrix median_normalize(const LcnrMatrix& raw) {
    const auto flat = raw.flattened();
    if (flat.empty()) throw DataError("median_normalize: empty lCNR matrix");
    for (double v : flat)
        if (!std::isfinite(v)) throw DataError("median_normalize: non-finite lCNR in sample '" + raw.sample_id + "'");
    const double med = median(flat);
    LcnrMatrix out = raw;
    for (auto& gene : out.values)
        for (auto& v : gene) v -= med;
    return out;
}

std::vector<double> reference_counts(std::span<const SampleCounts> samples,
                                     std::span<const std::string> reference_ids) {
    if (reference_ids.empty()) throw ConfigError("reference: no reference samples given");
    std::vector<double> ref;
    for (const auto& id : reference_ids) {
        const auto it = std::find_if(samples.begin(), samples.end(),
                                     [&](const SampleCounts& s) { return s.sample_id == id; });
        if (it == samples.end()) throw DataError("reference sample '" + id + "' not found in counts");
        if (ref.empty()) ref.assign(it->records.size(), 0.0);
        for (std::size_t i = 0; i < ref.size(); ++i) ref[i] += static_cast<double>(it->records[i].test_count);
    }
    for (auto& r : ref) r /= static_cast<double>(reference_ids.size());
    return ref;
}

LcnrMatrix sample_lcnr(const SampleCounts& sample, std::shared_ptr<const PanelDef> panel,
                       std::span<const double> reference, double pseudo_count) {
    if (sample.records.size() != panel->amplicon_count())
        throw DataError("sample '" + sample.sample_id + "' does not match the panel");
    if (!reference.empty() && reference.size() != sample.records.size())
        throw DataError("reference does not match the panel");
    LcnrMatrix raw{sample.sample_id, panel, {}, pseudo_count};
    std::size_t flat = 0;
    for (const auto& gene : panel->genes()) {
        std::vector<double> vals;
        for (std::size_t k = 0; k < gene.amplicon_ids.size(); ++k, ++flat) {
            const auto& rec = sample.records[flat];
            const double ref = reference.empty() ? static_cast<double>(rec.ref_count) : reference[flat];
            vals.push_back(compute_raw_lcnr(static_cast<double>(rec.test_count), ref, pseudo_count));
        }
        raw.values.push_back(std::move(vals));
    }
    return median_normalize(raw);
}

void write_lcnr_tsv(const LcnrMatrix& m, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "gene\tamplicon_id\tlcnr\n";
    out << std::setprecision(17);
    const auto& genes = m.panel->genes();
    for (std::size_t j = 0; j < genes.size(); ++j)
        for (std::size_t k = 0; k < genes[j].amplicon_ids.size(); ++k)
            out << genes[j].name << '\t' << genes[j].amplicon_ids[k] << '\t' << m.values[j][k] << '\n';
}

LcnrMatrix read_lcnr_tsv(const std::filesystem::path& path, const std::string& sample_id) {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || split_tabs(strip_cr(line)) != std::vector<std::string>{"gene", "amplicon_id", "lcnr"})
        throw DataError(path.string() + ":1: header must be 'gene\tamplicon_id\tlcnr'");
    std::vector<GeneDef> genes;
    std::vector<std::vector<double>> values;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
        if (f.size() != 3) throw DataError(where + "malformed row: expected 3 tab-separated fields");
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(f[2], &used);
            if (used != f[2].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw DataError(where + "lcnr '" + f[2] + "' is not a number");
        }
        if (!std::isfinite(v)) throw DataError(where + "non-finite lcnr");
        if (genes.empty() || genes.back().name != f[0]) {
            genes.push_back(GeneDef{f[0], {}});
            values.emplace_back();
        }
        genes.back().amplicon_ids.push_back(f[1]);
        values.back().push_back(v);
    }
    if (genes.empty()) throw DataError(path.string() + ": no lCNR rows");
    auto panel = std::make_shared<const PanelDef>(std::move(genes));
    return LcnrMatrix{sample_id, std::move(panel), std::move(values), 0.5};
}

std::vector<LcnrMatrix> read_lcnr_inputs(const std::filesystem::path& path) {
    std::vector<LcnrMatrix> out;
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(path))
            if (e.is_regular_file() && e.path().extension() == ".tsv") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.push_back(read_lcnr_tsv(f, f.stem().string()));
        if (out.empty()) throw DataError("no *.tsv lCNR files in " + path.string());
    } else {
        out.push_back(read_lcnr_tsv(path, path.stem().string()));
    }
    return out;
}

}  // namespace ampcal
