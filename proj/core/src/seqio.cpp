#include "cgrips/seqio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cgrips/error.hpp"
#include "cgrips/random.hpp"

namespace cgrips {

Dataset::Dataset(std::vector<Sequence> sequences) : sequences_(std::move(sequences)) {
    std::set<std::string> labels;
    for (std::size_t i = 0; i < sequences_.size(); ++i) {
        const auto& s = sequences_[i];
        if (s.residues.empty()) throw InputError(fmt::format("sequence '{}' is empty", s.id));
        if (!by_id_.emplace(s.id, i).second)
            throw InputError(fmt::format("duplicate sequence id '{}'", s.id));
        labels.insert(s.label);
    }
    label_set_.assign(labels.begin(), labels.end());
}

const Sequence* Dataset::find(const std::string& id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &sequences_[it->second];
}

Dataset Dataset::subset(const std::set<std::string>& ids) const {
    std::vector<Sequence> kept;
    for (const auto& s : sequences_)
        if (ids.contains(s.id)) kept.push_back(s);
    return Dataset(std::move(kept));
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    std::ranges::transform(s, s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        std::string field = trim(std::string_view(line).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start));
        if (field.size() >= 2 && field.front() == '"' && field.back() == '"')
            field = field.substr(1, field.size() - 2);
        fields.push_back(std::move(field));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

// Returns an error message, or empty when every residue is in the layout.
std::string check_residues(const std::string& residues, const AlphabetLayout& layout) {
    if (residues.empty()) return "empty sequence";
    for (std::size_t i = 0; i < residues.size(); ++i) {
        if (!layout.contains(residues[i]))
            return fmt::format("symbol '{}' at position {} is not in the alphabet", residues[i], i);
    }
    return {};
}

class RowCollector {
public:
    RowCollector(const AlphabetLayout& layout, bool strict) : layout_(layout), strict_(strict) {}

    void reject(std::size_t line, std::string message) {
        if (strict_) throw InputError(fmt::format("line {}: {}", line, message));
        diagnostics_.push_back({line, std::move(message)});
    }

    void add(std::size_t line, Sequence s) {
        if (s.label.empty()) return reject(line, fmt::format("sequence '{}' has no label", s.id));
        if (auto problem = check_residues(s.residues, layout_); !problem.empty())
            return reject(line, fmt::format("sequence '{}': {}", s.id, problem));
        if (auto [it, fresh] = seen_.emplace(s.id, line); !fresh)
            throw InputError(fmt::format("duplicate id '{}' on lines {} and {}", s.id, it->second, line));
        rows_.push_back(std::move(s));
    }

    LoadResult finish() {
        if (rows_.empty()) throw InputError("no valid rows in input");
        return LoadResult{Dataset(std::move(rows_)), std::move(diagnostics_)};
    }

private:
    const AlphabetLayout& layout_;
    bool strict_;
    std::vector<Sequence> rows_;
    std::vector<Diagnostic> diagnostics_;
    std::map<std::string, std::size_t> seen_;
};

}  // namespace

LoadResult parse_csv(std::istream& in, const AlphabetLayout& layout, bool strict) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        if (trim(line).empty()) continue;
        header = split_fields(line);
    }
    if (header.empty()) throw InputError("csv input has no header");

    std::optional<std::size_t> id_col, seq_col, label_col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = lower(header[i]);
        if (name == "id") id_col = i;
        else if (name == "sequence") seq_col = i;
        else if (name == "label" || name == "class") label_col = i;
    }
    if (!seq_col || !label_col)
        throw InputError("csv header must contain 'sequence' and 'label' columns");

    RowCollector rows(layout, strict);
    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        const std::size_t row = row_index++;
        if (fields.size() != header.size()) {
            rows.reject(line_no, fmt::format("expected {} fields, found {}", header.size(), fields.size()));
            continue;
        }
        Sequence s;
        s.id = id_col ? fields[*id_col] : std::to_string(row);
        s.residues = fields[*seq_col];
        s.label = fields[*label_col];
        if (s.id.empty()) {
            rows.reject(line_no, "empty id");
            continue;
        }
        rows.add(line_no, std::move(s));
    }
    return rows.finish();
}

LoadResult parse_fasta(std::istream& in, const AlphabetLayout& layout, bool strict) {
    RowCollector rows(layout, strict);
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::pair<std::string, std::size_t>> header;  // text, line
    std::string residues;

    auto flush = [&] {
        if (!header) return;
        const auto& [text, at] = *header;
        const auto bar = text.rfind('|');
        if (bar == std::string::npos) {
            rows.reject(at, "fasta header has no '|label' suffix");
        } else {
            rows.add(at, Sequence{trim(std::string_view(text).substr(0, bar)), residues,
                                  trim(std::string_view(text).substr(bar + 1))});
        }
        header.reset();
        residues.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == ';') continue;
        if (text.front() == '>') {
            flush();
            header.emplace(text.substr(1), line_no);
        } else if (!header) {
            rows.reject(line_no, "sequence data before the first fasta header");
        } else {
            residues += text;
        }
    }
    flush();
    return rows.finish();
}

InputFormat format_from_extension(const std::filesystem::path& path) {
    const auto ext = lower(path.extension().string());
    if (ext == ".fa" || ext == ".fasta" || ext == ".faa" || ext == ".fas") return InputFormat::fasta;
    return InputFormat::csv;
}

LoadResult load_dataset(const std::filesystem::path& path, const AlphabetLayout& layout,
                        const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read dataset {}", path.string()));
    return options.format == InputFormat::fasta ? parse_fasta(in, layout, options.strict)
                                                : parse_csv(in, layout, options.strict);
}

std::vector<ClassStats> dataset_stats(const Dataset& dataset) {
    if (dataset.empty()) throw InputError("dataset_stats of an empty dataset");
    std::map<std::string, ClassStats> by_label;
    std::map<std::string, std::size_t> total_len;
    for (const auto& s : dataset.sequences()) {
        auto& st = by_label[s.label];
        const auto len = s.residues.size();
        if (st.count == 0) {
            st.label = s.label;
            st.min_len = st.max_len = len;
        }
        ++st.count;
        st.min_len = std::min(st.min_len, len);
        st.max_len = std::max(st.max_len, len);
        total_len[s.label] += len;
    }
    std::vector<ClassStats> out;
    for (auto& [label, st] : by_label) {
        st.mean_len = static_cast<double>(total_len[label]) / static_cast<double>(st.count);
        out.push_back(st);
    }
    std::ranges::stable_sort(out, [](const ClassStats& a, const ClassStats& b) {
        return a.count > b.count;
    });
    return out;
}

std::string to_string(SplitPart part) {
    switch (part) {
        case SplitPart::train: return "train";
        case SplitPart::validation: return "validation";
        case SplitPart::test: return "test";
    }
    return "train";
}

SplitPart split_part_from_string(const std::string& name) {
    if (name == "train") return SplitPart::train;
    if (name == "validation") return SplitPart::validation;
    if (name == "test") return SplitPart::test;
    throw InputError(fmt::format("unknown split '{}'", name));
}

SplitPart SplitAssignment::part_of(const std::string& id) const {
    if (test.contains(id)) return SplitPart::test;
    if (validation.contains(id)) return SplitPart::validation;
    if (train.contains(id)) return SplitPart::train;
    throw InputError(fmt::format("id '{}' is not in the split", id));
}

namespace {

// Rounds the class-by-part quota matrix counts[c] * part_sizes[p] / total to
// integers. Every entry ends at the floor or ceiling of its quota while row
// sums (class counts) and column sums (part sizes) are kept exact. The
// fractional remainders form a bipartite transportation problem; an integral
// max flow through it always exists because the fractional one does.
std::vector<std::vector<std::size_t>> allocate_quotas(const std::vector<std::size_t>& counts,
                                                      const std::vector<std::size_t>& part_sizes,
                                                      std::size_t total) {
    const std::size_t classes = counts.size(), parts = part_sizes.size();
    std::vector<std::vector<std::size_t>> alloc(classes, std::vector<std::size_t>(parts));
    std::vector<std::vector<std::uint64_t>> remainder(classes, std::vector<std::uint64_t>(parts));
    std::vector<std::size_t> row_need(classes), col_need(parts);

    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t row = 0;
        for (std::size_t p = 0; p < parts; ++p) {
            const std::uint64_t scaled = static_cast<std::uint64_t>(counts[c]) * part_sizes[p];
            alloc[c][p] = static_cast<std::size_t>(scaled / total);
            remainder[c][p] = scaled % total;
            row += alloc[c][p];
        }
        row_need[c] = counts[c] - row;
    }
    for (std::size_t p = 0; p < parts; ++p) {
        std::size_t col = 0;
        for (std::size_t c = 0; c < classes; ++c) col += alloc[c][p];
        col_need[p] = part_sizes[p] - col;
    }

    // Unit-capacity class->part edges where the quota is fractional; larger
    // remainders are tried first.
    std::vector<std::vector<std::size_t>> order(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t p = 0; p < parts; ++p)
            if (remainder[c][p] != 0) order[c].push_back(p);
        std::ranges::stable_sort(order[c], [&](std::size_t a, std::size_t b) {
            return remainder[c][a] > remainder[c][b];
        });
    }
    std::vector<std::vector<bool>> used(classes, std::vector<bool>(parts, false));

    // Augmenting paths alternate class->part over unused edges and
    // part->class over used ones.
    std::function<bool(std::size_t, std::vector<bool>&, std::vector<bool>&)> augment =
        [&](std::size_t c, std::vector<bool>& seen_c, std::vector<bool>& seen_p) -> bool {
        seen_c[c] = true;
        for (std::size_t p : order[c]) {
            if (used[c][p] || seen_p[p]) continue;
            seen_p[p] = true;
            if (col_need[p] > 0) {
                --col_need[p];
                used[c][p] = true;
                return true;
            }
            for (std::size_t c2 = 0; c2 < classes; ++c2) {
                if (!used[c2][p] || seen_c[c2]) continue;
                used[c2][p] = false;
                if (augment(c2, seen_c, seen_p)) {
                    used[c][p] = true;
                    return true;
                }
                used[c2][p] = true;
            }
        }
        return false;
    };

    for (std::size_t c = 0; c < classes; ++c) {
        while (row_need[c] > 0) {
            std::vector<bool> seen_c(classes, false), seen_p(parts, false);
            if (!augment(c, seen_c, seen_p))
                throw PipelineError("stratified quota rounding found no feasible allocation");
            --row_need[c];
        }
    }
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t p = 0; p < parts; ++p)
            if (used[c][p]) ++alloc[c][p];
    return alloc;
}

std::size_t round_count(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

}  // namespace

SplitAssignment stratified_split(const Dataset& dataset, double test_frac, double val_frac,
                                 std::uint64_t seed) {
    if (!(test_frac > 0.0 && test_frac < 1.0))
        throw InputError(fmt::format("test fraction must lie in (0,1), got {}", test_frac));
    if (!(val_frac >= 0.0 && val_frac < 1.0))
        throw InputError(fmt::format("validation fraction must lie in [0,1), got {}", val_frac));
    if (dataset.empty()) throw InputError("cannot split an empty dataset");

    const bool with_validation = val_frac > 0.0;
    const std::size_t parts = with_validation ? 3 : 2;
    const auto& labels = dataset.label_set();
    std::map<std::string, std::vector<std::string>> members;
    for (const auto& s : dataset.sequences()) members[s.label].push_back(s.id);
    for (const auto& label : labels) {
        if (members[label].size() < parts)
            throw InputError(fmt::format("class '{}' has {} member(s), fewer than the {} split parts",
                                         label, members[label].size(), parts));
    }

    const std::size_t n = dataset.size();
    const std::size_t n_test = std::clamp<std::size_t>(round_count(static_cast<double>(n) * test_frac), 1, n - 1);
    const std::size_t rest = n - n_test;
    std::size_t n_val = 0;
    if (with_validation)
        n_val = std::clamp<std::size_t>(round_count(static_cast<double>(rest) * val_frac), 1, rest - 1);
    const std::size_t n_train = rest - n_val;

    std::vector<std::size_t> counts;
    for (const auto& label : labels) counts.push_back(members[label].size());
    // parts: test, validation, train
    const auto alloc = allocate_quotas(counts, {n_test, n_val, n_train}, n);

    SplitAssignment out;
    out.seed = seed;
    Rng rng = make_rng(seed);
    for (std::size_t c = 0; c < labels.size(); ++c) {
        auto& ids = members[labels[c]];
        shuffle(std::span<std::string>(ids), rng);
        std::size_t k = 0;
        for (std::size_t i = 0; i < alloc[c][0]; ++i) out.test.insert(ids[k++]);
        for (std::size_t i = 0; i < alloc[c][1]; ++i) out.validation.insert(ids[k++]);
        while (k < ids.size()) out.train.insert(ids[k++]);
    }
    return out;
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(fmt::format("cannot write {}", tmp.string()));
        out << contents;
        out.flush();
        if (!out) throw IoError(fmt::format("write to {} failed", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError(fmt::format("cannot move {} into place: {}", path.string(), ec.message()));
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::string text;
    for (const auto& e : manifest) {
        nlohmann::json j = {{"id", e.id},           {"label", e.label},
                            {"split", to_string(e.split)}, {"image_path", e.image_path},
                            {"epsilon", e.epsilon}, {"alpha", e.alpha},
                            {"image_size", e.image_size}};
        text += j.dump();
        text += '\n';
    }
    write_file_atomically(path, text);
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read manifest {}", path.string()));
    DatasetManifest out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ManifestEntry e;
            e.id = j.at("id").get<std::string>();
            e.label = j.at("label").get<std::string>();
            e.split = split_part_from_string(j.at("split").get<std::string>());
            e.image_path = j.at("image_path").get<std::string>();
            e.epsilon = j.at("epsilon").get<double>();
            e.alpha = j.at("alpha").get<double>();
            e.image_size = j.at("image_size").get<int>();
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw InputError(fmt::format("{}:{}: bad manifest entry: {}", path.string(), line_no, ex.what()));
        }
    }
    return out;
}

}  // namespace cgrips
