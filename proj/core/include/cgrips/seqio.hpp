#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cgrips/cgr.hpp"

namespace cgrips {

struct Sequence {
    std::string id;
    std::string residues;
    std::string label;
};

class Dataset {
public:
    Dataset() = default;
    // Throws InputError on empty residues or duplicate ids.
    explicit Dataset(std::vector<Sequence> sequences);

    const std::vector<Sequence>& sequences() const noexcept { return sequences_; }
    // Distinct labels, sorted lexicographically.
    const std::vector<std::string>& label_set() const noexcept { return label_set_; }
    std::size_t size() const noexcept { return sequences_.size(); }
    bool empty() const noexcept { return sequences_.empty(); }

    const Sequence* find(const std::string& id) const;
    // Keeps the sequences whose id is in `ids`, in dataset order.
    Dataset subset(const std::set<std::string>& ids) const;

private:
    std::vector<Sequence> sequences_;
    std::vector<std::string> label_set_;
    std::map<std::string, std::size_t> by_id_;
};

enum class InputFormat { csv, fasta };

struct Diagnostic {
    std::size_t line = 0;  // 1-based, 0 when not tied to a line
    std::string message;
};

struct LoadOptions {
    InputFormat format = InputFormat::csv;
    // Abort on the first invalid row instead of skipping it.
    bool strict = false;
};

struct LoadResult {
    Dataset dataset;
    std::vector<Diagnostic> diagnostics;
};

// CSV: header with `sequence` and `label` columns (`class` is accepted as an
// alias), optional `id`; the 0-based row index is used when `id` is absent.
// FASTA: the label is the header text after the last '|', the id the text
// before it. Rows with symbols outside `layout` are skipped with a diagnostic.
LoadResult load_dataset(const std::filesystem::path& path, const AlphabetLayout& layout,
                        const LoadOptions& options = {});
LoadResult parse_csv(std::istream& in, const AlphabetLayout& layout, bool strict = false);
LoadResult parse_fasta(std::istream& in, const AlphabetLayout& layout, bool strict = false);
InputFormat format_from_extension(const std::filesystem::path& path);

struct ClassStats {
    std::string label;
    std::size_t count = 0;
    std::size_t min_len = 0;
    std::size_t max_len = 0;
    double mean_len = 0.0;
};

// One row per class, by descending count (ties by label).
std::vector<ClassStats> dataset_stats(const Dataset& dataset);

enum class SplitPart { train, validation, test };
std::string to_string(SplitPart part);
SplitPart split_part_from_string(const std::string& name);

struct SplitAssignment {
    std::set<std::string> train;
    std::set<std::string> validation;
    std::set<std::string> test;
    std::uint64_t seed = 0;

    SplitPart part_of(const std::string& id) const;
};

// Two-stage stratified split: round(N * test_frac) ids are held out for test,
// then round(remaining * val_frac) for validation. Per-class counts in every
// part are the floor or ceiling of the class's proportional quota, so each
// part preserves class proportions to within one sample. Members of each
// class are shuffled with a generator seeded by `seed`.
SplitAssignment stratified_split(const Dataset& dataset, double test_frac, double val_frac,
                                 std::uint64_t seed);

struct ManifestEntry {
    std::string id;
    std::string label;
    SplitPart split = SplitPart::train;
    std::string image_path;  // relative to the manifest's directory
    double epsilon = 0.0;
    double alpha = 0.0;
    int image_size = 0;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

using DatasetManifest = std::vector<ManifestEntry>;

// JSON lines, written to a temporary file and renamed into place.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Writes `contents` to a sibling temp file, then renames it over `path`.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace cgrips
