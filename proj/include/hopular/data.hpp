#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hopular/rng.hpp"

namespace hopular {

enum class AttrKind { categorical, continuous };
enum class Task { classification, regression };

struct Attribute {
    std::string name;
    AttrKind kind = AttrKind::continuous;
    int64_t cardinality = 0;  // categorical only, >= 2
    bool is_target = false;
};

struct TableSchema {
    std::vector<Attribute> attrs;
    Task task = Task::classification;
    int64_t target_index = -1;

    int64_t attribute_count() const { return static_cast<int64_t>(attrs.size()); }
    const Attribute& target() const { return attrs[static_cast<size_t>(target_index)]; }

    // One attribute per line: name,kind[,cardinality],is_target
    static TableSchema parse_file(const std::string& path);
    static TableSchema parse_text(const std::string& text);
    std::string to_text() const;
    void validate() const;
};

struct RawValue {
    bool missing = false;
    double number = 0.0;  // continuous
    int64_t category = -1;  // categorical token index
};

enum Split : int { kTrain = 0, kVal = 1, kTest = 2, kUnassigned = -1 };

// Model-ready view of a row: categoricals as indices (missing category =
// declared cardinality), continuous as z-scores against training statistics.
struct EncodedSample {
    std::vector<double> values;
    std::vector<int64_t> categories;
    std::vector<bool> missing;
};

struct Dataset {
    TableSchema schema;
    std::vector<std::vector<std::string>> category_tokens;  // per attribute, index -> token
    std::vector<std::vector<RawValue>> rows;
    std::vector<int> split_of_row;

    // Normalization statistics, computed on the training split only.
    bool has_stats = false;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<std::string> warnings;

    int64_t row_count() const { return static_cast<int64_t>(rows.size()); }
    std::vector<int64_t> rows_of_split(int split) const;
    int64_t class_count() const;  // target cardinality (classification)
    int64_t target_class(int64_t row) const;
};

Dataset load(const std::string& table_file, const std::string& schema_file);
void save(const Dataset& ds, const std::string& path);

struct SplitSpec {
    // Either fractions summing to 1, or an explicit index file with three
    // sections of zero-based row indices.
    std::optional<std::array<double, 3>> fractions;
    std::optional<std::string> index_file;
};

// Assigns every row to train/val/test and computes training-split statistics.
// Fraction splits are deterministic for a given seed and stratified by class
// for classification tasks.
void split(Dataset& ds, const SplitSpec& spec, uint64_t seed);

// Direct split assignment (tests, fixtures); recomputes training statistics
// and allows empty validation/test parts.
void assign_split(Dataset& ds, const std::vector<int>& split_of_row);

EncodedSample encode(const Dataset& ds, int64_t row);
double denormalize_target(const Dataset& ds, double z);
double normalized_target_value(const Dataset& ds, int64_t row);

// FNV-1a content fingerprints used in manifests and checkpoints.
uint64_t fnv1a64(const std::string& bytes);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t value);

}  // namespace hopular
