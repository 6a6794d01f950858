#include "hopular/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hopular/errors.hpp"

namespace hopular {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

TableSchema TableSchema::parse_text(const std::string& text) {
    TableSchema schema;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> f = split_csv_line(line);
        Attribute attr;
        if (f.size() == 4 && f[1] == "categorical") {
            attr.kind = AttrKind::categorical;
            attr.cardinality = std::strtoll(f[2].c_str(), nullptr, 10);
            attr.is_target = f[3] == "1" || f[3] == "true";
        } else if (f.size() == 3 && f[1] == "continuous") {
            attr.kind = AttrKind::continuous;
            attr.is_target = f[2] == "1" || f[2] == "true";
        } else {
            throw ParseError("schema line " + std::to_string(line_no) + ": expected "
                             "'name,categorical,cardinality,is_target' or "
                             "'name,continuous,is_target', got '" + line + "'");
        }
        attr.name = f[0];
        schema.attrs.push_back(std::move(attr));
    }
    for (size_t j = 0; j < schema.attrs.size(); ++j) {
        if (schema.attrs[j].is_target) schema.target_index = static_cast<int64_t>(j);
    }
    if (schema.target_index >= 0)
        schema.task = schema.target().kind == AttrKind::categorical ? Task::classification
                                                                    : Task::regression;
    schema.validate();
    return schema;
}

TableSchema TableSchema::parse_file(const std::string& path) {
    return parse_text(read_file(path));
}

std::string TableSchema::to_text() const {
    std::ostringstream os;
    for (const Attribute& attr : attrs) {
        if (attr.kind == AttrKind::categorical)
            os << attr.name << ",categorical," << attr.cardinality << ","
               << (attr.is_target ? 1 : 0) << "\n";
        else
            os << attr.name << ",continuous," << (attr.is_target ? 1 : 0) << "\n";
    }
    return os.str();
}

void TableSchema::validate() const {
    int targets = 0;
    for (const Attribute& attr : attrs) {
        if (attr.is_target) ++targets;
        if (attr.kind == AttrKind::categorical && attr.cardinality < 2)
            throw ParseError("schema: categorical attribute '" + attr.name +
                             "' needs cardinality >= 2");
    }
    if (targets != 1)
        throw ParseError("schema: exactly one target attribute required, found " +
                         std::to_string(targets));
}

std::vector<int64_t> Dataset::rows_of_split(int s) const {
    std::vector<int64_t> out;
    for (int64_t r = 0; r < row_count(); ++r)
        if (split_of_row[static_cast<size_t>(r)] == s) out.push_back(r);
    return out;
}

int64_t Dataset::class_count() const {
    if (schema.task != Task::classification)
        throw ContractError("class_count on a regression dataset");
    return schema.target().cardinality;
}

int64_t Dataset::target_class(int64_t row) const {
    const RawValue& v = rows[static_cast<size_t>(row)][static_cast<size_t>(schema.target_index)];
    if (v.missing) throw ContractError("row " + std::to_string(row) + " has a missing target");
    return v.category;
}

Dataset load(const std::string& table_file, const std::string& schema_file) {
    Dataset ds;
    ds.schema = TableSchema::parse_file(schema_file);
    const int64_t d = ds.schema.attribute_count();
    ds.category_tokens.assign(static_cast<size_t>(d), {});

    std::ifstream in(table_file);
    if (!in) throw ParseError("cannot open table file: " + table_file);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty table file: " + table_file);

    const std::vector<std::string> header = split_csv_line(line);
    if (static_cast<int64_t>(header.size()) != d)
        throw ParseError("header has " + std::to_string(header.size()) + " columns, schema has " +
                         std::to_string(d));
    for (int64_t j = 0; j < d; ++j) {
        if (header[static_cast<size_t>(j)] != ds.schema.attrs[static_cast<size_t>(j)].name)
            throw ParseError("header column " + std::to_string(j) + " is '" +
                             header[static_cast<size_t>(j)] + "', schema expects '" +
                             ds.schema.attrs[static_cast<size_t>(j)].name + "'");
    }

    int64_t row_no = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (static_cast<int64_t>(fields.size()) != d)
            throw ParseError("row " + std::to_string(row_no) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(d));
        std::vector<RawValue> row(static_cast<size_t>(d));
        for (int64_t j = 0; j < d; ++j) {
            const Attribute& attr = ds.schema.attrs[static_cast<size_t>(j)];
            const std::string& token = fields[static_cast<size_t>(j)];
            RawValue& v = row[static_cast<size_t>(j)];
            if (token.empty()) {
                v.missing = true;
                continue;
            }
            if (attr.kind == AttrKind::continuous) {
                char* end = nullptr;
                v.number = std::strtod(token.c_str(), &end);
                if (end == token.c_str() || *end != '\0')
                    throw ParseError("row " + std::to_string(row_no) + ", column '" + attr.name +
                                     "': cannot parse '" + token + "' as a number");
            } else {
                std::vector<std::string>& tokens = ds.category_tokens[static_cast<size_t>(j)];
                const auto it = std::find(tokens.begin(), tokens.end(), token);
                if (it != tokens.end()) {
                    v.category = it - tokens.begin();
                } else if (static_cast<int64_t>(tokens.size()) < attr.cardinality) {
                    v.category = static_cast<int64_t>(tokens.size());
                    tokens.push_back(token);
                } else {
                    throw ParseError("row " + std::to_string(row_no) + ", column '" + attr.name +
                                     "': unknown category token '" + token +
                                     "' exceeds declared cardinality " +
                                     std::to_string(attr.cardinality));
                }
            }
        }
        ds.rows.push_back(std::move(row));
        ++row_no;
    }
    ds.split_of_row.assign(ds.rows.size(), kUnassigned);
    return ds;
}

void save(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open output file: " + path);
    const int64_t d = ds.schema.attribute_count();
    for (int64_t j = 0; j < d; ++j)
        out << (j ? "," : "") << ds.schema.attrs[static_cast<size_t>(j)].name;
    out << "\n";
    for (const auto& row : ds.rows) {
        for (int64_t j = 0; j < d; ++j) {
            if (j) out << ",";
            const RawValue& v = row[static_cast<size_t>(j)];
            if (v.missing) continue;
            if (ds.schema.attrs[static_cast<size_t>(j)].kind == AttrKind::continuous)
                out << format_double(v.number);
            else
                out << ds.category_tokens[static_cast<size_t>(j)][static_cast<size_t>(v.category)];
        }
        out << "\n";
    }
}

namespace {

// Largest-remainder apportionment of n items to the given fractions.
std::array<int64_t, 3> apportion(int64_t n, const std::array<double, 3>& fractions) {
    std::array<int64_t, 3> counts{};
    std::array<double, 3> remainders{};
    int64_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
        const double exact = fractions[static_cast<size_t>(s)] * static_cast<double>(n);
        counts[static_cast<size_t>(s)] = static_cast<int64_t>(std::floor(exact));
        remainders[static_cast<size_t>(s)] = exact - std::floor(exact);
        assigned += counts[static_cast<size_t>(s)];
    }
    while (assigned < n) {
        int best = 0;
        for (int s = 1; s < 3; ++s)
            if (remainders[static_cast<size_t>(s)] > remainders[static_cast<size_t>(best)])
                best = s;
        ++counts[static_cast<size_t>(best)];
        remainders[static_cast<size_t>(best)] = -1.0;
        ++assigned;
    }
    return counts;
}

void assign_group(Dataset& ds, std::vector<int64_t> group, const std::array<double, 3>& fractions,
                  Rng& rng) {
    rng.shuffle(group);
    const std::array<int64_t, 3> counts = apportion(static_cast<int64_t>(group.size()), fractions);
    int64_t pos = 0;
    for (int s = 0; s < 3; ++s)
        for (int64_t k = 0; k < counts[static_cast<size_t>(s)]; ++k)
            ds.split_of_row[static_cast<size_t>(group[static_cast<size_t>(pos++)])] = s;
}

void compute_train_stats(Dataset& ds) {
    const int64_t d = ds.schema.attribute_count();
    ds.mean.assign(static_cast<size_t>(d), 0.0);
    ds.stddev.assign(static_cast<size_t>(d), 1.0);
    const std::vector<int64_t> train = ds.rows_of_split(kTrain);
    for (int64_t j = 0; j < d; ++j) {
        if (ds.schema.attrs[static_cast<size_t>(j)].kind != AttrKind::continuous) continue;
        double sum = 0.0;
        int64_t n = 0;
        for (int64_t r : train) {
            const RawValue& v = ds.rows[static_cast<size_t>(r)][static_cast<size_t>(j)];
            if (v.missing) continue;
            sum += v.number;
            ++n;
        }
        const double mu = n > 0 ? sum / static_cast<double>(n) : 0.0;
        double ss = 0.0;
        for (int64_t r : train) {
            const RawValue& v = ds.rows[static_cast<size_t>(r)][static_cast<size_t>(j)];
            if (v.missing) continue;
            ss += (v.number - mu) * (v.number - mu);
        }
        const double sd = n > 0 ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
        ds.mean[static_cast<size_t>(j)] = mu;
        if (sd > 0.0) {
            ds.stddev[static_cast<size_t>(j)] = sd;
        } else {
            ds.stddev[static_cast<size_t>(j)] = 0.0;
            ds.warnings.push_back("attribute '" + ds.schema.attrs[static_cast<size_t>(j)].name +
                                  "' is constant on the training split; values map to 0");
        }
    }
    ds.has_stats = true;
}

void parse_index_file(Dataset& ds, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open split index file: " + path);
    std::string line;
    int current = kUnassigned;
    std::vector<int64_t> seen_count(ds.rows.size(), 0);
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line == "train:") { current = kTrain; continue; }
        if (line == "val:") { current = kVal; continue; }
        if (line == "test:") { current = kTest; continue; }
        if (current == kUnassigned)
            throw ParseError("split index file: indices before any section header");
        std::istringstream is(line);
        int64_t idx = 0;
        while (is >> idx) {
            if (idx < 0 || idx >= ds.row_count())
                throw ParseError("split index " + std::to_string(idx) + " out of range");
            if (++seen_count[static_cast<size_t>(idx)] > 1)
                throw ParseError("split index " + std::to_string(idx) + " assigned twice");
            ds.split_of_row[static_cast<size_t>(idx)] = current;
        }
    }
    for (int64_t r = 0; r < ds.row_count(); ++r)
        if (ds.split_of_row[static_cast<size_t>(r)] == kUnassigned)
            throw ParseError("split index file does not cover row " + std::to_string(r));
}

}  // namespace

void split(Dataset& ds, const SplitSpec& spec, uint64_t seed) {
    std::fill(ds.split_of_row.begin(), ds.split_of_row.end(), kUnassigned);
    if (spec.index_file) {
        parse_index_file(ds, *spec.index_file);
    } else if (spec.fractions) {
        const std::array<double, 3>& f = *spec.fractions;
        if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9)
            throw ConfigError("split fractions must sum to 1");
        Rng rng(seed);
        if (ds.schema.task == Task::classification) {
            // Stratified: apportion each class independently.
            std::vector<std::vector<int64_t>> by_class(
                static_cast<size_t>(ds.schema.target().cardinality) + 1);
            for (int64_t r = 0; r < ds.row_count(); ++r) {
                const RawValue& v =
                    ds.rows[static_cast<size_t>(r)][static_cast<size_t>(ds.schema.target_index)];
                const size_t cls = v.missing ? by_class.size() - 1
                                             : static_cast<size_t>(v.category);
                by_class[cls].push_back(r);
            }
            for (auto& group : by_class)
                if (!group.empty()) assign_group(ds, std::move(group), f, rng);
        } else {
            std::vector<int64_t> all(static_cast<size_t>(ds.row_count()));
            std::iota(all.begin(), all.end(), 0);
            assign_group(ds, std::move(all), f, rng);
        }
    } else {
        throw ConfigError("split spec needs fractions or an index file");
    }

    for (int s = 0; s < 3; ++s)
        if (ds.rows_of_split(s).empty())
            throw ConfigError("empty split: " + std::string(s == 0   ? "train"
                                                            : s == 1 ? "val"
                                                                     : "test"));
    compute_train_stats(ds);
}

void assign_split(Dataset& ds, const std::vector<int>& split_of_row) {
    if (split_of_row.size() != ds.rows.size())
        throw ConfigError("assign_split: assignment size does not match row count");
    ds.split_of_row = split_of_row;
    if (ds.rows_of_split(kTrain).empty()) throw ConfigError("empty split: train");
    compute_train_stats(ds);
}

EncodedSample encode(const Dataset& ds, int64_t row) {
    if (!ds.has_stats)
        throw ContractError("encode before split(): normalization statistics unavailable");
    if (row < 0 || row >= ds.row_count()) throw ContractError("encode: row out of range");
    const int64_t d = ds.schema.attribute_count();
    EncodedSample enc;
    enc.values.assign(static_cast<size_t>(d), 0.0);
    enc.categories.assign(static_cast<size_t>(d), -1);
    enc.missing.assign(static_cast<size_t>(d), false);
    for (int64_t j = 0; j < d; ++j) {
        const Attribute& attr = ds.schema.attrs[static_cast<size_t>(j)];
        const RawValue& v = ds.rows[static_cast<size_t>(row)][static_cast<size_t>(j)];
        if (attr.kind == AttrKind::categorical) {
            // Missing values get the dedicated category at index `cardinality`.
            enc.categories[static_cast<size_t>(j)] = v.missing ? attr.cardinality : v.category;
            enc.missing[static_cast<size_t>(j)] = v.missing;
        } else {
            const double sd = ds.stddev[static_cast<size_t>(j)];
            if (v.missing || sd == 0.0) {
                enc.values[static_cast<size_t>(j)] = 0.0;  // training-mean imputation
                enc.missing[static_cast<size_t>(j)] = v.missing;
            } else {
                enc.values[static_cast<size_t>(j)] =
                    (v.number - ds.mean[static_cast<size_t>(j)]) / sd;
            }
        }
    }
    return enc;
}

double denormalize_target(const Dataset& ds, double z) {
    const size_t t = static_cast<size_t>(ds.schema.target_index);
    const double sd = ds.stddev[t];
    return sd == 0.0 ? ds.mean[t] : z * sd + ds.mean[t];
}

double normalized_target_value(const Dataset& ds, int64_t row) {
    const size_t t = static_cast<size_t>(ds.schema.target_index);
    const RawValue& v = ds.rows[static_cast<size_t>(row)][t];
    if (v.missing) throw ContractError("row " + std::to_string(row) + " has a missing target");
    const double sd = ds.stddev[t];
    return sd == 0.0 ? 0.0 : (v.number - ds.mean[t]) / sd;
}

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a64_file(const std::string& path) { return fnv1a64(read_file(path)); }

std::string hex64(uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace hopular
