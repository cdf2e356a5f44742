#include "fmc/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "fmc/error.hpp"
#include "fmc/log.hpp"

namespace fmc {

namespace {

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

// Splits one CSV record. Double quotes group a field; "" inside quotes is a
// literal quote. Surrounding whitespace is dropped.
std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    return out + "\"";
}

double parse_number(const std::string& cell, std::size_t line_no, const std::string& column) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    double value = std::strtod(begin, &end);
    if (cell.empty() || end != begin + cell.size() || !std::isfinite(value))
        throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": column '" + column +
                                          "' is not a finite number: '" + cell + "'");
    return value;
}

// Dense code assignment in first-appearance order.
class LevelEncoder {
public:
    LevelEncoder() = default;
    explicit LevelEncoder(const std::vector<std::string>& fixed) : levels_(fixed), frozen_(true) {
        for (std::size_t i = 0; i < levels_.size(); ++i) index_.emplace(levels_[i], static_cast<int>(i));
    }

    int encode(const std::string& value, const std::string& column) {
        auto it = index_.find(value);
        if (it != index_.end()) return it->second;
        if (frozen_)
            throw Error(ErrorCode::Schema, "column '" + column + "' has unseen level '" + value + "'");
        int code = static_cast<int>(levels_.size());
        levels_.push_back(value);
        index_.emplace(value, code);
        return code;
    }

    const std::vector<std::string>& levels() const { return levels_; }

private:
    std::vector<std::string> levels_;
    std::unordered_map<std::string, int> index_;
    bool frozen_ = false;
};

struct LoadPlan {
    std::vector<std::size_t> cont_cols;
    std::vector<std::size_t> cate_cols;
    std::optional<std::size_t> sensitive_col;
};

Dataset load_impl(const std::string& path, const CsvSchema& schema, bool require_sensitive,
                  const Dataset* reference) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw Error(ErrorCode::Empty, "'" + path + "' has no header row");
    std::vector<std::string> header = split_record(line);

    if (reference && !reference->header.empty()) {
        // Rows to be assigned may come without the sensitive column.
        bool has_sensitive = std::find(header.begin(), header.end(), reference->sensitive_name) != header.end();
        std::size_t expected = reference->header.size() - (require_sensitive || has_sensitive ? 0 : 1);
        if (header.size() != expected)
            throw Error(ErrorCode::Dim, "'" + path + "' has " + std::to_string(header.size()) +
                                            " columns, model expects " + std::to_string(expected));
    }

    auto column_index = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };

    Dataset ds;
    ds.header = header;
    LoadPlan plan;
    std::size_t sensitive_roles = 0;
    for (const auto& [name, role] : schema.columns) {
        if (role == ColumnRole::Sensitive) ++sensitive_roles;
        if (role == ColumnRole::Ignored) continue;
        auto idx = column_index(name);
        if (!idx) {
            if (role == ColumnRole::Sensitive && !require_sensitive) continue;
            throw Error(reference ? ErrorCode::Dim : ErrorCode::Schema,
                        "column '" + name + "' named in schema is missing from '" + path + "'");
        }
        switch (role) {
        case ColumnRole::Continuous:
            plan.cont_cols.push_back(*idx);
            ds.cont_names.push_back(name);
            break;
        case ColumnRole::Categorical:
            plan.cate_cols.push_back(*idx);
            ds.cate_names.push_back(name);
            break;
        case ColumnRole::Sensitive:
            plan.sensitive_col = *idx;
            ds.sensitive_name = name;
            break;
        case ColumnRole::Ignored: break;
        }
    }
    if (sensitive_roles != 1)
        throw Error(ErrorCode::Schema, "schema must name exactly one sensitive column, found " +
                                           std::to_string(sensitive_roles));

    std::vector<LevelEncoder> cate_enc;
    LevelEncoder group_enc;
    if (reference) {
        for (const auto& lv : reference->cate_levels) cate_enc.emplace_back(lv);
        group_enc = LevelEncoder(reference->group_levels);
    } else {
        cate_enc.resize(plan.cate_cols.size());
    }

    std::vector<double> cont_row(plan.cont_cols.size());
    std::vector<int> cate_row(plan.cate_cols.size());
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_record(line);
        if (fields.size() != header.size())
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(header.size()) + " fields, got " +
                                              std::to_string(fields.size()));
        for (std::size_t j = 0; j < plan.cont_cols.size(); ++j)
            cont_row[j] = parse_number(fields[plan.cont_cols[j]], line_no, ds.cont_names[j]);
        for (std::size_t j = 0; j < plan.cate_cols.size(); ++j)
            cate_row[j] = cate_enc[j].encode(fields[plan.cate_cols[j]], ds.cate_names[j]);
        ds.cont.append_row(cont_row);
        ds.cate.append_row(cate_row);
        ds.sensitive.push_back(
            plan.sensitive_col ? group_enc.encode(fields[*plan.sensitive_col], ds.sensitive_name) : 0);
    }

    if (ds.sensitive.empty()) throw Error(ErrorCode::Empty, "'" + path + "' has no data rows");
    // Shape fix-up when a block has zero columns.
    if (plan.cont_cols.empty()) ds.cont = MatrixD(ds.sensitive.size(), 0);
    if (plan.cate_cols.empty()) ds.cate = MatrixI(ds.sensitive.size(), 0);

    for (std::size_t j = 0; j < cate_enc.size(); ++j) {
        ds.cate_levels.push_back(cate_enc[j].levels());
        ds.cardinalities.push_back(cate_enc[j].levels().size());
    }
    ds.group_levels = plan.sensitive_col ? group_enc.levels() : std::vector<std::string>{"all"};
    if (reference && !plan.sensitive_col) ds.group_levels = reference->group_levels;
    ds.num_groups = ds.group_levels.size();

    if (require_sensitive && !reference && ds.num_groups < 2)
        throw Error(ErrorCode::GroupDegenerate,
                    "sensitive column '" + ds.sensitive_name + "' has a single distinct value");
    return ds;
}

} // namespace

CsvSchema CsvSchema::parse(const std::string& text) {
    CsvSchema schema;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        auto colon = item.rfind(':');
        if (colon == std::string::npos)
            throw Error(ErrorCode::Schema, "schema entry '" + item + "' lacks ':role'");
        std::string name = trim(item.substr(0, colon));
        std::string role = trim(item.substr(colon + 1));
        ColumnRole r;
        if (role == "cont" || role == "continuous") r = ColumnRole::Continuous;
        else if (role == "cat" || role == "categorical") r = ColumnRole::Categorical;
        else if (role == "sensitive") r = ColumnRole::Sensitive;
        else if (role == "ignore" || role == "ignored") r = ColumnRole::Ignored;
        else throw Error(ErrorCode::Schema, "unknown column role '" + role + "' for '" + name + "'");
        schema.columns.emplace_back(name, r);
    }
    return schema;
}

std::string CsvSchema::to_string() const {
    std::string out;
    for (const auto& [name, role] : columns) {
        if (!out.empty()) out += ",";
        out += name + ":";
        switch (role) {
        case ColumnRole::Continuous: out += "cont"; break;
        case ColumnRole::Categorical: out += "cat"; break;
        case ColumnRole::Sensitive: out += "sensitive"; break;
        case ColumnRole::Ignored: out += "ignore"; break;
        }
    }
    return out;
}

std::optional<ColumnRole> CsvSchema::role_of(const std::string& name) const {
    for (const auto& [n, r] : columns)
        if (n == name) return r;
    return std::nullopt;
}

std::vector<std::size_t> Dataset::group_sizes() const {
    std::vector<std::size_t> sizes(num_groups, 0);
    for (int s : sensitive) ++sizes[static_cast<std::size_t>(s)];
    return sizes;
}

void Dataset::validate() const {
    const std::size_t n = size();
    if (cont.rows() != n || cate.rows() != n)
        throw Error(ErrorCode::Precondition, "dataset blocks disagree on row count");
    if (cate.cols() != cardinalities.size())
        throw Error(ErrorCode::Precondition, "categorical block width does not match cardinalities");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < cate.cols(); ++j) {
            int c = cate(i, j);
            if (c < 0 || static_cast<std::size_t>(c) >= cardinalities[j])
                throw Error(ErrorCode::Precondition, "categorical code out of range");
        }
        if (sensitive[i] < 0 || static_cast<std::size_t>(sensitive[i]) >= num_groups)
            throw Error(ErrorCode::Precondition, "sensitive label out of range");
    }
    for (std::size_t s : group_sizes())
        if (s == 0) throw Error(ErrorCode::GroupDegenerate, "a sensitive group is empty");
}

Dataset load_csv(const std::string& path, const CsvSchema& schema, bool require_sensitive) {
    return load_impl(path, schema, require_sensitive, nullptr);
}

Dataset load_csv_like(const std::string& path, const Dataset& reference, bool require_sensitive) {
    CsvSchema schema;
    for (const auto& n : reference.cont_names) schema.columns.emplace_back(n, ColumnRole::Continuous);
    for (const auto& n : reference.cate_names) schema.columns.emplace_back(n, ColumnRole::Categorical);
    schema.columns.emplace_back(reference.sensitive_name, ColumnRole::Sensitive);
    return load_impl(path, schema, require_sensitive, &reference);
}

void write_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    out.precision(17);
    std::vector<std::string> names = ds.cont_names;
    names.insert(names.end(), ds.cate_names.begin(), ds.cate_names.end());
    names.push_back(ds.sensitive_name);
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << quote_if_needed(names[j]);
    out << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        bool first = true;
        auto sep = [&] {
            if (!first) out << ',';
            first = false;
        };
        for (double v : ds.cont.row(i)) {
            sep();
            out << v;
        }
        for (std::size_t j = 0; j < ds.d_cate(); ++j) {
            sep();
            out << quote_if_needed(ds.cate_levels[j][static_cast<std::size_t>(ds.cate(i, j))]);
        }
        sep();
        out << quote_if_needed(ds.group_levels[static_cast<std::size_t>(ds.sensitive[i])]);
        out << '\n';
    }
}

Dataset standardize(const Dataset& ds) {
    const std::size_t n = ds.size();
    if (n < 2) throw Error(ErrorCode::Precondition, "standardize needs at least two rows");
    Dataset out = ds;
    const std::size_t d = ds.d_cont();
    out.preprocess.standardized = true;
    out.preprocess.mean.assign(d, 0.0);
    out.preprocess.std.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += ds.cont(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double c = ds.cont(i, j) - mean;
            var += c * c;
        }
        double sd = std::sqrt(var / static_cast<double>(n));
        out.preprocess.mean[j] = mean;
        // Relative threshold: a column whose spread is pure rounding noise is constant.
        if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
            logger().warn("continuous column '{}' is constant; mapped to zeros",
                          j < ds.cont_names.size() ? ds.cont_names[j] : std::to_string(j));
            sd = 0.0;
        }
        out.preprocess.std[j] = sd;
        for (std::size_t i = 0; i < n; ++i)
            out.cont(i, j) = sd > 0.0 ? (ds.cont(i, j) - mean) / sd : 0.0;
    }
    return out;
}

Dataset l2_normalize(const Dataset& ds) {
    Dataset out = ds;
    out.preprocess.l2_normalized = true;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto row = out.cont.row(i);
        if (row.empty()) continue;
        double sq = 0.0;
        for (double v : row) sq += v * v;
        if (sq == 0.0)
            throw Error(ErrorCode::ZeroVector, "row " + std::to_string(i) + " has zero norm");
        double norm = std::sqrt(sq);
        for (double& v : row) v /= norm;
    }
    return out;
}

Dataset apply_preprocess(const Dataset& ds, const PreprocessStats& stats) {
    Dataset out = ds;
    if (stats.standardized) {
        if (stats.mean.size() != ds.d_cont())
            throw Error(ErrorCode::Dim, "stored standardization has " +
                                            std::to_string(stats.mean.size()) + " columns, data has " +
                                            std::to_string(ds.d_cont()));
        for (std::size_t i = 0; i < ds.size(); ++i)
            for (std::size_t j = 0; j < ds.d_cont(); ++j)
                out.cont(i, j) =
                    stats.std[j] > 0.0 ? (ds.cont(i, j) - stats.mean[j]) / stats.std[j] : 0.0;
    }
    if (stats.l2_normalized) out = l2_normalize(out);
    out.preprocess = stats;
    return out;
}

SubSample subsample(const Dataset& ds, std::size_t n, Rng& rng) {
    if (n == 0) throw Error(ErrorCode::Precondition, "subsample size must be at least 1");
    if (ds.size() == 0) throw Error(ErrorCode::Empty, "cannot subsample an empty dataset");
    for (std::size_t s : ds.group_sizes())
        if (s == 0) throw Error(ErrorCode::GroupDegenerate, "dataset lacks a sensitive group");

    std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
    SubSample sub;
    for (int attempt = 0; attempt < kSubsampleRetries; ++attempt) {
        sub.indices.resize(n);
        sub.group_counts.assign(ds.num_groups, 0);
        for (auto& idx : sub.indices) {
            idx = pick(rng);
            ++sub.group_counts[static_cast<std::size_t>(ds.sensitive[idx])];
        }
        if (std::all_of(sub.group_counts.begin(), sub.group_counts.end(),
                        [](std::size_t c) { return c > 0; }))
            return sub;
    }
    throw Error(ErrorCode::GroupMissing, "no subsample of size " + std::to_string(n) +
                                             " covered every group after " +
                                             std::to_string(kSubsampleRetries) + " draws");
}

SubSample identity_subsample(const Dataset& ds) {
    SubSample sub;
    sub.indices.resize(ds.size());
    std::iota(sub.indices.begin(), sub.indices.end(), std::size_t{0});
    sub.group_counts = ds.group_sizes();
    return sub;
}

Dataset select_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out = ds;
    out.cont = MatrixD(rows.size(), ds.d_cont());
    out.cate = MatrixI(rows.size(), ds.d_cate());
    out.sensitive.resize(rows.size());
    if (ds.truth) out.truth = std::vector<int>(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::size_t i = rows[r];
        std::copy(ds.cont.row(i).begin(), ds.cont.row(i).end(), out.cont.row(r).begin());
        std::copy(ds.cate.row(i).begin(), ds.cate.row(i).end(), out.cate.row(r).begin());
        out.sensitive[r] = ds.sensitive[i];
        if (ds.truth) (*out.truth)[r] = (*ds.truth)[i];
    }
    return out;
}

namespace {

void check_simplex(const std::vector<double>& p, const std::string& field) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error(ErrorCode::Simplex, "'" + field + "' has a negative or non-finite entry");
        sum += v;
    }
    if (p.empty() || std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorCode::Simplex, "'" + field + "' does not sum to 1");
}

} // namespace

void SyntheticSpec::validate() const {
    const std::size_t k = weights.size();
    if (k == 0) throw Error(ErrorCode::Config, "'weights' is empty");
    check_simplex(weights, "weights");
    if (n == 0) throw Error(ErrorCode::Config, "'n' must be positive");
    if (!centers.empty() && centers.size() != k)
        throw Error(ErrorCode::Config, "'centers' needs one row per component");
    const std::size_t d = centers.empty() ? 0 : centers[0].size();
    for (const auto& c : centers)
        if (c.size() != d) throw Error(ErrorCode::Config, "'centers' rows differ in length");
    if (d > 0) {
        if (scales.size() != k) throw Error(ErrorCode::Config, "'scales' needs one row per component");
        for (const auto& s : scales) {
            if (s.size() != 1 && s.size() != d)
                throw Error(ErrorCode::Config, "'scales' rows must have length 1 or d");
            for (double v : s)
                if (!(v > 0.0)) throw Error(ErrorCode::Config, "'scales' entries must be positive");
        }
    }
    if (group_probs.size() != k)
        throw Error(ErrorCode::Config, "'group_probs' needs one entry per component");
    for (std::size_t c = 0; c < k; ++c) {
        check_simplex(group_probs[c], "group_bias");
        if (group_probs[c].size() != group_probs[0].size() || group_probs[c].size() < 2)
            throw Error(ErrorCode::Config, "'group_probs' rows must share a length >= 2");
    }
    if (!cardinalities.empty()) {
        if (cat_tables.size() != k)
            throw Error(ErrorCode::Config, "'cat_tables' needs one entry per component");
        for (const auto& comp : cat_tables) {
            if (comp.size() != cardinalities.size())
                throw Error(ErrorCode::Config, "'cat_tables' needs one table per categorical feature");
            for (std::size_t j = 0; j < comp.size(); ++j) {
                if (comp[j].size() != cardinalities[j])
                    throw Error(ErrorCode::Config, "'cat_tables' table length != cardinality");
                check_simplex(comp[j], "cat_tables");
            }
        }
    }
}

Dataset make_synthetic_mixture(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t k = spec.weights.size();
    const std::size_t d = spec.centers.empty() ? 0 : spec.centers[0].size();
    const std::size_t dc = spec.cardinalities.size();
    const std::size_t m = spec.group_probs[0].size();

    Rng rng = make_stream(spec.seed, "synth");
    std::discrete_distribution<int> component(spec.weights.begin(), spec.weights.end());
    std::vector<std::discrete_distribution<int>> group;
    for (const auto& p : spec.group_probs) group.emplace_back(p.begin(), p.end());
    std::vector<std::vector<std::discrete_distribution<int>>> cat(k);
    for (std::size_t c = 0; c < k && dc > 0; ++c)
        for (const auto& table : spec.cat_tables[c]) cat[c].emplace_back(table.begin(), table.end());
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset ds;
    ds.cont = MatrixD(spec.n, d);
    ds.cate = MatrixI(spec.n, dc);
    ds.cardinalities = spec.cardinalities;
    ds.sensitive.resize(spec.n);
    ds.num_groups = m;
    std::vector<int> truth(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        int z = component(rng);
        auto zc = static_cast<std::size_t>(z);
        truth[i] = z;
        for (std::size_t j = 0; j < d; ++j) {
            const auto& s = spec.scales[zc];
            double scale = s.size() == 1 ? s[0] : s[j];
            ds.cont(i, j) = spec.centers[zc][j] + scale * gauss(rng);
        }
        for (std::size_t j = 0; j < dc; ++j) ds.cate(i, j) = cat[zc][j](rng);
        ds.sensitive[i] = group[zc](rng);
    }
    ds.truth = std::move(truth);

    for (std::size_t j = 0; j < d; ++j) ds.cont_names.push_back("x" + std::to_string(j + 1));
    for (std::size_t j = 0; j < dc; ++j) {
        ds.cate_names.push_back("c" + std::to_string(j + 1));
        std::vector<std::string> levels;
        for (std::size_t c = 0; c < spec.cardinalities[j]; ++c) levels.push_back("v" + std::to_string(c + 1));
        ds.cate_levels.push_back(std::move(levels));
    }
    for (std::size_t s = 0; s < m; ++s) ds.group_levels.push_back("g" + std::to_string(s + 1));
    ds.header = ds.cont_names;
    ds.header.insert(ds.header.end(), ds.cate_names.begin(), ds.cate_names.end());
    ds.header.push_back(ds.sensitive_name);
    return ds;
}

} // namespace fmc
