#include "fmc/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fmc/error.hpp"

namespace fmc {

namespace {

template <class T>
T get_as(const Json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::Schema, std::string("missing key '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("bad value for '") + key + "': " + e.what());
    }
}

Json matrix_to_json(const MatrixD& m) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
}

MatrixD matrix_from_json(const std::vector<std::vector<double>>& rows, std::size_t cols) {
    MatrixD m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw Error(ErrorCode::Schema, "ragged matrix in JSON");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

// NaN and infinities become null, which is how JSON spells "no value".
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

std::string join_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    return out + '\n';
}

} // namespace

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Parse, "'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

Json to_json(const ModelParams& p) {
    Json j;
    j["structure"] = to_string(p.structure);
    j["K"] = p.K();
    j["d_cont"] = p.d_cont();
    j["cardinalities"] = p.cardinalities;
    j["eta"] = p.eta;
    j["pi"] = p.pi();
    j["means"] = matrix_to_json(p.means);
    j["scale"] = p.scale;
    j["cat_logits"] = p.cat_logits;
    return j;
}

ModelParams model_params_from_json(const Json& j) {
    ModelParams p;
    p.structure = structure_from_string(get_as<std::string>(j, "structure"));
    p.eta = get_as<std::vector<double>>(j, "eta");
    auto d = get_as<std::size_t>(j, "d_cont");
    p.means = matrix_from_json(get_as<std::vector<std::vector<double>>>(j, "means"), d);
    if (p.means.rows() == 0 && d == 0) p.means = MatrixD(p.eta.size(), 0);
    p.scale = get_as<std::vector<double>>(j, "scale");
    p.cardinalities = get_as<std::vector<std::size_t>>(j, "cardinalities");
    p.cat_logits = get_as<std::vector<double>>(j, "cat_logits");
    try {
        p.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::Schema, std::string("model parameters are inconsistent: ") + e.what());
    }
    return p;
}

Json to_json(const PreprocessStats& s) {
    Json j;
    j["standardized"] = s.standardized;
    j["l2_normalized"] = s.l2_normalized;
    j["mean"] = s.mean;
    j["std"] = s.std;
    return j;
}

PreprocessStats preprocess_from_json(const Json& j) {
    PreprocessStats s;
    s.standardized = get_as<bool>(j, "standardized");
    s.l2_normalized = get_as<bool>(j, "l2_normalized");
    s.mean = get_as<std::vector<double>>(j, "mean");
    s.std = get_as<std::vector<double>>(j, "std");
    return s;
}

Json to_json(const Metrics& m) {
    Json j;
    j["loglik"] = number(m.loglik);
    j["nll"] = number(m.nll);
    j["delta_soft"] = number(m.delta_soft);
    j["delta_argmax"] = m.delta_argmax;
    j["gap_hard"] = number(m.gap_hard);
    j["additive_gap"] = number(m.additive_gap);
    j["balance"] = number(m.balance);
    j["cost"] = number(m.cost);
    return j;
}

Json to_json(const FitConfig& c) {
    Json j;
    j["algorithm"] = to_string(c.algorithm);
    j["K"] = c.K;
    j["lambda"] = c.lambda;
    j["T"] = c.T;
    j["R"] = c.R;
    j["gamma"] = c.gamma;
    j["batch_fraction"] = c.batch_fraction;
    j["subsample_fraction"] = c.subsample_fraction;
    j["structure"] = to_string(c.structure);
    j["penalty_form"] = to_string(c.penalty_form);
    j["cost"] = to_string(c.cost);
    j["seed"] = c.seed;
    j["tol"] = c.tol;
    j["kmeans_max_iter"] = c.kmeans_max_iter;
    j["max_halvings"] = c.max_halvings;
    return j;
}

bool apply_config_key(FitConfig& c, const std::string& key, const Json& value) {
    try {
        if (key == "algorithm") c.algorithm = algorithm_from_string(value.get<std::string>());
        else if (key == "K") c.K = value.get<std::size_t>();
        else if (key == "lambda") c.lambda = value.get<double>();
        else if (key == "T") c.T = value.get<std::size_t>();
        else if (key == "R") c.R = value.get<std::size_t>();
        else if (key == "gamma") c.gamma = value.get<double>();
        else if (key == "batch_fraction") c.batch_fraction = value.get<double>();
        else if (key == "subsample_fraction") c.subsample_fraction = value.get<double>();
        else if (key == "structure") c.structure = structure_from_string(value.get<std::string>());
        else if (key == "penalty_form") c.penalty_form = penalty_form_from_string(value.get<std::string>());
        else if (key == "cost") c.cost = cost_kind_from_string(value.get<std::string>());
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "tol") c.tol = value.get<double>();
        else if (key == "kmeans_max_iter") c.kmeans_max_iter = value.get<std::size_t>();
        else if (key == "max_halvings") c.max_halvings = value.get<int>();
        else return false;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Config, "bad value for '" + key + "': " + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::Config, e.what());
    }
    return true;
}

FitConfig fit_config_from_json(const Json& j, FitConfig base) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!apply_config_key(base, key, value)) throw Error(ErrorCode::Config, "unknown config key '" + key + "'");
    return base;
}

Json to_json(const FitReport& r) {
    Json j;
    j["config"] = to_json(r.config);
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["diverged"] = r.diverged;
    j["stalled"] = r.stalled;
    j["message"] = r.message;
    j["seconds"] = r.seconds;
    j["initial"] = to_json(r.initial);
    j["final"] = to_json(r.final_metrics);
    if (r.preprocess) j["preprocess"] = to_json(*r.preprocess);
    j["params"] = to_json(r.params);
    j["initial_params"] = to_json(r.initial_params);
    Json traj = Json::array();
    for (const auto& rec : r.trajectory) {
        Json t;
        t["iteration"] = rec.iteration;
        t["objective_before"] = number(rec.objective_before);
        t["objective"] = number(rec.objective);
        t["gamma"] = rec.gamma;
        t["metrics"] = to_json(rec.metrics);
        traj.push_back(std::move(t));
    }
    j["trajectory"] = std::move(traj);
    return j;
}

Json to_json(const SweepResult& s) {
    Json j;
    j["config"] = to_json(s.base);
    Json runs = Json::array();
    for (const auto& r : s.runs) {
        Json o;
        o["lambda"] = r.lambda;
        o["seed"] = r.seed;
        o["cost"] = number(r.cost);
        o["nll"] = number(r.nll);
        o["delta_soft"] = number(r.delta_soft);
        o["gap_hard"] = number(r.gap_hard);
        o["balance"] = number(r.balance);
        o["iters"] = r.iterations;
        o["seconds"] = r.seconds;
        o["status"] = r.status;
        o["pareto"] = r.pareto;
        runs.push_back(std::move(o));
    }
    j["runs"] = std::move(runs);
    Json sums = Json::array();
    for (const auto& m : s.summaries) {
        Json o;
        o["lambda"] = m.lambda;
        o["runs"] = m.runs;
        auto stat = [](const SeriesStat& st) { return Json{{"mean", number(st.mean)}, {"std", number(st.std)}}; };
        o["cost"] = stat(m.cost);
        o["nll"] = stat(m.nll);
        o["delta_soft"] = stat(m.delta_soft);
        o["gap_hard"] = stat(m.gap_hard);
        o["balance"] = stat(m.balance);
        o["pareto"] = m.pareto;
        sums.push_back(std::move(o));
    }
    j["summaries"] = std::move(sums);
    return j;
}

std::string report_csv_header() {
    return "algorithm,K,lambda,seed,cost,nll,delta_soft,gap_hard,balance,iters,seconds,converged\n";
}

std::string report_csv_row(const FitReport& r) {
    const Metrics& m = r.final_metrics;
    return join_row({to_string(r.config.algorithm), std::to_string(r.config.K), csv_number(r.config.lambda),
                     std::to_string(r.config.seed), csv_number(m.cost), csv_number(m.nll),
                     csv_number(m.delta_soft), csv_number(m.gap_hard), csv_number(m.balance),
                     std::to_string(r.iterations), csv_number(r.seconds), r.converged ? "1" : "0"});
}

std::string sweep_csv(const SweepResult& s) {
    std::string out = "lambda,seed,cost,nll,delta_soft,gap_hard,balance,iters,seconds,status,pareto\n";
    for (const auto& r : s.runs)
        out += join_row({csv_number(r.lambda), std::to_string(r.seed), csv_number(r.cost), csv_number(r.nll),
                         csv_number(r.delta_soft), csv_number(r.gap_hard), csv_number(r.balance),
                         std::to_string(r.iterations), csv_number(r.seconds), r.status, r.pareto ? "1" : "0"});
    return out;
}

std::string sweep_plot_csv(const SweepResult& s) {
    std::string out = "lambda,runs,cost_mean,cost_std,nll_mean,nll_std,delta_soft_mean,delta_soft_std,"
                      "gap_hard_mean,gap_hard_std,balance_mean,balance_std,pareto\n";
    for (const auto& m : s.summaries)
        out += join_row({csv_number(m.lambda), std::to_string(m.runs), csv_number(m.cost.mean),
                         csv_number(m.cost.std), csv_number(m.nll.mean), csv_number(m.nll.std),
                         csv_number(m.delta_soft.mean), csv_number(m.delta_soft.std),
                         csv_number(m.gap_hard.mean), csv_number(m.gap_hard.std),
                         csv_number(m.balance.mean), csv_number(m.balance.std), m.pareto ? "1" : "0"});
    return out;
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "synthetic spec must be a JSON object");
    static const std::vector<std::string> known = {"weights", "centers", "scales", "group_probs", "bias",
                                                   "cardinalities", "cat_tables", "n", "seed"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw Error(ErrorCode::Config, "unknown synthetic spec key '" + key + "'");
    SyntheticSpec s;
    try {
        s.weights = j.at("weights").get<std::vector<double>>();
        s.n = j.at("n").get<std::size_t>();
        s.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("centers")) s.centers = j["centers"].get<std::vector<std::vector<double>>>();
        if (j.contains("scales")) s.scales = j["scales"].get<std::vector<std::vector<double>>>();
        if (j.contains("cardinalities")) s.cardinalities = j["cardinalities"].get<std::vector<std::size_t>>();
        if (j.contains("cat_tables"))
            s.cat_tables = j["cat_tables"].get<std::vector<std::vector<std::vector<double>>>>();
        if (j.contains("group_probs") && j.contains("bias"))
            throw Error(ErrorCode::Config, "give either 'group_probs' or 'bias', not both");
        if (j.contains("group_probs")) {
            s.group_probs = j["group_probs"].get<std::vector<std::vector<double>>>();
        } else if (j.contains("bias")) {
            for (double b : j["bias"].get<std::vector<double>>()) s.group_probs.push_back({b, 1.0 - b});
        } else {
            throw Error(ErrorCode::Config, "synthetic spec needs 'group_probs' or 'bias'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Config, std::string("bad synthetic spec: ") + e.what());
    }
    if (s.scales.empty() && !s.centers.empty())
        s.scales.assign(s.centers.size(), std::vector<double>{1.0});
    return s;
}

Json to_json(const ModelParams& params, const Dataset& training) {
    Json j;
    j["params"] = to_json(params);
    j["preprocess"] = to_json(training.preprocess);
    Json layout;
    layout["header"] = training.header;
    layout["cont_names"] = training.cont_names;
    layout["cate_names"] = training.cate_names;
    layout["cate_levels"] = training.cate_levels;
    layout["sensitive_name"] = training.sensitive_name;
    layout["group_levels"] = training.group_levels;
    j["layout"] = std::move(layout);
    return j;
}

ModelFile model_file_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("params") || !j.contains("layout"))
        throw Error(ErrorCode::Schema, "not a model file: expected 'params' and 'layout'");
    ModelFile f;
    f.params = model_params_from_json(j["params"]);
    if (j.contains("preprocess")) f.preprocess = preprocess_from_json(j["preprocess"]);
    const Json& l = j["layout"];
    f.layout.header = get_as<std::vector<std::string>>(l, "header");
    f.layout.cont_names = get_as<std::vector<std::string>>(l, "cont_names");
    f.layout.cate_names = get_as<std::vector<std::string>>(l, "cate_names");
    f.layout.cate_levels = get_as<std::vector<std::vector<std::string>>>(l, "cate_levels");
    f.layout.sensitive_name = get_as<std::string>(l, "sensitive_name");
    f.layout.group_levels = get_as<std::vector<std::string>>(l, "group_levels");
    f.layout.num_groups = f.layout.group_levels.size();
    for (const auto& lv : f.layout.cate_levels) f.layout.cardinalities.push_back(lv.size());
    return f;
}

} // namespace fmc
