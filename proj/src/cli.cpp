#include "fmc/cli.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fmc/error.hpp"
#include "fmc/eval.hpp"
#include "fmc/log.hpp"
#include "fmc/serialize.hpp"

namespace fmc {

namespace {

struct Flags {
    std::string config;
    std::string data;
    std::string schema;
    std::string out = "fmc";
    std::string model;
    std::string spec;
    std::string algo;
    std::string structure;
    std::string penalty_form;
    std::string cost;
    std::size_t k = 0;
    std::size_t t = 0;
    std::size_t r = 0;
    double lambda = 0.0;
    double gamma = 0.0;
    double batch_frac = 0.0;
    double subsample_frac = 0.0;
    std::uint64_t seed = 0;
    bool standardize = false;
    bool l2norm = false;
    std::string lambdas;
    std::string seeds;
    std::size_t jobs = 1;
    bool plot_data = false;
};

// Fully resolved run: config file values overridden by explicit flags.
struct RunConfig {
    FitConfig fit;
    std::string data;
    std::string schema;
    bool standardize = false;
    bool l2norm = false;
    std::string out = "fmc";
    std::vector<double> lambdas;
    std::vector<std::uint64_t> seeds;
    std::size_t jobs = 1;
    bool plot_data = false;
};

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            std::size_t used = 0;
            if constexpr (std::is_same_v<T, double>) out.push_back(std::stod(item, &used));
            else out.push_back(std::stoull(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorCode::Config, std::string("bad entry '") + item + "' in " + what);
        }
    }
    return out;
}

class CommandLine {
public:
    CommandLine() : app_("Fair model-based clustering", "fmc") {
        app_.require_subcommand(1);
        auto* synth = app_.add_subcommand("synth", "Sample a synthetic mixture data set");
        synth->add_option("--spec", flags_.spec, "Synthetic spec JSON")->required();
        synth->add_option("--out", flags_.out, "Output prefix");

        for (const char* name : {"fit", "sweep"}) {
            auto* sub = app_.add_subcommand(name, std::string(name) == "fit" ? "Fit one model"
                                                                             : "Fit a lambda x seed grid");
            add_run_options(sub);
        }
        auto* sweep = app_.get_subcommand("sweep");
        sweep->add_option("--lambdas", flags_.lambdas, "Comma-separated lambda grid");
        sweep->add_option("--seeds", flags_.seeds, "Comma-separated seeds");
        given_["sweep--jobs"] = sweep->add_option("--jobs", flags_.jobs, "Parallel fits")->check(CLI::PositiveNumber);
        sweep->add_flag("--plot-data", flags_.plot_data, "Also write per-lambda mean/std series");

        for (const char* name : {"assign", "eval"}) {
            auto* sub = app_.add_subcommand(name, std::string(name) == "assign"
                                                      ? "Assign rows with a fitted model"
                                                      : "Evaluate a fitted model on labeled rows");
            sub->add_option("--model", flags_.model, "Model JSON written by fit")->required();
            sub->add_option("--data", flags_.data, "CSV file")->required();
            sub->add_option("--out", flags_.out, "Output prefix");
        }
        app_.get_subcommand("eval")->add_option("--cost", flags_.cost, "dist or sqdist");
    }

    CLI::App& app() { return app_; }
    const Flags& flags() const { return flags_; }
    bool given(const std::string& name) const { return given_.count(name) && given_.at(name)->count() > 0; }

private:
    void add_run_options(CLI::App* sub) {
        auto track = [&](const std::string& name, CLI::Option* opt) {
            given_[sub->get_name() + name] = opt;
        };
        track("--config", sub->add_option("--config", flags_.config, "Run config JSON"));
        track("--data", sub->add_option("--data", flags_.data, "CSV file"));
        track("--schema", sub->add_option("--schema", flags_.schema, "name:role,... (cont, cat, sensitive, ignore)"));
        track("--algo", sub->add_option("--algo", flags_.algo, "gd, em or em-minibatch"));
        track("--k", sub->add_option("--k", flags_.k, "Number of components"));
        track("--lambda", sub->add_option("--lambda", flags_.lambda, "Fairness penalty weight"));
        track("--gamma", sub->add_option("--gamma", flags_.gamma, "Learning rate"));
        track("--t", sub->add_option("--t", flags_.t, "Outer iteration cap"));
        track("--r", sub->add_option("--r", flags_.r, "Inner gradient steps per M-step"));
        track("--batch-frac", sub->add_option("--batch-frac", flags_.batch_frac, "Mini-batch fraction"));
        track("--subsample-frac",
              sub->add_option("--subsample-frac", flags_.subsample_frac, "Delta subsample fraction"));
        track("--structure", sub->add_option("--structure", flags_.structure, "iso, diag, multinoulli or mixed"));
        track("--penalty-form", sub->add_option("--penalty-form", flags_.penalty_form, "abs or squared"));
        track("--cost", sub->add_option("--cost", flags_.cost, "dist or sqdist"));
        track("--standardize", sub->add_flag("--standardize", flags_.standardize, "Standardize continuous columns"));
        track("--l2norm", sub->add_flag("--l2norm", flags_.l2norm, "L2-normalize continuous rows"));
        track("--seed", sub->add_option("--seed", flags_.seed, "Random seed"));
        track("--out", sub->add_option("--out", flags_.out, "Output prefix"));
    }

    CLI::App app_;
    Flags flags_;
    std::map<std::string, CLI::Option*> given_;
};

RunConfig resolve(const CommandLine& cl, const std::string& cmd) {
    const Flags& f = cl.flags();
    auto given = [&](const char* name) { return cl.given(cmd + name); };
    Json file = Json::object();
    if (given("--config")) {
        file = read_json_file(f.config);
        if (!file.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
    }

    RunConfig rc;
    Algorithm algo = Algorithm::EM;
    try {
        if (given("--algo")) algo = algorithm_from_string(f.algo);
        else if (file.contains("algorithm")) algo = algorithm_from_string(file["algorithm"].get<std::string>());
        rc.fit = FitConfig::defaults(algo);
        for (const auto& [key, value] : file.items()) {
            if (key == "data") rc.data = value.get<std::string>();
            else if (key == "schema") rc.schema = value.get<std::string>();
            else if (key == "standardize") rc.standardize = value.get<bool>();
            else if (key == "l2_normalize") rc.l2norm = value.get<bool>();
            else if (key == "out") rc.out = value.get<std::string>();
            else if (key == "lambdas") rc.lambdas = value.get<std::vector<double>>();
            else if (key == "seeds") rc.seeds = value.get<std::vector<std::uint64_t>>();
            else if (key == "jobs") rc.jobs = value.get<std::size_t>();
            else if (key == "plot_data") rc.plot_data = value.get<bool>();
            else if (!apply_config_key(rc.fit, key, value))
                throw Error(ErrorCode::Config, "unknown config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Config, std::string("bad config value: ") + e.what());
    }
    rc.fit.algorithm = algo;

    if (given("--data")) rc.data = f.data;
    if (given("--schema")) rc.schema = f.schema;
    if (given("--k")) rc.fit.K = f.k;
    if (given("--lambda")) rc.fit.lambda = f.lambda;
    if (given("--gamma")) rc.fit.gamma = f.gamma;
    if (given("--t")) rc.fit.T = f.t;
    if (given("--r")) rc.fit.R = f.r;
    if (given("--batch-frac")) rc.fit.batch_fraction = f.batch_frac;
    if (given("--subsample-frac")) rc.fit.subsample_fraction = f.subsample_frac;
    if (given("--structure")) rc.fit.structure = structure_from_string(f.structure);
    if (given("--penalty-form")) rc.fit.penalty_form = penalty_form_from_string(f.penalty_form);
    if (given("--cost")) rc.fit.cost = cost_kind_from_string(f.cost);
    if (given("--seed")) rc.fit.seed = f.seed;
    if (given("--standardize")) rc.standardize = true;
    if (given("--l2norm")) rc.l2norm = true;
    if (given("--out")) rc.out = f.out;
    if (cmd == "sweep") {
        if (!f.lambdas.empty()) rc.lambdas = parse_list<double>(f.lambdas, "--lambdas");
        if (!f.seeds.empty()) rc.seeds = parse_list<std::uint64_t>(f.seeds, "--seeds");
        if (cl.given(cmd + "--jobs")) rc.jobs = f.jobs;
        if (f.plot_data) rc.plot_data = true;
    }

    if (rc.data.empty()) throw Error(ErrorCode::Config, "no data file given (--data)");
    if (rc.schema.empty()) throw Error(ErrorCode::Config, "no column schema given (--schema)");
    rc.fit.validate();
    return rc;
}

Dataset load_training(const RunConfig& rc) {
    Dataset ds = load_csv(rc.data, CsvSchema::parse(rc.schema));
    if (rc.standardize) ds = standardize(ds);
    if (rc.l2norm) ds = l2_normalize(ds);
    return ds;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

int cmd_synth(const Flags& f) {
    SyntheticSpec spec = synthetic_spec_from_json(read_json_file(f.spec));
    Dataset ds = make_synthetic_mixture(spec);
    const std::string data_path = f.out + ".csv";
    const std::string label_path = f.out + ".labels.csv";
    write_csv(data_path, ds);
    std::string labels = "label\n";
    for (int z : *ds.truth) labels += std::to_string(z) + "\n";
    write_text_file(label_path, labels);
    std::cout << data_path << "\n" << label_path << "\n";
    return 0;
}

int cmd_fit(const RunConfig& rc) {
    Dataset ds = load_training(rc);
    FitReport rep = fit(ds, rc.fit);
    Json report = to_json(rep);
    report["data"] = rc.data;
    report["schema"] = rc.schema;
    const std::string report_path = rc.out + ".report.json";
    const std::string model_path = rc.out + ".model.json";
    const std::string row_path = rc.out + ".report.csv";
    write_text_file(report_path, dump(report));
    write_text_file(model_path, dump(to_json(rep.params, ds)));
    write_text_file(row_path, report_csv_header() + report_csv_row(rep));
    std::cout << report_path << "\n" << model_path << "\n" << row_path << "\n";
    if (rep.diverged) {
        std::cerr << "E_NONFINITE: " << rep.message << "\n";
        return 1;
    }
    if (!rep.converged) {
        std::cerr << "E_NOT_CONVERGED: " << rep.message << "\n";
        return 2;
    }
    return 0;
}

int cmd_sweep(RunConfig rc) {
    if (rc.lambdas.empty()) throw Error(ErrorCode::Config, "lambda grid is empty (--lambdas)");
    if (rc.seeds.empty()) rc.seeds = {rc.fit.seed};
    Dataset ds = load_training(rc);
    SweepResult res = sweep(ds, rc.fit, rc.lambdas, rc.seeds, rc.jobs);
    const std::string csv_path = rc.out + ".sweep.csv";
    const std::string json_path = rc.out + ".sweep.json";
    write_text_file(csv_path, sweep_csv(res));
    Json j = to_json(res);
    j["data"] = rc.data;
    j["schema"] = rc.schema;
    write_text_file(json_path, dump(j));
    std::cout << csv_path << "\n" << json_path << "\n";
    if (rc.plot_data) {
        const std::string plot_path = rc.out + ".plot.csv";
        write_text_file(plot_path, sweep_plot_csv(res));
        std::cout << plot_path << "\n";
    }
    return 0;
}

int cmd_assign(const Flags& f) {
    ModelFile mf = model_file_from_json(read_json_file(f.model));
    Dataset ds = apply_preprocess(load_csv_like(f.data, mf.layout, false), mf.preprocess);
    Assignment a = post_assign(mf.params, ds);
    std::ostringstream out;
    out.precision(17);
    out << "label";
    for (std::size_t k = 0; k < mf.params.K(); ++k) out << ",p" << k;
    out << "\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << a.labels[i];
        for (double p : a.resp.psi.row(i)) out << "," << p;
        out << "\n";
    }
    const std::string path = f.out + ".assign.csv";
    write_text_file(path, out.str());
    std::cout << path << "\n";
    return 0;
}

int cmd_eval(const Flags& f) {
    ModelFile mf = model_file_from_json(read_json_file(f.model));
    Dataset ds = apply_preprocess(load_csv_like(f.data, mf.layout, true), mf.preprocess);
    CostKind kind = f.cost.empty() ? CostKind::Distance : cost_kind_from_string(f.cost);
    Json j = to_json(evaluate(ds, mf.params, kind));
    j["rows"] = ds.size();
    j["cost_kind"] = to_string(kind);
    const std::string path = f.out + ".eval.json";
    write_text_file(path, dump(j));
    std::cout << path << "\n";
    return 0;
}

} // namespace

int run_cli(int argc, char** argv) {
    CommandLine cl;
    try {
        cl.app().parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cl.app().exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return cl.app().exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "E_USAGE: " << e.what() << "\n";
        return 1;
    }
    try {
        auto* sub = cl.app().get_subcommands().front();
        const std::string cmd = sub->get_name();
        if (cmd == "synth") return cmd_synth(cl.flags());
        if (cmd == "assign") return cmd_assign(cl.flags());
        if (cmd == "eval") return cmd_eval(cl.flags());
        RunConfig rc = resolve(cl, cmd);
        return cmd == "fit" ? cmd_fit(rc) : cmd_sweep(rc);
    } catch (const Error& e) {
        std::cerr << code_name(e.code()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "E_INTERNAL: " << e.what() << "\n";
        return 1;
    }
}

} // namespace fmc
