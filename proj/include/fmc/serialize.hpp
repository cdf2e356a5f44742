#pragma once

#include <string>

#include <json.hpp>

#include "fmc/data.hpp"
#include "fmc/eval.hpp"
#include "fmc/metrics.hpp"
#include "fmc/mixture.hpp"
#include "fmc/optim.hpp"

namespace fmc {

using Json = nlohmann::ordered_json;

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

Json to_json(const ModelParams& p);
ModelParams model_params_from_json(const Json& j);

Json to_json(const PreprocessStats& s);
PreprocessStats preprocess_from_json(const Json& j);

Json to_json(const Metrics& m);
Json to_json(const FitConfig& c);
Json to_json(const FitReport& r);
Json to_json(const SweepResult& s);

// Applies one FitConfig key from a config document. Returns false when the
// key is not a FitConfig field; throws E_CONFIG on a bad value.
bool apply_config_key(FitConfig& c, const std::string& key, const Json& value);
// Every key must be a FitConfig field.
FitConfig fit_config_from_json(const Json& j, FitConfig base = {});

// Flat one-line-per-run CSV.
std::string report_csv_header();
std::string report_csv_row(const FitReport& r);

// lambda,seed,cost,nll,delta_soft,gap_hard,balance,iters,seconds,status,pareto
std::string sweep_csv(const SweepResult& s);
// Per-lambda mean and std of every metric, ready for plotting.
std::string sweep_plot_csv(const SweepResult& s);

// Keys: weights, centers, scales, group_probs (or binary "bias"),
// cardinalities, cat_tables, n, seed.
SyntheticSpec synthetic_spec_from_json(const Json& j);

// A fitted model plus what assigning new rows needs: preprocessing
// statistics and the training column layout and level dictionaries.
struct ModelFile {
    ModelParams params;
    PreprocessStats preprocess;
    // Metadata-only data set (no rows) usable as a load_csv_like reference.
    Dataset layout;
};

Json to_json(const ModelParams& params, const Dataset& training);
ModelFile model_file_from_json(const Json& j);

} // namespace fmc
