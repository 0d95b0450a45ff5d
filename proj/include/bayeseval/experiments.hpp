#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bayeseval/criteria.hpp"
#include "bayeseval/model.hpp"
#include "bayeseval/sampler.hpp"

namespace bayeseval {

struct ExperimentConfig {
    std::string name;          // example1 | example2 | example3 | variance
    nlohmann::json model;      // factory fragment
    nlohmann::json truth;
    std::size_t n = 0;
    std::size_t n1 = 0;        // split sizes where the experiment uses one
    std::size_t n2 = 0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::size_t test_m = 2000;         // fresh test points for G_n
    std::size_t fisher_m = 200000;     // score samples for the Fisher matrices
    std::vector<double> hyper_grid;    // hyperparameter candidates (example3)
    SamplerConfig sampler;
    int threads = 0;                   // trial-level parallelism

    static ExperimentConfig defaults(const std::string& name);
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

struct TrialRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    EvalReport report;
    nlohmann::json extra = nlohmann::json::object();        // experiment-specific values
    nlohmann::json diagnostics = nlohmann::json::object();  // sampler health
    std::optional<std::string> error;                       // exclusion reason

    nlohmann::json to_json() const;
};

struct SummaryTable {
    std::string experiment;
    std::vector<std::string> columns;
    struct Row {
        std::string name;
        std::vector<std::optional<double>> values;
    };
    std::vector<Row> rows;
    std::size_t trials_used = 0;
    std::size_t excluded = 0;
    nlohmann::json notes = nlohmann::json::object();

    std::string to_csv() const;
    std::string to_markdown() const;
    nlohmann::json to_json() const;
};

// Mean/Std over the surviving trials of the named report fields (flat JSON
// keys). A nonempty rse_reference adds an RSE column with
// RSE_X = sqrt(mean((ref_i - x_i)^2)), left blank on the reference row.
SummaryTable summarize(const std::vector<TrialRecord>& records,
                       const std::vector<std::string>& fields,
                       const std::string& rse_reference = "");

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<TrialRecord> records;
    SummaryTable summary;
    // plot-ready long-format rows (example3): hyper, criterion, mean value
    std::optional<std::string> grid_csv;
};

ExperimentResult run_example1(const ExperimentConfig& cfg);
ExperimentResult run_example2(const ExperimentConfig& cfg);
ExperimentResult run_example3(const ExperimentConfig& cfg);
ExperimentResult run_variance_study(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// writes records.jsonl, summary.{csv,md,json}, config.json, and grid.csv
// when present; everything byte-deterministic for a fixed config
void write_outputs(const ExperimentResult& result, const std::string& out_dir);

struct FisherInfo {
    Eigen::MatrixXd i_mat;   // E_q[ score score^T ] at theta0
    Eigen::MatrixXd j_mat;   // Hessian of the expected loss at theta0
    double tr_ij = 0.0;      // tr(I J^{-1})
    double tr_ij_sq = 0.0;   // tr((I J^{-1})^2)
};
// Monte-Carlo I and finite-difference J on a shared sample of size m.
FisherInfo fisher_matrices(const ModelSpec& model, const TruthOracle& truth,
                           const Eigen::VectorXd& theta0, std::size_t m, std::uint64_t seed);

}  // namespace bayeseval
