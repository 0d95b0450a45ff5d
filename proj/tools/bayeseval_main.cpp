#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bayeseval/errors.hpp"
#include "bayeseval/evaluate.hpp"
#include "bayeseval/experiments.hpp"
#include "bayeseval/factory.hpp"
#include "bayeseval/rlct.hpp"
#include "bayeseval/rng.hpp"
#include "bayeseval/sampler.hpp"

namespace {

using bayeseval::ConfigError;
using bayeseval::DomainError;

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("bad_config", "cannot open config file", {{"path", path}});
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("bad_config", std::string("config parse error: ") + e.what(),
                          {{"path", path}});
    }
}

nlohmann::json parse_inline_json(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("bad_config", std::string(what) + " is not valid JSON",
                          {{"detail", e.what()}});
    }
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("bad_output", "cannot open output file", {{"path", path}});
    f << body;
}

void emit(const std::string& body, const std::string& out_path) {
    if (out_path.empty()) std::cout << body;
    else write_text(out_path, body);
}

std::string format_17g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// flat report -> two-column table
std::string report_csv(const nlohmann::json& report) {
    std::string out = "key,value\n";
    for (const auto& [key, value] : report.items()) out += key + "," + value.dump() + "\n";
    return out;
}

std::string report_md(const nlohmann::json& report) {
    std::string out = "| key | value |\n|---|---|\n";
    for (const auto& [key, value] : report.items())
        out += "| " + key + " | " + value.dump() + " |\n";
    return out;
}

struct EvalArgs {
    std::string config_path, model, data, out_path, format = "json";
    std::uint64_t seed = 0;
    std::size_t n1 = 0;
    bool ti = false, mcmc = false;
    bool seed_set = false, n1_set = false;
};

int run_eval(const EvalArgs& a) {
    nlohmann::json cfg = nlohmann::json::object();
    if (!a.config_path.empty()) cfg = read_json_file(a.config_path);
    if (!a.model.empty()) {
        std::string kind = a.model;
        std::replace(kind.begin(), kind.end(), '-', '_');
        cfg["model"] = {{"model", kind}};
    }
    if (!a.data.empty()) cfg["data"] = parse_inline_json(a.data, "data");
    if (a.seed_set) cfg["seed"] = a.seed;
    if (a.n1_set) cfg["n1"] = a.n1;
    if (a.ti) cfg["ti"] = true;
    if (a.mcmc) cfg["exact"] = false;

    const bayeseval::EvalOutcome outcome = bayeseval::evaluate_config(cfg);
    nlohmann::json report = outcome.report.to_json();
    if (!outcome.diagnostics.empty()) report["diagnostics"] = outcome.diagnostics;

    if (a.format == "json") emit(report.dump(2) + "\n", a.out_path);
    else if (a.format == "csv") emit(report_csv(report), a.out_path);
    else emit(report_md(report), a.out_path);
    return 0;
}

struct ExperimentsArgs {
    std::string name, config_path, out_dir, format = "md";
    std::size_t trials = 0, n = 0;
    std::uint64_t seed = 0;
    int threads = 0;
    bool full = false;
    bool trials_set = false, n_set = false, seed_set = false, threads_set = false;
    bool quiet = false;
};

int run_experiments(const ExperimentsArgs& a) {
    bayeseval::ExperimentConfig cfg;
    if (!a.config_path.empty()) {
        cfg = bayeseval::ExperimentConfig::from_json(read_json_file(a.config_path));
        if (cfg.name != a.name)
            throw ConfigError("bad_config", "config file is for a different experiment",
                              {{"requested", a.name}, {"config", cfg.name}});
    } else {
        cfg = bayeseval::ExperimentConfig::defaults(a.name);
    }
    if (a.full && !a.trials_set) {
        // paper-scale trial counts; the defaults are desk scale
        if (cfg.name == "example1" || cfg.name == "example2") cfg.trials = 200;
    }
    if (a.trials_set) cfg.trials = a.trials;
    if (a.n_set) {
        cfg.n = a.n;
        cfg.n1 = a.n / 2;
        cfg.n2 = a.n - a.n / 2;
    }
    if (a.seed_set) cfg.seed = a.seed;
    if (a.threads_set) cfg.threads = a.threads;
    cfg.validate();

    const auto t0 = std::chrono::steady_clock::now();
    const bayeseval::ExperimentResult result = bayeseval::run_experiment(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string out_dir = a.out_dir.empty() ? "out/" + cfg.name : a.out_dir;
    bayeseval::write_outputs(result, out_dir);

    if (a.format == "json") std::cout << result.summary.to_json().dump(2) << "\n";
    else if (a.format == "csv") std::cout << result.summary.to_csv();
    else std::cout << result.summary.to_markdown();

    if (!a.quiet)
        std::fprintf(stderr, "%s: %zu trials (%zu excluded) in %.1f s -> %s\n", cfg.name.c_str(),
                     result.summary.trials_used + result.summary.excluded, result.summary.excluded,
                     secs, out_dir.c_str());
    return 0;
}

struct RlctArgs {
    std::string model, loss = "quadratic", out_path;
    int d = 2, M = 8, N = 8, H = 2, r = 2, dim = 2;
    std::size_t samples = 1000000;
    std::uint64_t seed = 0;
};

int run_rlct(const RlctArgs& a) {
    nlohmann::json out;
    if (a.model == "regular") {
        out = bayeseval::rlct_regular(a.d).to_json();
    } else if (a.model == "reduced-rank") {
        out = bayeseval::rlct_reduced_rank(a.M, a.N, a.H, a.r).to_json();
    } else if (a.model == "volume") {
        std::function<double(std::span<const double>)> loss;
        int dim = a.dim;
        if (a.loss == "quadratic") {
            loss = [](std::span<const double> th) {
                double s = 0.0;
                for (double t : th) s += t * t;
                return s;
            };
        } else if (a.loss == "prod-sq") {
            dim = 2;
            loss = [](std::span<const double> th) { return th[0] * th[0] * th[1] * th[1]; };
        } else {
            throw ConfigError("bad_config", "unknown calibration loss", {{"loss", a.loss}});
        }
        auto prior = [](std::span<double> th, bayeseval::Rng& rng) {
            for (double& t : th) t = 2.0 * rng.uniform() - 1.0;
        };
        std::vector<double> eps;
        for (int k = 0; k < 8; ++k) eps.push_back(1e-2 * std::pow(1e-2, k / 7.0));
        const auto est = bayeseval::rlct_volume_estimate(loss, dim, prior, eps, a.samples, a.seed);
        out = est.spec.to_json();
        out["eps"] = est.eps;
        out["prob"] = est.prob;
    } else {
        throw ConfigError("bad_config", "unknown rlct model", {{"model", a.model}});
    }
    emit(out.dump(2) + "\n", a.out_path);
    return 0;
}

struct SampleArgs {
    std::string config_path, out_path = "draws.csv";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int run_sample(const SampleArgs& a) {
    const nlohmann::json cfg = read_json_file(a.config_path);
    for (const auto& [key, _] : cfg.items()) {
        static const std::vector<std::string> allowed = {"model", "data", "truth", "n",
                                                         "sampler", "seed", "beta"};
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("unknown_key", "unknown sample config key", {{"key", key}});
    }
    if (!cfg.contains("model"))
        throw ConfigError("bad_config", "missing required config key", {{"key", "model"}});
    const auto model = bayeseval::make_model(cfg.at("model"));

    bayeseval::Dataset data = [&] {
        if (cfg.contains("data")) {
            const auto& d = cfg.at("data");
            if (d.is_object()) return bayeseval::Dataset::from_json(d);
            if (d.is_array() && !d.empty() && d.front().is_array()) {
                std::vector<std::vector<double>> rows;
                for (const auto& row : d) rows.push_back(row.get<std::vector<double>>());
                return bayeseval::Dataset::from_rows(model->obs_shape(), rows);
            }
            const auto scalars = d.get<std::vector<double>>();
            return bayeseval::Dataset::from_scalars(scalars);
        }
        if (!cfg.contains("truth") || !cfg.contains("n"))
            throw ConfigError("bad_config", "sample needs data or a truth with n");
        const auto truth = bayeseval::make_truth(cfg.at("truth"));
        bayeseval::Rng rng(bayeseval::derive_seed(cfg.value("seed", std::uint64_t{0}), {0xda}));
        return truth->sample(cfg.at("n").get<std::size_t>(), rng);
    }();

    bayeseval::SamplerConfig scfg;
    if (cfg.contains("sampler")) scfg = bayeseval::sampler_config_from_json(cfg.at("sampler"), scfg);
    scfg.beta = cfg.value("beta", 1.0);
    scfg.seed = a.seed_set ? a.seed : cfg.value("seed", std::uint64_t{0});
    scfg.threads = 1;

    const bayeseval::PosteriorDraws draws = bayeseval::sample_tempered(*model, data.view(), scfg);

    std::string csv;
    for (int k = 0; k < model->dim(); ++k) csv += (k ? ",theta_" : "theta_") + std::to_string(k);
    csv += "\n";
    for (Eigen::Index s = 0; s < draws.theta.rows(); ++s) {
        for (Eigen::Index k = 0; k < draws.theta.cols(); ++k) {
            if (k) csv += ",";
            csv += format_17g(draws.theta(s, k));
        }
        csv += "\n";
    }
    write_text(a.out_path, csv);

    nlohmann::json diag{{"beta", draws.beta},
                        {"chains", draws.chains},
                        {"draws_per_chain", draws.draws_per_chain},
                        {"acceptance", draws.diagnostics.acceptance},
                        {"warnings", draws.diagnostics.warnings}};
    diag["rhat"] = std::vector<double>(draws.diagnostics.rhat.data(),
                                       draws.diagnostics.rhat.data() + draws.diagnostics.rhat.size());
    diag["ess"] = std::vector<double>(draws.diagnostics.ess.data(),
                                      draws.diagnostics.ess.data() + draws.diagnostics.ess.size());
    write_text(a.out_path + ".diag.json", diag.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian model evaluation: cross validation, information criteria, free energy"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress runtime notes on stderr");

    EvalArgs ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a model on a dataset");
    eval_cmd->add_option("--config", ev.config_path, "JSON config file");
    eval_cmd->add_option("--model", ev.model, "model kind shortcut (e.g. bernoulli-beta)");
    eval_cmd->add_option("--data", ev.data, "inline JSON data array");
    auto* ev_seed = eval_cmd->add_option("--seed", ev.seed, "master seed");
    auto* ev_n1 = eval_cmd->add_option("--n1", ev.n1, "split size for hold-out / adjusted CV");
    eval_cmd->add_flag("--ti", ev.ti, "add thermodynamic-integration free energy");
    eval_cmd->add_flag("--mcmc", ev.mcmc, "force the sampler even for conjugate models");
    eval_cmd->add_option("--out", ev.out_path, "write the report here instead of stdout");
    eval_cmd->add_option("--format", ev.format, "json|csv|md")
        ->check(CLI::IsMember({"json", "csv", "md"}));

    ExperimentsArgs ex;
    CLI::App* exp_cmd = app.add_subcommand("experiments", "run a predefined study");
    CLI::App* exp_run = exp_cmd->add_subcommand("run", "run one experiment");
    exp_run->add_option("name", ex.name, "example1|example2|example3|variance")->required();
    exp_run->add_option("--config", ex.config_path, "JSON config file");
    auto* ex_trials = exp_run->add_option("--trials", ex.trials, "number of trials");
    auto* ex_n = exp_run->add_option("--n", ex.n, "sample size (splits reset to n/2)");
    auto* ex_seed = exp_run->add_option("--seed", ex.seed, "master seed");
    auto* ex_threads = exp_run->add_option("--threads", ex.threads, "trial-level threads");
    exp_run->add_flag("--full", ex.full, "paper-scale trial count");
    exp_run->add_option("--out", ex.out_dir, "output directory (default out/<name>)");
    exp_run->add_option("--format", ex.format, "summary format on stdout: json|csv|md")
        ->check(CLI::IsMember({"json", "csv", "md"}));

    RlctArgs rl;
    CLI::App* rlct_cmd = app.add_subcommand("rlct", "learning coefficients");
    rlct_cmd->add_option("--model", rl.model, "regular|reduced-rank|volume")->required();
    rlct_cmd->add_option("--d", rl.d, "dimension (regular)");
    rlct_cmd->add_option("--M", rl.M, "output rows (reduced-rank)");
    rlct_cmd->add_option("--N", rl.N, "input columns (reduced-rank)");
    rlct_cmd->add_option("--H", rl.H, "hidden rank (reduced-rank)");
    rlct_cmd->add_option("--r", rl.r, "truth rank (reduced-rank)");
    rlct_cmd->add_option("--loss", rl.loss, "volume calibration loss: quadratic|prod-sq");
    rlct_cmd->add_option("--dim", rl.dim, "dimension of the quadratic loss");
    rlct_cmd->add_option("--samples", rl.samples, "prior samples for the volume estimate");
    rlct_cmd->add_option("--seed", rl.seed, "seed for the volume estimate");
    rlct_cmd->add_option("--out", rl.out_path, "write JSON here instead of stdout");

    SampleArgs sa;
    CLI::App* sample_cmd = app.add_subcommand("sample", "dump posterior draws");
    sample_cmd->add_option("--config", sa.config_path, "JSON config file")->required();
    sample_cmd->add_option("--out", sa.out_path, "draws CSV path (diagnostics in <out>.diag.json)");
    auto* sa_seed = sample_cmd->add_option("--seed", sa.seed, "master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        nlohmann::json err{{"code", "bad_config"}, {"message", e.what()},
                           {"context", nlohmann::json::object()}};
        std::cerr << err.dump() << "\n";
        return 2;
    }

    ev.seed_set = ev_seed->count() > 0;
    ev.n1_set = ev_n1->count() > 0;
    ex.trials_set = ex_trials->count() > 0;
    ex.n_set = ex_n->count() > 0;
    ex.seed_set = ex_seed->count() > 0;
    ex.threads_set = ex_threads->count() > 0;
    ex.quiet = quiet;
    sa.seed_set = sa_seed->count() > 0;

    try {
        if (eval_cmd->parsed()) return run_eval(ev);
        if (exp_cmd->parsed()) {
            if (!exp_run->parsed())
                throw ConfigError("bad_config", "experiments needs the run subcommand");
            return run_experiments(ex);
        }
        if (rlct_cmd->parsed()) return run_rlct(rl);
        if (sample_cmd->parsed()) return run_sample(sa);
        throw ConfigError("bad_config", "no subcommand given");
    } catch (const ConfigError& e) {
        std::cerr << e.to_json().dump() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << e.to_json().dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err{{"code", "internal_error"}, {"message", e.what()},
                           {"context", nlohmann::json::object()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
