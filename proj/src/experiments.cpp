#include "bayeseval/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "bayeseval/errors.hpp"
#include "bayeseval/factory.hpp"
#include "bayeseval/math.hpp"
#include "bayeseval/models/matrix_factorization.hpp"
#include "bayeseval/models/poly_regression.hpp"
#include "bayeseval/parallel.hpp"
#include "bayeseval/rlct.hpp"

namespace bayeseval {

namespace {

constexpr std::uint64_t kTagTrial = 0x74;
constexpr std::uint64_t kTagData = 0xda;
constexpr std::uint64_t kTagFull = 0x51;
constexpr std::uint64_t kTagSplit = 0x52;
constexpr std::uint64_t kTagGen = 0x54;
constexpr std::uint64_t kTagWbic = 0x57;
constexpr std::uint64_t kTagFisher = 0xf1;

double vec_mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double vec_var(const std::vector<double>& v) {
    const double m = vec_mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size() - 1);
}

double vec_std(const std::vector<double>& v) { return std::sqrt(vec_var(v)); }

double vec_corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = vec_mean(a), mb = vec_mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// root mean square of (ge[i] - x[i])
double rse_against(const std::vector<double>& ge, const std::vector<double>& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ge.size(); ++i) acc += (ge[i] - x[i]) * (ge[i] - x[i]);
    return std::sqrt(acc / static_cast<double>(ge.size()));
}

// 17 significant digits: enough for exact double round-trips
std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(const std::string& name) {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.seed = 20250818;
    if (name == "example1" || name == "example2") {
        cfg.model = {{"model", "matrix_factorization"}, {"M", 8}, {"N", 8}, {"H", 2},
                     {"rho", 10.0},                     {"mu", 10.0}};
        cfg.truth = {{"truth", "matrix_factorization"}, {"M", 8}, {"N", 8},
                     {"diag", std::vector<double>{1, 1, 0, 0, 0, 0, 0, 0}}};
        cfg.n = 200;
        cfg.n1 = 100;
        cfg.n2 = 100;
        cfg.trials = 100;
        cfg.test_m = 2000;
        cfg.sampler.chains = 4;
        cfg.sampler.burn_in = 40000;
        cfg.sampler.draws_per_chain = 500;
        cfg.sampler.thinning = 200;
        cfg.sampler.proposal = Proposal::GradientAssisted;
        return cfg;
    }
    if (name == "example3") {
        cfg.model = {{"model", "poly_regression"}, {"K", 3}, {"b", 2.0}, {"c", 0.01}, {"d", 0.01}};
        cfg.truth = {{"truth", "poly_regression"},
                     {"a0", std::vector<double>{1.0, -1.0 / 5.0, 1.0 / 30.0}},
                     {"s0", 25.0}};
        cfg.n = 20;
        cfg.n1 = 10;
        cfg.n2 = 10;
        cfg.trials = 200;
        cfg.test_m = 2000;
        for (int i = 0; i < 20; ++i) cfg.hyper_grid.push_back(-3.0 + 0.5 * i);
        return cfg;
    }
    if (name == "variance") {
        cfg.model = {{"model", "poly_regression"}, {"K", 3}, {"b", 2.0}, {"c", 0.01}, {"d", 0.01}};
        cfg.truth = {{"truth", "poly_regression"},
                     {"a0", std::vector<double>{1.0, -1.0 / 5.0, 1.0 / 30.0}},
                     {"s0", 25.0}};
        cfg.n = 400;
        cfg.n1 = 200;
        cfg.n2 = 200;
        cfg.trials = 500;
        cfg.fisher_m = 200000;
        return cfg;
    }
    throw ConfigError("unknown_experiment", "no such experiment", {{"name", name}});
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> allowed = {"experiment", "model",  "truth",      "n",
                                                  "n1",         "n2",     "trials",     "seed",
                                                  "test_m",     "fisher_m", "hyper_grid", "sampler",
                                                  "threads"};
    if (!j.is_object()) throw ConfigError("bad_config", "experiment config must be an object");
    for (const auto& [key, _] : j.items())
        if (allowed.find(key) == allowed.end())
            throw ConfigError("unknown_key", "unknown experiment config key", {{"key", key}});
    if (!j.contains("experiment"))
        throw ConfigError("bad_config", "missing required config key", {{"key", "experiment"}});
    ExperimentConfig cfg = defaults(j.at("experiment").get<std::string>());
    if (j.contains("model")) cfg.model = j.at("model");
    if (j.contains("truth")) cfg.truth = j.at("truth");
    if (j.contains("n")) cfg.n = j.at("n").get<std::size_t>();
    if (j.contains("n1")) cfg.n1 = j.at("n1").get<std::size_t>();
    if (j.contains("n2")) cfg.n2 = j.at("n2").get<std::size_t>();
    if (j.contains("n") && !j.contains("n1")) cfg.n1 = cfg.n / 2;
    if (j.contains("n") && !j.contains("n2")) cfg.n2 = cfg.n - cfg.n / 2;
    if (j.contains("trials")) cfg.trials = j.at("trials").get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("test_m")) cfg.test_m = j.at("test_m").get<std::size_t>();
    if (j.contains("fisher_m")) cfg.fisher_m = j.at("fisher_m").get<std::size_t>();
    if (j.contains("hyper_grid")) cfg.hyper_grid = j.at("hyper_grid").get<std::vector<double>>();
    if (j.contains("sampler")) cfg.sampler = sampler_config_from_json(j.at("sampler"), cfg.sampler);
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    cfg.validate();
    return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j{{"experiment", name},
                     {"model", model},
                     {"truth", truth},
                     {"n", n},
                     {"trials", trials},
                     {"seed", seed},
                     {"sampler", sampler_config_to_json(sampler)}};
    if (n1 > 0) j["n1"] = n1;
    if (n2 > 0) j["n2"] = n2;
    if (name == "example1" || name == "example3") j["test_m"] = test_m;
    if (name == "variance") j["fisher_m"] = fisher_m;
    if (!hyper_grid.empty()) j["hyper_grid"] = hyper_grid;
    return j;
}

void ExperimentConfig::validate() const {
    if (trials < 2) throw ConfigError("bad_config", "need at least two trials", {{"trials", trials}});
    if (n < 2) throw ConfigError("bad_config", "need at least two observations", {{"n", n}});
    const bool split_used = name == "example1" || name == "example3" || name == "variance";
    if (split_used && n1 + n2 != n)
        throw ConfigError("bad_split", "split sizes must add up to n",
                          {{"n", n}, {"n1", n1}, {"n2", n2}});
    if (name == "example3" && hyper_grid.empty())
        throw ConfigError("bad_config", "example3 needs a hyperparameter grid");
    if (name == "variance" && n % 4 != 0)
        throw ConfigError("bad_config", "variance study needs n divisible by 4", {{"n", n}});
    sampler.validate();
}

nlohmann::json TrialRecord::to_json() const {
    nlohmann::json j{{"trial", index}, {"seed", seed}};
    if (error.has_value()) {
        j["error"] = *error;
        return j;
    }
    j["report"] = report.to_json();
    if (!extra.empty()) j["extra"] = extra;
    if (!diagnostics.empty()) j["diagnostics"] = diagnostics;
    return j;
}

std::string SummaryTable::to_csv() const {
    std::ostringstream out;
    out << "quantity";
    for (const auto& c : columns) out << "," << c;
    out << "\n";
    for (const auto& row : rows) {
        out << row.name;
        for (const auto& v : row.values) {
            out << ",";
            if (v.has_value()) out << format_value(*v);
        }
        out << "\n";
    }
    return out.str();
}

std::string SummaryTable::to_markdown() const {
    std::ostringstream out;
    out << "| quantity |";
    for (const auto& c : columns) out << " " << c << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
    out << "\n";
    for (const auto& row : rows) {
        out << "| " << row.name << " |";
        for (const auto& v : row.values) {
            if (v.has_value()) out << " " << format_value(*v) << " |";
            else out << " |";
        }
        out << "\n";
    }
    return out.str();
}

nlohmann::json SummaryTable::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json r{{"quantity", row.name}};
        for (std::size_t i = 0; i < columns.size() && i < row.values.size(); ++i)
            if (row.values[i].has_value()) r[columns[i]] = *row.values[i];
        rows_json.push_back(std::move(r));
    }
    return {{"experiment", experiment},
            {"trials_used", trials_used},
            {"excluded", excluded},
            {"rows", rows_json},
            {"notes", notes}};
}

SummaryTable summarize(const std::vector<TrialRecord>& records,
                       const std::vector<std::string>& fields,
                       const std::string& rse_reference) {
    std::vector<nlohmann::json> flat;
    flat.reserve(records.size());
    for (const auto& r : records)
        if (!r.error.has_value()) flat.push_back(r.report.to_json());
    if (flat.size() < 2)
        throw ConfigError("bad_config", "summary needs at least two surviving records",
                          {{"surviving", flat.size()}});

    SummaryTable out;
    out.trials_used = flat.size();
    out.excluded = records.size() - flat.size();
    const bool with_rse = !rse_reference.empty();
    out.columns = with_rse ? std::vector<std::string>{"Mean", "Std", "RSE"}
                           : std::vector<std::string>{"Mean", "Std"};
    for (const auto& field : fields) {
        std::vector<double> values, ref;
        for (const auto& j : flat) {
            if (!j.contains(field)) continue;
            if (with_rse) {
                if (!j.contains(rse_reference)) continue;
                ref.push_back(j.at(rse_reference).get<double>());
            }
            values.push_back(j.at(field).get<double>());
        }
        SummaryTable::Row row;
        row.name = field;
        row.values = {vec_mean(values), vec_std(values)};
        if (with_rse)
            row.values.push_back(field == rse_reference ? std::optional<double>()
                                                        : std::optional<double>(rse_against(ref, values)));
        out.rows.push_back(std::move(row));
    }
    return out;
}

namespace {

// Shared trial-loop plumbing: run `worker` for each trial into slots,
// convert domain failures into per-trial exclusions, fail the run when more
// than 5% of trials are excluded.
std::vector<TrialRecord> run_trials(const ExperimentConfig& cfg,
                                    const std::function<void(std::size_t, std::uint64_t, TrialRecord&)>& worker) {
    std::vector<TrialRecord> records(cfg.trials);
    parallel_for(cfg.trials, resolve_threads(static_cast<unsigned>(cfg.threads)), [&](std::size_t t) {
        TrialRecord& rec = records[t];
        rec.index = t;
        rec.seed = derive_seed(cfg.seed, {kTagTrial, t});
        try {
            worker(t, rec.seed, rec);
        } catch (const ConfigError&) {
            throw;  // configuration problems are global, not per-trial noise
        } catch (const DomainError& e) {
            rec.error = std::string(e.code()) + ": " + e.what();
        }
    });
    std::size_t excluded = 0;
    for (const auto& r : records) excluded += r.error.has_value() ? 1 : 0;
    if (excluded * 20 > cfg.trials) {
        nlohmann::json ctx{{"excluded", excluded}, {"trials", cfg.trials}};
        for (const auto& r : records)
            if (r.error.has_value()) {
                ctx["first_error"] = *r.error;
                break;
            }
        throw DomainError("too_many_exclusions", "more than 5% of trials failed", ctx);
    }
    return records;
}

std::size_t count_excluded(const std::vector<TrialRecord>& records) {
    std::size_t k = 0;
    for (const auto& r : records) k += r.error.has_value() ? 1 : 0;
    return k;
}

// pull one named value out of every surviving trial
std::vector<double> collect(const std::vector<TrialRecord>& records,
                            const std::function<std::optional<double>(const TrialRecord&)>& get) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.error.has_value()) continue;
        const auto v = get(r);
        if (v.has_value()) out.push_back(*v);
    }
    return out;
}

nlohmann::json diag_json(const PosteriorDraws& draws) {
    double max_rhat = 0.0;
    for (Eigen::Index k = 0; k < draws.diagnostics.rhat.size(); ++k)
        max_rhat = std::max(max_rhat, draws.diagnostics.rhat[k]);
    double min_ess = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < draws.diagnostics.ess.size(); ++k)
        min_ess = std::min(min_ess, draws.diagnostics.ess[k]);
    return {{"max_rhat", max_rhat},
            {"min_ess", min_ess},
            {"acceptance", draws.diagnostics.acceptance}};
}

}  // namespace

ExperimentResult run_example1(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto model_base = make_model(cfg.model);
    const auto* model = dynamic_cast<const MatrixFactorizationModel*>(model_base.get());
    if (model == nullptr)
        throw ConfigError("bad_config", "example1 needs the matrix-factorization model");
    const auto truth_base = make_truth(cfg.truth);
    const auto* truth = dynamic_cast<const MatrixFactorizationTruth*>(truth_base.get());
    if (truth == nullptr)
        throw ConfigError("bad_config", "example1 needs the matrix-factorization truth");

    const RLCTSpec rlct = rlct_reduced_rank(model->rows(), model->cols(), model->rank(), truth->rank());
    const int d_eff = model->effective_dim();

    auto records = run_trials(cfg, [&](std::size_t, std::uint64_t trial_seed, TrialRecord& rec) {
        Rng data_rng(derive_seed(trial_seed, {kTagData}));
        const Dataset data = truth->sample(cfg.n, data_rng);
        const auto [first, second] = data.split(cfg.n1);

        SamplerConfig full_cfg = cfg.sampler;
        full_cfg.seed = derive_seed(trial_seed, {kTagFull});
        full_cfg.threads = 1;
        const PosteriorDraws draws = sample_tempered(*model, data.view(), full_cfg);

        SamplerConfig half_cfg = cfg.sampler;
        half_cfg.seed = derive_seed(trial_seed, {kTagSplit});
        half_cfg.threads = 1;
        const PosteriorDraws draws1 = sample_tempered(*model, first, half_cfg);

        EvalReport& r = rec.report;
        r.n = cfg.n;
        r.n1 = cfg.n1;
        r.n2 = cfg.n2;

        const WaicResult w = waic(draws);
        r.t_n = w.t_n;
        r.w_n = w.value;
        const LooIsResult loo = loo_is(draws);
        r.c_n = loo.value;
        r.dic = dic(*model, draws, data.view());

        const LooIsResult loo1 = loo_is(draws1);
        r.h_n2 = holdout(*model, draws1, second);
        r.a_n = acv(loo1.value, *r.h_n2, cfg.n1, cfg.n2);

        const GenLossResult g =
            gen_loss(*model, draws, *truth, GenLossDesign::Random, cfg.test_m, derive_seed(trial_seed, {kTagGen}));
        r.g_n = g.value;

        const MfMle mle = mf_mle(*model, data.view());
        const PluginCriteria plug = plugin_criteria(mle.loss, d_eff, rlct, cfg.n);
        r.aic = plug.aic;
        r.bic = plug.bic;
        r.afe = plug.afe;

        r.s_n = empirical_entropy(*truth, data.view());
        r.s = truth->entropy();
        r.s_n2 = empirical_entropy(*truth, second);
        fill_error_forms(r);

        const auto theta0 = truth->realizing_params(*model);
        const double l0n = empirical_log_loss(*model, data.view(),
                                              {theta0->data(), static_cast<std::size_t>(theta0->size())});
        rec.extra = {{"L_0n", l0n},
                     {"L0n_equals_Sn", l0n == *r.s_n},
                     {"mle_loss", mle.loss},
                     {"gen_mc_se", g.mc_se},
                     {"loo_max_weight_share", loo.max_weight_share}};
        rec.diagnostics = {{"full", diag_json(draws)}, {"split", diag_json(draws1)}};
    });

    ExperimentResult out;
    out.config = cfg;
    out.summary = summarize(records, {"GE.E.", "LOO.E.", "WAIC.E.", "AC.E.", "HO.E.", "AIC.E.", "DIC.E."},
                            "GE.E.");
    out.summary.experiment = cfg.name;

    const auto ge = collect(records, [](const TrialRecord& r) { return r.report.ge_e; });
    const auto pull = [&](auto member) { return collect(records, [member](const TrialRecord& r) { return r.report.*member; }); };

    // inverse-correlation bookkeeping: with a realizable truth L_0 = S and
    // L_{0,n} = S_n, so the two error forms are exactly the right quantities
    const auto loo_e = pull(&EvalReport::loo_e);
    const auto waic_e = pull(&EvalReport::waic_e);
    const auto c_n = pull(&EvalReport::c_n);
    const auto w_n = pull(&EvalReport::w_n);
    std::size_t close = 0;
    for (std::size_t i = 0; i < c_n.size(); ++i)
        close += std::abs(c_n[i] - w_n[i]) < 0.01 ? 1 : 0;
    std::vector<double> ge_plus_loo(ge.size());
    for (std::size_t i = 0; i < ge.size(); ++i) ge_plus_loo[i] = ge[i] + loo_e[i];
    bool l0_all = true;
    for (const auto& r : records)
        if (!r.error.has_value()) l0_all = l0_all && r.extra.at("L0n_equals_Sn").get<bool>();
    out.summary.notes = {{"lambda", rlct.lambda},
                         {"d_eff", d_eff},
                         {"corr_ge_loo", vec_corr(ge, loo_e)},
                         {"mean_ge_plus_loo", vec_mean(ge_plus_loo)},
                         {"two_lambda_over_n", 2.0 * rlct.lambda / static_cast<double>(cfg.n)},
                         {"loo_waic_close_fraction",
                          static_cast<double>(close) / static_cast<double>(c_n.size())},
                         {"corr_ge_waic", vec_corr(ge, waic_e)},
                         {"L0n_equals_Sn_all", l0_all}};

    out.records = std::move(records);
    return out;
}

ExperimentResult run_example2(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto model_base = make_model(cfg.model);
    const auto* model = dynamic_cast<const MatrixFactorizationModel*>(model_base.get());
    if (model == nullptr)
        throw ConfigError("bad_config", "example2 needs the matrix-factorization model");
    const auto truth_base = make_truth(cfg.truth);
    const auto* truth = dynamic_cast<const MatrixFactorizationTruth*>(truth_base.get());
    if (truth == nullptr)
        throw ConfigError("bad_config", "example2 needs the matrix-factorization truth");

    const RLCTSpec rlct = rlct_reduced_rank(model->rows(), model->cols(), model->rank(), truth->rank());
    const int d_eff = model->effective_dim();
    const double logn = std::log(static_cast<double>(cfg.n));

    auto records = run_trials(cfg, [&](std::size_t, std::uint64_t trial_seed, TrialRecord& rec) {
        Rng data_rng(derive_seed(trial_seed, {kTagData}));
        const Dataset data = truth->sample(cfg.n, data_rng);

        const MfMle mle = mf_mle(*model, data.view());
        const PluginCriteria plug = plugin_criteria(mle.loss, d_eff, rlct, cfg.n);

        SamplerConfig wbic_cfg = cfg.sampler;
        wbic_cfg.seed = derive_seed(trial_seed, {kTagWbic});
        wbic_cfg.threads = 1;
        const double wbic_total = wbic(*model, data.view(), wbic_cfg);

        EvalReport& r = rec.report;
        r.n = cfg.n;
        r.bic = plug.bic;
        r.afe = plug.afe;
        r.aic = plug.aic;
        r.wbic = wbic_total;
        r.s_n = empirical_entropy(*truth, data.view());
        fill_error_forms(r);

        const double nn = static_cast<double>(cfg.n);
        rec.extra = {{"mle_loss", mle.loss},
                     {"wbic_closer", std::abs(wbic_total / nn - plug.afe / nn) <
                                         std::abs(plug.bic / nn - plug.afe / nn)},
                     {"afe_bic_gap", plug.afe - plug.bic}};
    });

    ExperimentResult out;
    out.config = cfg;
    out.summary = summarize(records, {"AFE/n-S_n", "BIC/n-S_n", "WBIC/n-S_n"});
    out.summary.experiment = cfg.name;

    std::size_t closer = 0, used = 0;
    double max_gap_dev = 0.0;
    const double expected_gap = (rlct.lambda - 0.5 * d_eff) * logn;
    for (const auto& r : records) {
        if (r.error.has_value()) continue;
        ++used;
        closer += r.extra.at("wbic_closer").get<bool>() ? 1 : 0;
        max_gap_dev = std::max(max_gap_dev, std::abs(r.extra.at("afe_bic_gap").get<double>() - expected_gap));
    }
    out.summary.notes = {{"lambda", rlct.lambda},
                         {"d_eff", d_eff},
                         {"wbic_closer_fraction", static_cast<double>(closer) / static_cast<double>(used)},
                         {"afe_bic_identity_max_abs_dev", max_gap_dev}};

    out.records = std::move(records);
    return out;
}

ExperimentResult run_example3(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto truth_base = make_truth(cfg.truth);
    const auto* truth = dynamic_cast<const PolyRegTruth*>(truth_base.get());
    if (truth == nullptr)
        throw ConfigError("bad_config", "example3 needs the polynomial-regression truth");
    PolyRegHyper base_hyper;
    {
        const auto probe = make_model(cfg.model);
        const auto* pr = dynamic_cast<const PolyRegressionModel*>(probe.get());
        if (pr == nullptr)
            throw ConfigError("bad_config", "example3 needs the polynomial-regression model");
        base_hyper = pr->hyper();
    }
    const std::vector<double>& grid = cfg.hyper_grid;
    const double s_truth = truth->entropy();

    // models are immutable, so build the grid of them once
    std::vector<std::shared_ptr<PolyRegressionModel>> models;
    for (double b : grid) {
        PolyRegHyper h = base_hyper;
        h.b = b;
        models.push_back(std::make_shared<PolyRegressionModel>(h));
    }

    struct Criterion {
        const char* name;
        bool needs_proper;
    };
    const std::vector<Criterion> criteria = {
        {"LOO", false}, {"WAIC", false}, {"AC", false}, {"HO", false}, {"Free", true}};

    auto records = run_trials(cfg, [&](std::size_t, std::uint64_t trial_seed, TrialRecord& rec) {
        Rng data_rng(derive_seed(trial_seed, {kTagData}));
        const Dataset data = truth->sample(cfg.n, data_rng);
        const auto [first, second] = data.split(cfg.n1);
        const std::uint64_t gen_seed = derive_seed(trial_seed, {kTagGen});

        nlohmann::json per_b = nlohmann::json::array();
        std::vector<double> loo_v, waic_v, acv_v, ho_v, free_v, gen_v;
        // a grid point can be undefined for one criterion but fine for the
        // rest (small-subset posteriors lose properness first); record NaN
        // and let the argmin skip it
        const auto admissible = [](auto&& fn) -> double {
            try {
                return fn();
            } catch (const DomainError&) {
                return std::numeric_limits<double>::quiet_NaN();
            }
        };
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const PolyRegressionModel& m = *models[k];
            const double w_n = admissible([&] { return polyreg_exact_eval(m, data.view()).w_n; });
            const double c_n = admissible([&] { return polyreg_exact_loo(m, data.view()); });
            const double h_n2 =
                admissible([&] { return polyreg_exact_holdout(m, first, second); });
            const double a_n = admissible([&] {
                return acv(polyreg_exact_loo(m, first), polyreg_exact_holdout(m, first, second),
                           cfg.n1, cfg.n2);
            });
            double f_n = std::numeric_limits<double>::quiet_NaN();
            if (m.proper_prior())
                f_n = admissible([&] { return polyreg_free_energy(m, data.view()); });
            // one shared covariate test set per trial: same seed for every b
            const double g_n = admissible([&] {
                Rng gen_rng(gen_seed);
                const PolyRegPosterior post = polyreg_conjugate(m, data.view());
                return polyreg_gen_loss(m, post, *truth, cfg.test_m, gen_rng);
            });

            loo_v.push_back(c_n);
            waic_v.push_back(w_n);
            acv_v.push_back(a_n);
            ho_v.push_back(h_n2);
            free_v.push_back(f_n);
            gen_v.push_back(g_n);
            nlohmann::json row{{"b", grid[k]}, {"C_n", c_n},       {"W_n", w_n}, {"A_n", a_n},
                               {"H_n2", h_n2}, {"G_n", g_n}};
            if (std::isfinite(f_n)) row["F_n"] = f_n;
            per_b.push_back(std::move(row));
        }

        auto argmin = [&](const std::vector<double>& v, bool proper_only) {
            std::size_t best = grid.size();
            for (std::size_t k = 0; k < grid.size(); ++k) {
                if (proper_only && !models[k]->proper_prior()) continue;
                if (!std::isfinite(v[k])) continue;
                if (best == grid.size() || v[k] < v[best]) best = k;
            }
            if (best == grid.size())
                throw DomainError("empty_grid", "no admissible hyperparameter for this criterion");
            return best;
        };

        const std::size_t k_loo = argmin(loo_v, false);
        const std::size_t k_waic = argmin(waic_v, false);
        const std::size_t k_acv = argmin(acv_v, false);
        const std::size_t k_ho = argmin(ho_v, false);
        const std::size_t k_free = argmin(free_v, true);

        rec.extra = {{"chosen_b",
                      {{"LOO", grid[k_loo]},
                       {"WAIC", grid[k_waic]},
                       {"AC", grid[k_acv]},
                       {"HO", grid[k_ho]},
                       {"Free", grid[k_free]}}},
                     {"gen_err",
                      {{"LOO", gen_v[k_loo] - s_truth},
                       {"WAIC", gen_v[k_waic] - s_truth},
                       {"AC", gen_v[k_acv] - s_truth},
                       {"HO", gen_v[k_ho] - s_truth},
                       {"Free", gen_v[k_free] - s_truth}}},
                     {"grid", std::move(per_b)},
                     {"free_energy_restricted_to_proper_b", true}};
        rec.report.n = cfg.n;
        rec.report.n1 = cfg.n1;
        rec.report.n2 = cfg.n2;
        rec.report.s = s_truth;
        rec.report.s_n = empirical_entropy(*truth, data.view());
    });

    ExperimentResult out;
    out.config = cfg;
    out.summary.experiment = cfg.name;
    out.summary.columns = {"HyperMean", "HyperStd", "HyperRSE", "GenErrMean", "GenErrStd"};
    out.summary.trials_used = cfg.trials - count_excluded(records);
    out.summary.excluded = count_excluded(records);

    const double reference_b = 0.5;  // minimizer of the expected generalization loss
    nlohmann::json hyper_stds = nlohmann::json::object();
    for (const auto& crit : criteria) {
        const std::string name = crit.name;
        const auto chosen = collect(records, [&name](const TrialRecord& r) {
            return std::optional<double>(r.extra.at("chosen_b").at(name).get<double>());
        });
        const auto gen_err = collect(records, [&name](const TrialRecord& r) {
            return std::optional<double>(r.extra.at("gen_err").at(name).get<double>());
        });
        double rse = 0.0;
        for (double b : chosen) rse += (b - reference_b) * (b - reference_b);
        rse = std::sqrt(rse / static_cast<double>(chosen.size()));
        out.summary.rows.push_back(
            {name, {vec_mean(chosen), vec_std(chosen), rse, vec_mean(gen_err), vec_std(gen_err)}});
        hyper_stds[name] = vec_std(chosen);
    }
    out.summary.notes = {{"reference_b", reference_b}, {"hyper_std", hyper_stds}};

    // plot-ready long format: trial means of each criterion on the grid
    {
        std::ostringstream gcsv;
        gcsv << "b,C_n,W_n,A_n,H_n2,G_n_minus_S,F_n\n";
        for (std::size_t k = 0; k < grid.size(); ++k) {
            double c = 0, w = 0, a = 0, h = 0, g = 0, f = 0;
            std::size_t used = 0, f_used = 0;
            for (const auto& r : records) {
                if (r.error.has_value()) continue;
                const auto& row = r.extra.at("grid").at(k);
                c += row.at("C_n").get<double>();
                w += row.at("W_n").get<double>();
                a += row.at("A_n").get<double>();
                h += row.at("H_n2").get<double>();
                g += row.at("G_n").get<double>() - s_truth;
                ++used;
                if (row.contains("F_n")) {
                    f += row.at("F_n").get<double>();
                    ++f_used;
                }
            }
            const double du = static_cast<double>(used);
            gcsv << format_value(grid[k]) << "," << format_value(c / du) << "," << format_value(w / du)
                 << "," << format_value(a / du) << "," << format_value(h / du) << ","
                 << format_value(g / du) << ",";
            if (f_used > 0) gcsv << format_value(f / static_cast<double>(f_used));
            gcsv << "\n";
        }
        out.grid_csv = gcsv.str();
    }

    out.records = std::move(records);
    return out;
}

ExperimentResult run_variance_study(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto model_base = make_model(cfg.model);
    const auto* model = dynamic_cast<const PolyRegressionModel*>(model_base.get());
    if (model == nullptr)
        throw ConfigError("bad_config", "the variance study needs the polynomial-regression model");
    if (!model->proper_prior())
        throw ConfigError("bad_config", "the variance study needs a proper prior");
    const auto truth_base = make_truth(cfg.truth);
    const auto* truth = dynamic_cast<const PolyRegTruth*>(truth_base.get());
    if (truth == nullptr)
        throw ConfigError("bad_config", "the variance study needs the polynomial-regression truth");

    const auto theta0_opt = truth->realizing_params(*model);
    if (!theta0_opt.has_value())
        throw ConfigError("bad_config", "the variance study needs a realizable truth");
    const Eigen::VectorXd theta0 = *theta0_opt;

    auto records = run_trials(cfg, [&](std::size_t, std::uint64_t trial_seed, TrialRecord& rec) {
        Rng data_rng(derive_seed(trial_seed, {kTagData}));
        const Dataset data = truth->sample(cfg.n, data_rng);
        const double l0n = empirical_log_loss(*model, data.view(),
                                              {theta0.data(), static_cast<std::size_t>(theta0.size())});

        // full-sample adjusted CV
        const auto [first, second] = data.split(cfg.n1);
        const double c_n = polyreg_exact_loo(*model, data.view());
        const double a_n = acv(polyreg_exact_loo(*model, first),
                               polyreg_exact_holdout(*model, first, second), cfg.n1, cfg.n2);

        // half-sample adjusted CVs, each with its own n/4 + n/4 split
        auto half_acv = [&](const DataView& half) {
            const std::size_t q = half.size() / 2;
            const std::size_t lo = half.absolute_index(0);
            const DataView train(data, lo, lo + q);
            const DataView held(data, lo + q, lo + half.size());
            return acv(polyreg_exact_loo(*model, train), polyreg_exact_holdout(*model, train, held), q,
                       half.size() - q);
        };
        const double a_half_1 = half_acv(first);
        const double a_half_2 = half_acv(second);

        rec.report.n = cfg.n;
        rec.report.c_n = c_n;
        rec.report.a_n = a_n;
        rec.report.s_n = empirical_entropy(*truth, data.view());
        rec.extra = {{"L_0n", l0n},
                     {"q1", c_n - l0n},
                     {"q2", 0.5 * (a_n - l0n)},
                     {"q3", 0.125 * (a_half_1 + a_half_2 - 2.0 * l0n)},
                     {"A_half_1", a_half_1},
                     {"A_half_2", a_half_2}};
    });

    const FisherInfo fisher =
        fisher_matrices(*model, *truth, theta0, cfg.fisher_m, derive_seed(cfg.seed, {kTagFisher}));

    ExperimentResult out;
    out.config = cfg;
    out.summary.experiment = cfg.name;
    out.summary.columns = {"Mean", "Std", "Variance"};
    out.summary.trials_used = cfg.trials - count_excluded(records);
    out.summary.excluded = count_excluded(records);

    const char* names[3] = {"C_n-L_{0,n}", "(1/2)(A_n-L_{0,n})", "(1/8)(A_{n/2}+A'_{n/2}-2L_{0,n})"};
    const char* keys[3] = {"q1", "q2", "q3"};
    std::vector<std::vector<double>> q(3);
    for (int i = 0; i < 3; ++i) {
        const char* key = keys[i];
        q[static_cast<std::size_t>(i)] = collect(records, [key](const TrialRecord& r) {
            return std::optional<double>(r.extra.at(key).get<double>());
        });
        const auto& v = q[static_cast<std::size_t>(i)];
        out.summary.rows.push_back({names[i], {vec_mean(v), vec_std(v), vec_var(v)}});
    }
    const double var1 = vec_var(q[0]), var2 = vec_var(q[1]), var3 = vec_var(q[2]);
    const double trials_d = static_cast<double>(q[0].size());
    out.summary.notes = {{"var_ratio_2_1", var2 / var1},
                         {"var_ratio_3_1", var3 / var1},
                         {"tr_ij", fisher.tr_ij},
                         {"tr_ij_sq", fisher.tr_ij_sq},
                         {"target_mean", fisher.tr_ij / (2.0 * static_cast<double>(cfg.n))},
                         {"se_mean", {{"q1", std::sqrt(var1 / trials_d)},
                                      {"q2", std::sqrt(var2 / trials_d)},
                                      {"q3", std::sqrt(var3 / trials_d)}}}};

    out.records = std::move(records);
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.name == "example1") return run_example1(cfg);
    if (cfg.name == "example2") return run_example2(cfg);
    if (cfg.name == "example3") return run_example3(cfg);
    if (cfg.name == "variance") return run_variance_study(cfg);
    throw ConfigError("unknown_experiment", "no such experiment", {{"name", cfg.name}});
}

void write_outputs(const ExperimentResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto write_file = [&](const std::string& name, const std::string& body) {
        std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
        if (!f) throw ConfigError("bad_output", "cannot open output file", {{"file", name}});
        f << body;
    };
    write_file("config.json", result.config.to_json().dump(2) + "\n");
    {
        std::ostringstream lines;
        for (const auto& r : result.records) lines << r.to_json().dump() << "\n";
        write_file("records.jsonl", lines.str());
    }
    write_file("summary.json", result.summary.to_json().dump(2) + "\n");
    write_file("summary.csv", result.summary.to_csv());
    write_file("summary.md", result.summary.to_markdown());
    if (result.grid_csv.has_value()) write_file("grid.csv", *result.grid_csv);
}

FisherInfo fisher_matrices(const ModelSpec& model, const TruthOracle& truth,
                           const Eigen::VectorXd& theta0, std::size_t m, std::uint64_t seed) {
    if (m < 2) throw ConfigError("bad_config", "need at least two score samples", {{"m", m}});
    const int d = model.dim();
    Rng rng(derive_seed(seed, {0x15}));
    const Dataset sample = truth.sample(m, rng);
    const DataView view = sample.view();

    FisherInfo out;
    out.i_mat = Eigen::MatrixXd::Zero(d, d);
    std::span<const double> th(theta0.data(), static_cast<std::size_t>(theta0.size()));

    Eigen::VectorXd grad(d);
    if (model.has_gradients()) {
        for (std::size_t i = 0; i < m; ++i) {
            model.grad_log_density(view.row(i), th, {grad.data(), static_cast<std::size_t>(d)});
            out.i_mat.selfadjointView<Eigen::Lower>().rankUpdate(grad, 1.0);
        }
    } else {
        // central differences of the pointwise log density
        Eigen::VectorXd tp = theta0, tm = theta0;
        for (std::size_t i = 0; i < m; ++i) {
            for (int k = 0; k < d; ++k) {
                const double h = 1e-4 * std::max(1.0, std::abs(theta0[k]));
                tp = theta0;
                tm = theta0;
                tp[k] += h;
                tm[k] -= h;
                grad[k] = (model.log_density(view.row(i), {tp.data(), static_cast<std::size_t>(d)}) -
                           model.log_density(view.row(i), {tm.data(), static_cast<std::size_t>(d)})) /
                          (2.0 * h);
            }
            out.i_mat.selfadjointView<Eigen::Lower>().rankUpdate(grad, 1.0);
        }
    }
    out.i_mat = out.i_mat.selfadjointView<Eigen::Lower>();
    out.i_mat /= static_cast<double>(m);

    // J: finite differences of the gradient of the empirical loss on the
    // same sample
    auto loss_grad = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& g) {
        g.setZero();
        Eigen::VectorXd gi(d);
        std::span<const double> t(theta.data(), static_cast<std::size_t>(theta.size()));
        if (model.has_gradients()) {
            for (std::size_t i = 0; i < m; ++i) {
                model.grad_log_density(view.row(i), t, {gi.data(), static_cast<std::size_t>(d)});
                g -= gi;
            }
            g /= static_cast<double>(m);
        } else {
            for (int k = 0; k < d; ++k) {
                const double h = 1e-4 * std::max(1.0, std::abs(theta[k]));
                Eigen::VectorXd tp = theta, tm = theta;
                tp[k] += h;
                tm[k] -= h;
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                    acc += model.log_density(view.row(i), {tp.data(), static_cast<std::size_t>(d)}) -
                           model.log_density(view.row(i), {tm.data(), static_cast<std::size_t>(d)});
                g[k] = -acc / (2.0 * h * static_cast<double>(m));
            }
        }
    };
    out.j_mat.resize(d, d);
    Eigen::VectorXd gp(d), gm(d);
    for (int k = 0; k < d; ++k) {
        const double h = 1e-4 * std::max(1.0, std::abs(theta0[k]));
        Eigen::VectorXd tp = theta0, tm = theta0;
        tp[k] += h;
        tm[k] -= h;
        loss_grad(tp, gp);
        loss_grad(tm, gm);
        out.j_mat.col(k) = (gp - gm) / (2.0 * h);
    }
    out.j_mat = 0.5 * (out.j_mat + out.j_mat.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.j_mat);
    const double max_eig = eig.eigenvalues().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 1e-8 * std::max(1.0, max_eig)))
        throw DomainError("not_regular", "not regular at theta_0",
                          {{"min_eigenvalue", eig.eigenvalues().minCoeff()},
                           {"max_eigenvalue", max_eig}});

    const Eigen::MatrixXd k_mat = out.j_mat.llt().solve(out.i_mat).transpose();  // I J^{-1}
    out.tr_ij = k_mat.trace();
    out.tr_ij_sq = (k_mat * k_mat).trace();
    return out;
}

}  // namespace bayeseval
