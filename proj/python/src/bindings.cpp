#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "bayeseval/errors.hpp"
#include "bayeseval/evaluate.hpp"
#include "bayeseval/experiments.hpp"
#include "bayeseval/factory.hpp"
#include "bayeseval/rlct.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

json py_to_json(const py::handle& obj) {
    if (obj.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
    if (py::isinstance<py::int_>(obj)) return obj.cast<std::int64_t>();
    if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
    if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
    if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
        json arr = json::array();
        for (const auto& item : obj) arr.push_back(py_to_json(item));
        return arr;
    }
    if (py::isinstance<py::dict>(obj)) {
        json out = json::object();
        for (const auto& [key, value] : obj.cast<py::dict>())
            out[key.cast<std::string>()] = py_to_json(value);
        return out;
    }
    throw py::type_error("config values must be None, bool, int, float, str, list, or dict");
}

py::object json_to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null: return py::none();
        case json::value_t::boolean: return py::bool_(j.get<bool>());
        case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
        case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
        case json::value_t::number_float: return py::float_(j.get<double>());
        case json::value_t::string: return py::str(j.get<std::string>());
        case json::value_t::array: {
            py::list out;
            for (const auto& item : j) out.append(json_to_py(item));
            return out;
        }
        case json::value_t::object: {
            py::dict out;
            for (const auto& [key, value] : j.items()) out[py::str(key)] = json_to_py(value);
            return out;
        }
        default: return py::none();
    }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bayesian model evaluation: cross validation, information criteria, free energy";

    static py::exception<bayeseval::DomainError> domain_error(m, "DomainError");
    static py::exception<bayeseval::ConfigError> config_error(m, "ConfigError", domain_error);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const bayeseval::ConfigError& e) {
            py::set_error(config_error, e.to_json().dump().c_str());
        } catch (const bayeseval::DomainError& e) {
            py::set_error(domain_error, e.to_json().dump().c_str());
        }
    });

    m.def(
        "rlct_regular", [](int d) { return json_to_py(bayeseval::rlct_regular(d).to_json()); },
        py::arg("d"), "lambda = d/2 for a regular model");

    m.def(
        "rlct_reduced_rank",
        [](int M, int N, int H, int r) {
            return json_to_py(bayeseval::rlct_reduced_rank(M, N, H, r).to_json());
        },
        py::arg("M"), py::arg("N"), py::arg("H"), py::arg("r"),
        "learning coefficient of reduced-rank regression");

    m.def(
        "rlct_volume_estimate",
        [](const std::function<double(std::vector<double>)>& excess_loss, int dim,
           std::vector<double> eps_grid, std::size_t samples, std::uint64_t seed) {
            auto loss = [&excess_loss](std::span<const double> th) {
                return excess_loss(std::vector<double>(th.begin(), th.end()));
            };
            auto prior = [](std::span<double> th, bayeseval::Rng& rng) {
                for (double& t : th) t = 2.0 * rng.uniform() - 1.0;
            };
            const auto est =
                bayeseval::rlct_volume_estimate(loss, dim, prior, std::move(eps_grid), samples, seed, 1);
            json out = est.spec.to_json();
            out["eps"] = est.eps;
            out["prob"] = est.prob;
            out["hits"] = est.hits;
            return json_to_py(out);
        },
        py::arg("excess_loss"), py::arg("dim"), py::arg("eps_grid"), py::arg("samples") = 1000000,
        py::arg("seed") = 0,
        "volume-scaling estimate of lambda under the uniform prior on [-1,1]^dim");

    m.def(
        "evaluate",
        [](const py::dict& config) {
            const auto outcome = bayeseval::evaluate_config(py_to_json(config));
            json report = outcome.report.to_json();
            if (!outcome.diagnostics.empty()) report["diagnostics"] = outcome.diagnostics;
            return json_to_py(report);
        },
        py::arg("config"), "evaluate a configured model on a dataset; returns the report dict");

    m.def(
        "sample",
        [](const py::dict& config) {
            const json cfg = py_to_json(config);
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
                const auto truth = bayeseval::make_truth(cfg.at("truth"));
                bayeseval::Rng rng(
                    bayeseval::derive_seed(cfg.value("seed", std::uint64_t{0}), {0xda}));
                return truth->sample(cfg.at("n").get<std::size_t>(), rng);
            }();
            bayeseval::SamplerConfig scfg;
            if (cfg.contains("sampler"))
                scfg = bayeseval::sampler_config_from_json(cfg.at("sampler"), scfg);
            scfg.beta = cfg.value("beta", 1.0);
            scfg.seed = cfg.value("seed", std::uint64_t{0});
            scfg.threads = 1;
            const auto draws = bayeseval::sample_tempered(*model, data.view(), scfg);
            py::dict out;
            out["theta"] = draws.theta;
            out["loglik"] = draws.loglik;
            out["beta"] = draws.beta;
            out["acceptance"] = draws.diagnostics.acceptance;
            out["rhat"] = draws.diagnostics.rhat;
            out["ess"] = draws.diagnostics.ess;
            out["warnings"] = draws.diagnostics.warnings;
            return out;
        },
        py::arg("config"), "posterior draws plus diagnostics for a configured model/dataset");

    m.def(
        "run_experiment",
        [](const py::dict& config, const std::optional<std::string>& out_dir) {
            const auto cfg = bayeseval::ExperimentConfig::from_json(py_to_json(config));
            const auto result = bayeseval::run_experiment(cfg);
            if (out_dir.has_value()) bayeseval::write_outputs(result, *out_dir);
            json records = json::array();
            for (const auto& r : result.records) records.push_back(r.to_json());
            return json_to_py(json{{"summary", result.summary.to_json()},
                                   {"summary_csv", result.summary.to_csv()},
                                   {"records", records}});
        },
        py::arg("config"), py::arg("out_dir") = std::nullopt,
        "run one of the predefined studies; optionally writes the artifact files");

    m.def(
        "experiment_defaults",
        [](const std::string& name) {
            return json_to_py(bayeseval::ExperimentConfig::defaults(name).to_json());
        },
        py::arg("name"), "default config for a named experiment");
}
