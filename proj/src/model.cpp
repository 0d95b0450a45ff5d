#include "bayeseval/model.hpp"

#include <cmath>

#include "bayeseval/errors.hpp"

namespace bayeseval {

namespace {

class GenericContext final : public LikelihoodContext {
public:
    GenericContext(const ModelSpec& model, DataView data) : model_(model), data_(data) {}

    double sum_log_density(std::span<const double> theta) const override {
        double acc = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i) acc += model_.log_density(data_.row(i), theta);
        return acc;
    }

    void grad_sum_log_density(std::span<const double> theta, std::span<double> grad) const override {
        Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grad.size()));
        Eigen::VectorXd g(total.size());
        for (std::size_t i = 0; i < data_.size(); ++i) {
            model_.grad_log_density(data_.row(i), theta, {g.data(), static_cast<std::size_t>(g.size())});
            total += g;
        }
        for (Eigen::Index k = 0; k < total.size(); ++k) grad[static_cast<std::size_t>(k)] = total[k];
    }

private:
    const ModelSpec& model_;
    DataView data_;
};

}  // namespace

void ModelSpec::sample_prior(std::span<double>, Rng&) const {
    throw DomainError("improper_prior", "model cannot sample from an improper prior",
                      {{"model", name()}});
}

void ModelSpec::grad_log_density(std::span<const double>, std::span<const double>, std::span<double>) const {
    throw DomainError("no_gradient", "model does not provide gradients", {{"model", name()}});
}

void ModelSpec::grad_log_prior(std::span<const double>, std::span<double>) const {
    throw DomainError("no_gradient", "model does not provide gradients", {{"model", name()}});
}

std::unique_ptr<LikelihoodContext> ModelSpec::make_context(const DataView& data) const {
    return std::make_unique<GenericContext>(*this, data);
}

void ModelSpec::log_density_matrix(const DataView& data, const RowMatrix& thetas,
                                   Eigen::MatrixXd& out) const {
    const Eigen::Index s_count = thetas.rows();
    const Eigen::Index n = static_cast<Eigen::Index>(data.size());
    out.resize(s_count, n);
    for (Eigen::Index s = 0; s < s_count; ++s) {
        const std::span<const double> theta{thetas.row(s).data(), static_cast<std::size_t>(thetas.cols())};
        for (Eigen::Index i = 0; i < n; ++i) {
            out(s, i) = log_density(data.row(static_cast<std::size_t>(i)), theta);
        }
    }
}

double empirical_entropy(const TruthOracle& truth, const DataView& data) {
    if (data.size() == 0) throw DomainError("empty_data", "empirical entropy of an empty sample");
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) acc += truth.log_density(data.row(i));
    return -acc / static_cast<double>(data.size());
}

double empirical_log_loss(const ModelSpec& model, const DataView& data, std::span<const double> theta) {
    if (data.size() == 0) throw DomainError("empty_data", "empirical log loss of an empty sample");
    if (static_cast<int>(theta.size()) != model.dim()) {
        throw ConfigError("bad_params", "parameter size does not match model dimension",
                          {{"expected", model.dim()}, {"got", theta.size()}});
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) acc += model.log_density(data.row(i), theta);
    return -acc / static_cast<double>(data.size());
}

}  // namespace bayeseval
