#pragma once

#include "bayeseval/model.hpp"

namespace bayeseval {

// Matrix factorization: an M x N Gaussian observation with mean A B, where
// A is M x H and B is H x N, each entry of X having unit variance.  The flat
// parameter is vec(A) followed by vec(B), both row-major.  Priors are
// independent zero-mean Gaussians with standard deviations rho (A) and
// mu (B).  Over-parametrized ranks make this the singular test bed.
class MatrixFactorizationModel final : public ModelSpec {
public:
    MatrixFactorizationModel(int M, int N, int H, double rho, double mu);

    std::string name() const override { return "matrix_factorization"; }
    int dim() const override { return M_ * H_ + H_ * N_; }
    std::vector<int> obs_shape() const override { return {M_, N_}; }

    double log_density(std::span<const double> obs, std::span<const double> theta) const override;
    double log_prior(std::span<const double> theta) const override;
    bool proper_prior() const override { return true; }
    void sample_prior(std::span<double> theta, Rng& rng) const override;

    bool has_gradients() const override { return true; }
    void grad_log_density(std::span<const double> obs, std::span<const double> theta,
                          std::span<double> grad) const override;
    void grad_log_prior(std::span<const double> theta, std::span<double> grad) const override;

    std::unique_ptr<LikelihoodContext> make_context(const DataView& data) const override;
    void log_density_matrix(const DataView& data, const RowMatrix& thetas,
                            Eigen::MatrixXd& out) const override;

    int rows() const { return M_; }
    int cols() const { return N_; }
    int rank() const { return H_; }
    // parameter count modulo the GL(H) reparameterization
    int effective_dim() const { return M_ * H_ + H_ * N_ - H_ * H_; }

    // product A B for a flat parameter
    RowMatrix product(std::span<const double> theta) const;

private:
    int M_, N_, H_;
    double rho_, mu_;
    double half_obs_log2pi_;   // (MN/2) log 2pi
    double log_prior_norm_;
};

struct MfMle {
    Eigen::VectorXd theta;
    double loss;
};
// best rank-<=H fit: truncated singular value decomposition of the sample
// mean matrix
MfMle mf_mle(const MatrixFactorizationModel& model, const DataView& data);

class MatrixFactorizationTruth final : public TruthOracle {
public:
    // mean matrix diag(diag_values) embedded in M x N
    MatrixFactorizationTruth(int M, int N, std::vector<double> diag_values);

    std::string name() const override { return "matrix_factorization"; }
    Dataset sample(std::size_t n, Rng& rng) const override;
    double log_density(std::span<const double> obs) const override;
    double entropy() const override;
    std::optional<Eigen::VectorXd> realizing_params(const ModelSpec& model) const override;

    int rank() const { return rank_; }
    const RowMatrix& mean() const { return mean_; }

private:
    int M_, N_;
    RowMatrix mean_;
    std::vector<int> nonzero_;  // diagonal positions with nonzero value
    int rank_;
    double half_obs_log2pi_;
};

}  // namespace bayeseval
