#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cloudopf/network.hpp"

namespace cloudopf {

// Scenario cloud of uncontrolled active-power consumption at the uncertain
// buses: x_u has mean `mean` and covariance `cov`; deviations w = x_u - mean
// are what the response policies and margins act on. w > 0 means increased
// consumption at the bus (generators respond in the same direction).
struct ScenarioCloud {
    std::vector<int> uncertain_buses;  // internal bus indices, ordered
    Eigen::VectorXd mean;              // p.u. active power per uncertain bus
    Eigen::VectorXd sigma;             // per-bus standard deviation
    Eigen::MatrixXd cov;               // covariance, p.u.^2
    Eigen::MatrixXd samples;           // optional M x N raw draws of x_u (not deviations)

    int n_sources() const { return int(uncertain_buses.size()); }
    bool has_samples() const { return samples.rows() > 0; }
    bool degenerate() const { return cov.size() == 0 || cov.cwiseAbs().maxCoeff() == 0.0; }
};

void validate_cloud(const ScenarioCloud& cloud);

// Population (1/M) statistics of raw draws; samples retained in the cloud.
ScenarioCloud cloud_from_samples(const Eigen::MatrixXd& samples, const std::vector<int>& uncertain_buses);

// Independent Gaussian cloud centered at the current loading: mean_i = pd_i,
// sigma_i = sigma_ratio * pd_i. Every uncertain bus must carry active demand.
ScenarioCloud gaussian_cloud(const NetworkCase& net, const std::vector<int>& uncertain_buses, double sigma_ratio);

// All buses with pd > 0, the default uncertain set.
std::vector<int> default_uncertain_buses(const NetworkCase& net);

// Symmetric PSD square root via eigendecomposition, negative eigenvalues
// clipped at zero. Throws NotPSD below the -1e-10 tolerance.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov);

// M x N matrix of zero-mean deviations w with covariance cloud.cov;
// fixed seed gives a bit-identical matrix.
Eigen::MatrixXd sample_cloud(const ScenarioCloud& cloud, int count, std::uint64_t seed);

enum class PolicyKind { FixedAlpha, AlphaVector, AlphaMatrix };

const char* to_string(PolicyKind k);

// Affine generator response: FixedAlpha/AlphaVector replicate one
// participation vector across every uncertainty component; AlphaMatrix
// couples each generator to each component separately.
struct ResponsePolicy {
    PolicyKind kind = PolicyKind::FixedAlpha;
    Eigen::MatrixXd alpha;  // n_generators x n_sources

    static ResponsePolicy fixed(const Eigen::VectorXd& alpha_vec, int n_sources);
    static ResponsePolicy vector(const Eigen::VectorXd& alpha_vec, int n_sources);
    static ResponsePolicy matrix(const Eigen::MatrixXd& alpha_mat);
    static ResponsePolicy equal_shares(PolicyKind kind, int n_generators, int n_sources);

    bool alpha_is_variable() const { return kind != PolicyKind::FixedAlpha; }
};

// Column sums must equal one (PolicyInvariantViolated otherwise).
void validate_policy(const ResponsePolicy& policy, double tol = 1e-8);

// pg_i(w) = base_pg_i + sum_j alpha_ij w_j. The slack generator's residual
// absorption is not added here; it emerges from the AC power-flow solve.
Eigen::VectorXd apply_response(const ResponsePolicy& policy, const Eigen::VectorXd& base_pg,
                               const Eigen::VectorXd& w);

// CSV exchange: header row of original bus ids, one row of x_u per sample.
void write_samples_csv(std::ostream& out, const NetworkCase& net, const ScenarioCloud& cloud);
ScenarioCloud read_samples_csv(std::istream& in, const NetworkCase& net);

}  // namespace cloudopf
