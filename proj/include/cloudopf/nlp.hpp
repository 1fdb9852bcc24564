#pragma once

#include <Eigen/Dense>
#include <limits>

namespace cloudopf {

// Smooth NLP in the form
//   min f(x)  s.t.  c_eq(x) = 0,  c_ineq(x) <= 0,  lb <= x <= ub
// with dense first derivatives and the exact Hessian of the Lagrangian
//   sigma_f * f + lambda' c_eq + mu' c_ineq.
// Variables with lb == ub are treated as fixed.
class NlpProblem {
public:
    virtual ~NlpProblem() = default;
    virtual int num_vars() const = 0;
    virtual int num_eq() const = 0;
    virtual int num_ineq() const = 0;
    virtual void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const = 0;
    virtual double objective(const Eigen::VectorXd& x) const = 0;
    virtual void objective_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const = 0;
    virtual void eq_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const = 0;
    virtual void ineq_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const = 0;
    virtual void eq_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& J) const = 0;
    virtual void ineq_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& J) const = 0;
    virtual void lagrangian_hessian(const Eigen::VectorXd& x, double sigma_f,
                                    const Eigen::VectorXd& lambda_eq, const Eigen::VectorXd& mu_ineq,
                                    Eigen::MatrixXd& H) const = 0;
};

enum class NlpStatus { Optimal, Infeasible, IterationLimit, NumericalFailure };

const char* to_string(NlpStatus s);

struct NlpOptions {
    double kkt_tol = 1e-6;
    double feasibility_tol = 1e-6;
    int max_iter = 200;
    double mu_init = 0.1;       // initial barrier parameter
    double sigma = 0.1;         // centering factor of the adaptive barrier update
    double tau_min = 0.995;     // fraction-to-the-boundary
    bool scale_objective = true;
    bool allow_restoration = true;  // cleared inside the elastic phase
    int verbosity = 0;
};

struct NlpResult {
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    NlpStatus status = NlpStatus::NumericalFailure;
    int iterations = 0;
    double kkt_residual = std::numeric_limits<double>::infinity();
    double constraint_violation = std::numeric_limits<double>::infinity();
    // L1 violation of the elastic-restoration optimum; > 0 certifies Infeasible
    double infeasibility_certificate = 0.0;
    Eigen::VectorXd lambda_eq, mu_ineq;
};

// Primal-dual interior point with a logarithmic barrier, exact Hessians and a
// filter line search. Deterministic: identical inputs give bit-identical
// iterates. On stalling/iteration limit an elastic feasibility restoration is
// solved; a positive minimal violation turns into status Infeasible.
NlpResult solve_nlp(const NlpProblem& problem, const Eigen::VectorXd& start, const NlpOptions& opts = {});

}  // namespace cloudopf
