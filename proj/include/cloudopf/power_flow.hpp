#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "cloudopf/network.hpp"

namespace cloudopf {

struct PfOptions {
    double tol = 1e-8;   // max |residual| in p.u.
    int max_iter = 30;
};

struct PfControls {
    Eigen::VectorXd pg;          // per generator; the designated slack generator's entry is ignored
    Eigen::VectorXd v_setpoint;  // per generator
};

PfControls default_controls(const NetworkCase& net);

struct OperatingPoint {
    Eigen::VectorXd v;       // per bus
    Eigen::VectorXd theta;   // per bus, slack at 0
    Eigen::VectorXd pg, qg;  // per generator
    Eigen::VectorXd p_fr, q_fr, p_to, q_to;  // per branch
    bool converged = false;
    double mismatch_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

struct BranchAdmittance {
    std::complex<double> yff, yft, ytf, ytt;
};

std::vector<BranchAdmittance> branch_admittances(const NetworkCase& net);
Eigen::MatrixXcd ybus(const NetworkCase& net);

// Flows at both ends of every branch from bus voltages (polar branch model).
void branch_flows(const NetworkCase& net, const Eigen::VectorXd& v, const Eigen::VectorXd& theta,
                  Eigen::VectorXd& p_fr, Eigen::VectorXd& q_fr,
                  Eigen::VectorXd& p_to, Eigen::VectorXd& q_to);

// Active/reactive power-balance residuals at every bus, stacked [P; Q].
// Evaluated through complex Ybus arithmetic; this is the oracle all solved
// operating points are replayed through.
Eigen::VectorXd mismatch(const NetworkCase& net,
                         const Eigen::VectorXd& v, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& pg, const Eigen::VectorXd& qg,
                         const Eigen::VectorXd& pd_extra, const Eigen::VectorXd& qd_extra);
Eigen::VectorXd mismatch(const NetworkCase& net,
                         const Eigen::VectorXd& v, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& pg, const Eigen::VectorXd& qg);

// Newton-Raphson in polar coordinates from a flat start (or `warm` when
// given). PV-bus generators hold pg and voltage setpoints, the slack
// generator absorbs the active-power residual, reactive output of a bus is
// split equally among its generators. Returns converged=false on a stalled
// iteration; throws SingularJacobian when the Jacobian cannot be factorized.
OperatingPoint ac_power_flow(const NetworkCase& net, const PfControls& controls,
                             const Eigen::VectorXd& pd_extra, const Eigen::VectorXd& qd_extra,
                             const PfOptions& opts = {}, const OperatingPoint* warm = nullptr);
OperatingPoint ac_power_flow(const NetworkCase& net, const PfControls& controls,
                             const PfOptions& opts = {});

// First-order response of the dependent quantities to the uncertain
// injections w (consumption deviations at `uncertain_buses`), by implicit
// differentiation of the power-flow equations at `op`. Generator active power
// responds through `policy_alpha` (one row per generator); generator voltage
// setpoints are held fixed. `dp_slack` is the slack generator's residual
// response beyond its own policy row (its total response is
// dp_slack + alpha_row(slack)).
//
// The bundle also carries the decomposition of every row as an affine
// function of the responding generators' alpha rows, frozen at this
// operating point:  row_q(alpha) = g0_q + sum_g coef_q(g) * alpha_row(g).
struct SensitivityBundle {
    std::vector<int> uncertain_buses;  // column labels (internal bus indices)
    std::vector<int> pq_buses;         // row labels of dv_pq
    std::vector<int> responding_gens;  // all generators except the designated slack generator
    int slack_gen = -1;
    int n_generators = 0;
    int n_branches = 0;

    Eigen::MatrixXd dv_pq;             // n_pq x N
    Eigen::MatrixXd dqg;               // n_gen x N
    Eigen::RowVectorXd dp_slack;       // 1 x N
    Eigen::MatrixXd df_from, df_to;    // n_branch x N (squared apparent power)

    Eigen::MatrixXd g0_v, g0_q, g0_ff, g0_ft;
    Eigen::RowVectorXd g0_slack_total;           // slack total response at alpha = 0
    Eigen::MatrixXd coef_v, coef_q, coef_ff, coef_ft;  // rows x responding_gens
    Eigen::VectorXd coef_slack;                  // responding_gens

    int n_uncertain() const { return int(uncertain_buses.size()); }
};

SensitivityBundle sensitivity_matrices(const NetworkCase& net, const OperatingPoint& op,
                                       const std::vector<int>& uncertain_buses,
                                       const Eigen::MatrixXd& policy_alpha);

}  // namespace cloudopf
