#pragma once

#include <memory>
#include <optional>

#include "cloudopf/network.hpp"
#include "cloudopf/nlp.hpp"
#include "cloudopf/power_flow.hpp"
#include "cloudopf/uncertainty.hpp"

namespace cloudopf {

// Constraint-tightening margins. Classes fixed at zero by construction
// (V at PV/slack buses, P and Q at PQ buses) stay zero in `v`.
struct Margins {
    Eigen::VectorXd p, q;          // per generator (p.u.)
    Eigen::VectorXd v;             // per bus, nonzero only at PQ buses (p.u.)
    Eigen::VectorXd f_from, f_to;  // per branch (p.u.^2)

    static Margins zeros(const NetworkCase& net);
    bool is_zero() const;
    double max_abs() const;
    double max_change(const Margins& other) const;
    Eigen::VectorXd stacked() const;
};

void validate_margins(const NetworkCase& net, const Margins& m);

struct Solution {
    Eigen::VectorXd v, theta, pg, qg;
    Eigen::VectorXd p_fr, q_fr, p_to, q_to;
    double objective = std::numeric_limits<double>::quiet_NaN();  // $/h incl. any correction
    NlpStatus status = NlpStatus::NumericalFailure;
    int iterations = 0;
    double kkt_residual = std::numeric_limits<double>::infinity();
    double infeasibility_certificate = 0.0;
    // set on Infeasible when a zero-margin retry succeeded, i.e. the margins
    // (not the base case) caused the infeasibility
    bool margin_induced_infeasible = false;

    OperatingPoint operating_point(const NetworkCase& net) const;
};

// Frozen-linearization data that turns the deterministic OPF into the inner
// model of the chance-constrained solve: alpha becomes a decision variable
// (vector or matrix parametrization), per-class margins become variables tied
// to alpha by lambda^2 = kappa^2 * row(alpha) cov row(alpha)', and the
// objective gains the expected fluctuating cost.
struct CloudInnerConfig {
    PolicyKind kind = PolicyKind::AlphaVector;  // AlphaVector or AlphaMatrix
    SensitivityBundle bundle;                   // decomposition frozen at the linearization point
    Eigen::MatrixXd cov;
    double kap_p = 0, kap_q = 0, kap_v = 0, kap_f = 0;  // inverse-normal factors per class
};

class AcOpfModel : public NlpProblem {
public:
    // deterministic AC-OPF with margins as data (+ constant cost correction)
    AcOpfModel(const NetworkCase& net, const Margins& margins, double cost_correction = 0.0);
    // chance-constrained inner model with alpha/lambda as variables
    AcOpfModel(const NetworkCase& net, const CloudInnerConfig& cloud);

    int num_vars() const override;
    int num_eq() const override;
    int num_ineq() const override;
    void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const override;
    double objective(const Eigen::VectorXd& x) const override;
    void objective_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override;
    void eq_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override;
    void ineq_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override;
    void eq_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& J) const override;
    void ineq_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& J) const override;
    void lagrangian_hessian(const Eigen::VectorXd& x, double sigma_f, const Eigen::VectorXd& lam,
                            const Eigen::VectorXd& mu, Eigen::MatrixXd& H) const override;

    Eigen::VectorXd default_start() const;
    Eigen::VectorXd start_from(const Solution& sol) const;

    Solution extract(const NlpResult& res) const;
    // alpha matrix at the solved point (cloud mode; data-margin mode returns empty)
    Eigen::MatrixXd alpha_at(const Eigen::VectorXd& x) const;
    // margins implied by the frozen linearization at the solved alpha
    Margins margins_at(const Eigen::VectorXd& x) const;
    // expected fluctuating cost at the solved alpha (cloud) or the constant correction
    double cost_correction_at(const Eigen::VectorXd& x) const;
    bool cloud_mode() const { return cloud_.has_value(); }
    const NetworkCase& network() const { return net_; }

    // variable offsets (exposed for the debug dump and tests)
    int ix_v() const { return 0; }
    int ix_theta() const { return nb_; }
    int ix_pg() const { return 2 * nb_; }
    int ix_qg() const { return 2 * nb_ + ng_; }
    int ix_flow() const { return 2 * nb_ + 2 * ng_; }  // pfr | qfr | pto | qto blocks
    int ix_alpha() const { return ix_flow() + 4 * nbr_; }
    int n_alpha() const { return nap_; }

private:
    struct MarginRow {
        int lam_var = -1;            // variable index of lambda
        double kappa = 0.0;
        Eigen::RowVectorXd rho0;     // fixed part of the response row
        Eigen::VectorXd cvec;        // coefficients of the responding generators' alpha rows
    };

    void init_base();
    void init_cloud();
    // response row and its quadratic form at the current alpha block
    Eigen::RowVectorXd row_at(const MarginRow& r, const Eigen::MatrixXd& alpha_resp) const;
    Eigen::MatrixXd alpha_resp_at(const Eigen::VectorXd& x) const;  // responding-gen rows
    void add_quad_gradient(const MarginRow& r, const Eigen::MatrixXd& alpha_resp, double scale,
                           Eigen::VectorXd& grad) const;            // scale * d(rho cov rho')/d(alpha params)
    void add_quad_hessian(const MarginRow& r, double scale, Eigen::MatrixXd& H) const;

    NetworkCase net_;
    Margins margins_;
    double corr_const_ = 0.0;
    std::optional<CloudInnerConfig> cloud_;

    int nb_ = 0, ng_ = 0, nbr_ = 0, npq_ = 0, nap_ = 0, nlam_ = 0;
    int n_colsum_ = 0;
    std::vector<int> limited_;            // branch indices with s_max > 0
    std::vector<std::vector<int>> gens_at_;
    std::vector<int> pq_;
    std::vector<MarginRow> margin_rows_;  // one equality each (kappa > 0)
    std::vector<int> lam_fixed_zero_;     // lambda vars pinned at 0 (kappa == 0 classes)
    // lambda variable offsets (cloud mode): P, Q at gens; V at PQ; F at limited ends
    int ix_lam_ = 0;
    struct BranchEnd {
        int own, other;
        double go, bo, gx, bx;
    };
    std::vector<BranchEnd> ends_;  // 2 per branch: from, to
};

struct OpfOptions {
    NlpOptions nlp;
    bool diagnose_margin_infeasibility = true;
};

// Classical AC-OPF with tightened limits: compose model + solve from a flat
// start (or `warm`). On Infeasible with nonzero margins a zero-margin retry
// fills margin_induced_infeasible.
Solution solve_ac_opf(const NetworkCase& net, const Margins& margins, const OpfOptions& opts = {},
                      const Solution* warm = nullptr);

std::unique_ptr<AcOpfModel> build_opf_model(const NetworkCase& net, const Margins& margins,
                                            double cost_correction = 0.0);

}  // namespace cloudopf
