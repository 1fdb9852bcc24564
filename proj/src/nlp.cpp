#include "cloudopf/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace cloudopf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Iterate {
    Eigen::VectorXd x, s;          // primal variables and inequality slacks
    Eigen::VectorXd lam, mu;       // equality / inequality multipliers
    Eigen::VectorXd zl, zu;        // bound multipliers
};

struct Eval {
    double f = 0;
    Eigen::VectorXd grad, ceq, cin;
    Eigen::MatrixXd je, ji;
};

class IpmSolver {
public:
    IpmSolver(const NlpProblem& p, const NlpOptions& o) : P(p), opt(o) {
        n = P.num_vars();
        neq = P.num_eq();
        nin = P.num_ineq();
        lb.resize(n); ub.resize(n);
        P.bounds(lb, ub);
        has_lb.assign(n, false); has_ub.assign(n, false); fixed.assign(n, false);
        for (int i = 0; i < n; ++i) {
            if (lb[i] == ub[i]) { fixed[i] = true; continue; }
            if (lb[i] > -kInf) has_lb[i] = true;
            if (ub[i] < kInf) has_ub[i] = true;
        }
    }

    NlpResult run(Eigen::VectorXd x0);

private:
    const NlpProblem& P;
    NlpOptions opt;
    int n = 0, neq = 0, nin = 0;
    Eigen::VectorXd lb, ub;
    std::vector<bool> has_lb, has_ub, fixed;
    double fscale = 1.0;

    void evaluate(const Eigen::VectorXd& x, Eval& e, bool with_jac) const {
        e.f = P.objective(x);
        if (with_jac) {
            P.objective_gradient(x, e.grad);
            e.je.resize(neq, n);
            e.ji.resize(nin, n);
            if (neq) P.eq_jacobian(x, e.je); else e.je.resize(0, n);
            if (nin) P.ineq_jacobian(x, e.ji); else e.ji.resize(0, n);
        }
        if (neq) P.eq_constraints(x, e.ceq); else e.ceq.resize(0);
        if (nin) P.ineq_constraints(x, e.cin); else e.cin.resize(0);
    }

    double theta(const Eval& e, const Eigen::VectorXd& s) const {
        double t = 0;
        for (int i = 0; i < neq; ++i) t += std::abs(e.ceq[i]);
        for (int m = 0; m < nin; ++m) t += std::abs(e.cin[m] + s[m]);
        return t;
    }

    double barrier_phi(const Eval& e, const Iterate& it, double gamma) const {
        double phi = fscale * e.f;
        for (int m = 0; m < nin; ++m) phi -= gamma * std::log(it.s[m]);
        for (int i = 0; i < n; ++i) {
            if (has_lb[i]) phi -= gamma * std::log(it.x[i] - lb[i]);
            if (has_ub[i]) phi -= gamma * std::log(ub[i] - it.x[i]);
        }
        return phi;
    }

    double true_violation(const Eval& e) const {
        double p = 0;
        for (int i = 0; i < neq; ++i) p = std::max(p, std::abs(e.ceq[i]));
        for (int m = 0; m < nin; ++m) p = std::max(p, e.cin[m]);
        return p;
    }
};

NlpResult IpmSolver::run(Eigen::VectorXd x) {
    NlpResult res;
    if (x.size() != n) { res.status = NlpStatus::NumericalFailure; return res; }

    // push the start strictly inside the box
    for (int i = 0; i < n; ++i) {
        if (fixed[i]) { x[i] = lb[i]; continue; }
        if (has_lb[i] && has_ub[i]) {
            double pad = std::min(1e-2 * std::max(1.0, std::abs(lb[i])), 1e-2 * (ub[i] - lb[i]));
            x[i] = std::clamp(x[i], lb[i] + pad, ub[i] - pad);
        } else if (has_lb[i]) {
            x[i] = std::max(x[i], lb[i] + 1e-2 * std::max(1.0, std::abs(lb[i])));
        } else if (has_ub[i]) {
            x[i] = std::min(x[i], ub[i] - 1e-2 * std::max(1.0, std::abs(ub[i])));
        }
    }

    Eval e;
    evaluate(x, e, true);
    if (!std::isfinite(e.f)) { res.status = NlpStatus::NumericalFailure; return res; }

    if (opt.scale_objective) {
        double gmax = e.grad.size() ? e.grad.cwiseAbs().maxCoeff() : 0.0;
        fscale = gmax > 100.0 ? 100.0 / gmax : 1.0;
    }

    Iterate it;
    it.x = x;
    it.s.resize(nin);
    for (int m = 0; m < nin; ++m) it.s[m] = std::max(1e-2, -e.cin[m]);
    it.lam = Eigen::VectorXd::Zero(neq);
    it.mu.resize(nin);
    double gamma = opt.mu_init;
    for (int m = 0; m < nin; ++m) it.mu[m] = std::clamp(gamma / it.s[m], 1e-8, 1e6);
    it.zl = Eigen::VectorXd::Zero(n);
    it.zu = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        if (has_lb[i]) it.zl[i] = std::clamp(gamma / (it.x[i] - lb[i]), 1e-8, 1e6);
        if (has_ub[i]) it.zu[i] = std::clamp(gamma / (ub[i] - it.x[i]), 1e-8, 1e6);
    }

    std::vector<std::pair<double, double>> filter;  // (theta, f) pairs
    const double gamma_theta = 1e-5, gamma_phi = 1e-5, eta_armijo = 1e-4;
    const double s_theta = 1.1, s_phi = 2.3;
    double theta_max = 0.0;

    evaluate(it.x, e, true);
    double theta0 = theta(e, it.s);
    theta_max = 1e4 * std::max(1.0, theta0);
    const double theta_min_switch = 1e-4 * std::max(1.0, theta0);

    int iter = 0;
    for (; iter < opt.max_iter; ++iter) {
        // residuals
        Eigen::VectorXd rd = fscale * e.grad;
        if (neq) rd += e.je.transpose() * it.lam;
        if (nin) rd += e.ji.transpose() * it.mu;
        rd -= it.zl;
        rd += it.zu;

        double sum_mults = it.lam.lpNorm<1>() + it.mu.lpNorm<1>();
        int n_mults = neq + nin;
        double sum_z = 0;
        int n_z = 0;
        double comp_total = 0, comp_max = 0;
        int n_comp = 0;
        for (int m = 0; m < nin; ++m) {
            comp_total += it.s[m] * it.mu[m];
            comp_max = std::max(comp_max, it.s[m] * it.mu[m]);
            ++n_comp;
        }
        for (int i = 0; i < n; ++i) {
            if (has_lb[i]) { sum_z += it.zl[i]; ++n_z; double c = (it.x[i] - lb[i]) * it.zl[i]; comp_total += c; comp_max = std::max(comp_max, c); ++n_comp; }
            if (has_ub[i]) { sum_z += it.zu[i]; ++n_z; double c = (ub[i] - it.x[i]) * it.zu[i]; comp_total += c; comp_max = std::max(comp_max, c); ++n_comp; }
        }
        double sd = (n_mults + n_z) > 0 ? std::max(100.0, (sum_mults + sum_z) / double(n_mults + n_z)) / 100.0 : 1.0;
        double sc = (nin + n_z) > 0 ? std::max(100.0, (it.mu.lpNorm<1>() + sum_z) / double(nin + n_z)) / 100.0 : 1.0;

        double err_d = 0;
        for (int i = 0; i < n; ++i)
            if (!fixed[i]) err_d = std::max(err_d, std::abs(rd[i]));
        err_d /= sd;
        double err_p = true_violation(e);
        double err_c = n_comp ? comp_max / sc : 0.0;
        double kkt_err = std::max({err_d, err_p, err_c});

        if (opt.verbosity >= 2)
            std::printf("  it %3d f=%.8e th=%.3e kkt=%.3e gamma=%.3e\n", iter, e.f, theta(e, it.s), kkt_err, gamma);

        res.kkt_residual = kkt_err;
        res.constraint_violation = err_p;
        if (kkt_err <= opt.kkt_tol && err_p <= opt.feasibility_tol) {
            res.status = NlpStatus::Optimal;
            break;
        }

        // adaptive barrier target
        if (n_comp) gamma = std::max(1e-13, opt.sigma * comp_total / double(n_comp));
        else gamma = std::max(1e-13, 0.2 * gamma);

        // assemble the condensed primal-dual system
        Eigen::MatrixXd W(n, n);
        P.lagrangian_hessian(it.x, fscale, it.lam, it.mu, W);
        Eigen::VectorXd sinv_mu(nin), rpi(nin);
        for (int m = 0; m < nin; ++m) {
            rpi[m] = e.cin[m] + it.s[m];
            sinv_mu[m] = it.mu[m] / it.s[m];
        }
        Eigen::VectorXd dlb = Eigen::VectorXd::Zero(n), dub = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            if (has_lb[i]) dlb[i] = it.zl[i] / (it.x[i] - lb[i]);
            if (has_ub[i]) dub[i] = it.zu[i] / (ub[i] - it.x[i]);
        }

        Eigen::VectorXd rhs_x = -(fscale * e.grad);
        if (neq) rhs_x -= e.je.transpose() * it.lam;
        if (nin) {
            Eigen::VectorXd t(nin);
            for (int m = 0; m < nin; ++m) t[m] = (gamma + it.mu[m] * rpi[m]) / it.s[m];
            rhs_x -= e.ji.transpose() * t;
        }
        for (int i = 0; i < n; ++i) {
            if (has_lb[i]) rhs_x[i] += gamma / (it.x[i] - lb[i]);
            if (has_ub[i]) rhs_x[i] -= gamma / (ub[i] - it.x[i]);
        }

        const int dim = n + neq;
        Eigen::VectorXd dx, dlam;
        bool direction_ok = false;
        double accepted_alpha = 0.0;
        Eigen::VectorXd ds, dmu, dzl, dzu;
        double reg = 0.0;

        for (int attempt = 0; attempt < 7 && !direction_ok; ++attempt) {
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
            K.topLeftCorner(n, n) = W;
            if (nin) K.topLeftCorner(n, n) += e.ji.transpose() * sinv_mu.asDiagonal() * e.ji;
            for (int i = 0; i < n; ++i) K(i, i) += dlb[i] + dub[i] + reg;
            if (neq) {
                K.topRightCorner(n, neq) = e.je.transpose();
                K.bottomLeftCorner(neq, n) = e.je;
                for (int j = 0; j < neq; ++j) K(n + j, n + j) = -1e-11;
            }
            for (int i = 0; i < n; ++i) {
                if (!fixed[i]) continue;
                K.row(i).setZero();
                K.col(i).setZero();
                K(i, i) = 1.0;
            }
            Eigen::VectorXd rhs(dim);
            rhs.head(n) = rhs_x;
            for (int i = 0; i < n; ++i) if (fixed[i]) rhs[i] = 0.0;
            if (neq) rhs.tail(neq) = -e.ceq;

            Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
            Eigen::VectorXd sol = lu.solve(rhs);
            double resid = (K * sol - rhs).cwiseAbs().maxCoeff();
            if (!std::isfinite(resid) || resid > 1e-6 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
                reg = reg == 0.0 ? 1e-6 : reg * 100.0;
                continue;
            }
            dx = sol.head(n);
            dlam = neq ? Eigen::VectorXd(sol.tail(neq)) : Eigen::VectorXd();

            ds.resize(nin); dmu.resize(nin);
            if (nin) {
                ds = -rpi - e.ji * dx;
                for (int m = 0; m < nin; ++m)
                    dmu[m] = (gamma - it.s[m] * it.mu[m] - it.mu[m] * ds[m]) / it.s[m];
            }
            dzl = Eigen::VectorXd::Zero(n); dzu = Eigen::VectorXd::Zero(n);
            for (int i = 0; i < n; ++i) {
                if (has_lb[i]) dzl[i] = (gamma - (it.x[i] - lb[i]) * it.zl[i] - it.zl[i] * dx[i]) / (it.x[i] - lb[i]);
                if (has_ub[i]) dzu[i] = (gamma - (ub[i] - it.x[i]) * it.zu[i] + it.zu[i] * dx[i]) / (ub[i] - it.x[i]);
            }

            // fraction-to-the-boundary
            double tau = std::max(opt.tau_min, 1.0 - gamma);
            double ap = 1.0, ad = 1.0;
            for (int m = 0; m < nin; ++m) {
                if (ds[m] < 0) ap = std::min(ap, -tau * it.s[m] / ds[m]);
                if (dmu[m] < 0) ad = std::min(ad, -tau * it.mu[m] / dmu[m]);
            }
            for (int i = 0; i < n; ++i) {
                if (fixed[i]) continue;
                if (has_lb[i]) {
                    if (dx[i] < 0) ap = std::min(ap, -tau * (it.x[i] - lb[i]) / dx[i]);
                    if (dzl[i] < 0) ad = std::min(ad, -tau * it.zl[i] / dzl[i]);
                }
                if (has_ub[i]) {
                    if (dx[i] > 0) ap = std::min(ap, tau * (ub[i] - it.x[i]) / dx[i]);
                    if (dzu[i] < 0) ad = std::min(ad, -tau * it.zu[i] / dzu[i]);
                }
            }

            // filter line search on the primal step
            double th_k = theta(e, it.s);
            double phi_k = barrier_phi(e, it, gamma);
            double dphi = fscale * e.grad.dot(dx);
            for (int m = 0; m < nin; ++m) dphi -= gamma * ds[m] / it.s[m];
            for (int i = 0; i < n; ++i) {
                if (has_lb[i]) dphi -= gamma * dx[i] / (it.x[i] - lb[i]);
                if (has_ub[i]) dphi += gamma * dx[i] / (ub[i] - it.x[i]);
            }

            double alpha = ap;
            bool ls_ok = false;
            Eval et;
            for (int back = 0; back < 40 && alpha > 1e-12; ++back, alpha *= 0.5) {
                Eigen::VectorXd xt = it.x + alpha * dx;
                Eigen::VectorXd st = it.s + alpha * ds;
                evaluate(xt, et, false);
                if (!std::isfinite(et.f)) continue;
                bool bad = false;
                for (int m = 0; m < nin && !bad; ++m) bad = !(st[m] > 0);
                if (bad) continue;
                double th_t = theta(et, st);
                if (!std::isfinite(th_t) || th_t > theta_max) continue;

                Iterate trial = it;
                trial.x = xt; trial.s = st;
                double phi_t = barrier_phi(et, trial, gamma);
                if (!std::isfinite(phi_t)) continue;

                bool dominated = false;
                for (const auto& [tf, ff] : filter)
                    if (th_t >= tf && fscale * et.f >= ff) { dominated = true; break; }
                if (dominated) continue;

                bool switching = dphi < 0 &&
                                 alpha * std::pow(-dphi, s_phi) > std::pow(th_k, s_theta) &&
                                 th_k <= theta_min_switch;
                if (switching) {
                    if (phi_t <= phi_k + eta_armijo * alpha * dphi) { ls_ok = true; }
                } else {
                    if (th_t <= (1.0 - gamma_theta) * th_k || phi_t <= phi_k - gamma_phi * th_k) {
                        ls_ok = true;
                        filter.emplace_back((1.0 - gamma_theta) * th_k, fscale * e.f - gamma_phi * th_k);
                    }
                }
                if (ls_ok) break;
            }

            if (!ls_ok) {
                reg = reg == 0.0 ? 1e-6 : reg * 100.0;
                if (reg > 1e10) break;
                continue;
            }
            direction_ok = true;
            accepted_alpha = alpha;

            double ad_full = ad;
            it.x += alpha * dx;
            if (nin) it.s += alpha * ds;
            if (neq) it.lam += ad_full * dlam;
            if (nin) it.mu += ad_full * dmu;
            it.zl += ad_full * dzl;
            it.zu += ad_full * dzu;

            // keep bound duals within a factor of the barrier center
            const double ks = 1e10;
            for (int m = 0; m < nin; ++m)
                it.mu[m] = std::clamp(it.mu[m], gamma / (ks * it.s[m]), ks * std::max(gamma, 1e-12) / it.s[m]);
            for (int i = 0; i < n; ++i) {
                if (has_lb[i]) it.zl[i] = std::clamp(it.zl[i], gamma / (ks * (it.x[i] - lb[i])), ks * std::max(gamma, 1e-12) / (it.x[i] - lb[i]));
                if (has_ub[i]) it.zu[i] = std::clamp(it.zu[i], gamma / (ks * (ub[i] - it.x[i])), ks * std::max(gamma, 1e-12) / (ub[i] - it.x[i]));
            }
        }

        if (!direction_ok) {
            res.status = NlpStatus::NumericalFailure;
            res.iterations = iter;
            res.x = it.x;
            res.objective = e.f;
            res.lambda_eq = it.lam / fscale;
            res.mu_ineq = it.mu / fscale;
            return res;
        }
        (void)accepted_alpha;
        evaluate(it.x, e, true);
        if (!std::isfinite(e.f)) {
            res.status = NlpStatus::NumericalFailure;
            break;
        }
    }

    if (iter >= opt.max_iter && res.status != NlpStatus::Optimal) res.status = NlpStatus::IterationLimit;
    res.iterations = iter;
    res.x = it.x;
    res.objective = P.objective(it.x);
    res.lambda_eq = it.lam / fscale;
    res.mu_ineq = it.mu / fscale;
    return res;
}

// L1 elastic relaxation: minimize total violation subject to the original
// bounds; certifies infeasibility when the optimum stays away from zero.
class ElasticProblem : public NlpProblem {
public:
    explicit ElasticProblem(const NlpProblem& p) : P(p) {
        nx = P.num_vars(); ne = P.num_eq(); ni = P.num_ineq();
    }
    int num_vars() const override { return nx + ni + 2 * ne; }
    int num_eq() const override { return ne; }
    int num_ineq() const override { return ni; }
    void bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const override {
        lo.setConstant(num_vars(), 0.0);
        hi.setConstant(num_vars(), kInf);
        Eigen::VectorXd plo(nx), phi(nx);
        P.bounds(plo, phi);
        lo.head(nx) = plo;
        hi.head(nx) = phi;
    }
    double objective(const Eigen::VectorXd& z) const override { return z.tail(ni + 2 * ne).sum(); }
    void objective_gradient(const Eigen::VectorXd&, Eigen::VectorXd& g) const override {
        g.setConstant(num_vars(), 1.0);
        g.head(nx).setZero();
    }
    void eq_constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c) const override {
        P.eq_constraints(z.head(nx), c);
        c -= z.segment(nx + ni, ne);
        c += z.segment(nx + ni + ne, ne);
    }
    void ineq_constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c) const override {
        P.ineq_constraints(z.head(nx), c);
        c -= z.segment(nx, ni);
    }
    void eq_jacobian(const Eigen::VectorXd& z, Eigen::MatrixXd& J) const override {
        J.setZero(ne, num_vars());
        Eigen::MatrixXd je(ne, nx);
        P.eq_jacobian(z.head(nx), je);
        J.leftCols(nx) = je;
        for (int i = 0; i < ne; ++i) {
            J(i, nx + ni + i) = -1.0;
            J(i, nx + ni + ne + i) = 1.0;
        }
    }
    void ineq_jacobian(const Eigen::VectorXd& z, Eigen::MatrixXd& J) const override {
        J.setZero(ni, num_vars());
        Eigen::MatrixXd ji(ni, nx);
        P.ineq_jacobian(z.head(nx), ji);
        J.leftCols(nx) = ji;
        for (int m = 0; m < ni; ++m) J(m, nx + m) = -1.0;
    }
    void lagrangian_hessian(const Eigen::VectorXd& z, double, const Eigen::VectorXd& lam,
                            const Eigen::VectorXd& mu, Eigen::MatrixXd& H) const override {
        H.setZero(num_vars(), num_vars());
        Eigen::MatrixXd Hx(nx, nx);
        P.lagrangian_hessian(z.head(nx), 0.0, lam, mu, Hx);
        H.topLeftCorner(nx, nx) = Hx;
    }

    Eigen::VectorXd start_from(const Eigen::VectorXd& x0) const {
        Eigen::VectorXd z(num_vars());
        z.head(nx) = x0;
        Eigen::VectorXd ci(ni), ce(ne);
        if (ni) P.ineq_constraints(x0, ci);
        if (ne) P.eq_constraints(x0, ce);
        for (int m = 0; m < ni; ++m) z[nx + m] = std::max(ci[m], 0.0) + 1e-3;
        for (int i = 0; i < ne; ++i) {
            double rn = std::max(-ce[i], 0.0) + 1e-3;
            z[nx + ni + i] = ce[i] + rn;
            z[nx + ni + ne + i] = rn;
        }
        return z;
    }

private:
    const NlpProblem& P;
    int nx = 0, ne = 0, ni = 0;
};

}  // namespace

const char* to_string(NlpStatus s) {
    switch (s) {
        case NlpStatus::Optimal: return "optimal";
        case NlpStatus::Infeasible: return "infeasible";
        case NlpStatus::IterationLimit: return "iteration_limit";
        case NlpStatus::NumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

NlpResult solve_nlp(const NlpProblem& problem, const Eigen::VectorXd& start, const NlpOptions& opts) {
    Eigen::VectorXd lb(problem.num_vars()), ub(problem.num_vars());
    problem.bounds(lb, ub);
    for (int i = 0; i < problem.num_vars(); ++i) {
        if (lb[i] > ub[i]) {
            NlpResult r;
            r.status = NlpStatus::Infeasible;
            r.infeasibility_certificate = lb[i] - ub[i];
            r.x = start;
            r.iterations = 0;
            return r;
        }
    }

    IpmSolver solver(problem, opts);
    NlpResult main = solver.run(start);
    if (main.status == NlpStatus::Optimal || !opts.allow_restoration) return main;

    // restoration: smallest attainable L1 violation decides feasibility
    ElasticProblem elastic(problem);
    NlpOptions ropts = opts;
    ropts.allow_restoration = false;
    ropts.scale_objective = false;
    IpmSolver rsolver(elastic, ropts);
    NlpResult rest = rsolver.run(elastic.start_from(main.x.size() ? main.x : start));

    const double infeas_threshold = std::max(100.0 * opts.feasibility_tol, 1e-5);
    if (rest.status == NlpStatus::Optimal && rest.objective > infeas_threshold) {
        main.status = NlpStatus::Infeasible;
        main.infeasibility_certificate = rest.objective;
        return main;
    }
    if (rest.status == NlpStatus::Optimal) {
        // feasible after all: one warm retry from the restored point
        NlpOptions mopts = opts;
        mopts.allow_restoration = false;
        IpmSolver retry_solver(problem, mopts);
        NlpResult retry = retry_solver.run(rest.x.head(problem.num_vars()));
        retry.iterations += main.iterations + rest.iterations;
        if (retry.status == NlpStatus::Optimal) return retry;
        if (main.status == NlpStatus::NumericalFailure) return retry;
    }
    return main;
}

}  // namespace cloudopf
