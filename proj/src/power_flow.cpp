#include "cloudopf/power_flow.hpp"

#include <cmath>

namespace cloudopf {

namespace {

// θ/V unknown layout shared by the Newton solve and the sensitivity system:
// angles at every non-slack bus, magnitudes at PQ buses.
struct ULayout {
    std::vector<int> ang, mag;
    std::vector<int> ang_pos, mag_pos;  // bus -> position, -1 when fixed

    explicit ULayout(const NetworkCase& net)
        : ang_pos(net.n_buses(), -1), mag_pos(net.n_buses(), -1) {
        for (int i = 0; i < net.n_buses(); ++i) {
            if (i != net.slack_bus) { ang_pos[i] = int(ang.size()); ang.push_back(i); }
            if (net.buses[i].kind == BusKind::PQ) { mag_pos[i] = int(mag.size()); mag.push_back(i); }
        }
    }
    int size() const { return int(ang.size() + mag.size()); }
    int vcol(int bus) const { return mag_pos[bus] < 0 ? -1 : int(ang.size()) + mag_pos[bus]; }
};

struct Polar {
    Eigen::MatrixXd G, B;
    Eigen::VectorXd P, Q;  // injections at the last evaluate()

    explicit Polar(const NetworkCase& net) {
        Eigen::MatrixXcd Y = ybus(net);
        G = Y.real();
        B = Y.imag();
    }

    void evaluate(const Eigen::VectorXd& v, const Eigen::VectorXd& th) {
        const int n = int(v.size());
        P.resize(n); Q.resize(n);
        for (int i = 0; i < n; ++i) {
            double p = 0, q = 0;
            for (int j = 0; j < n; ++j) {
                if (G(i, j) == 0.0 && B(i, j) == 0.0) continue;
                double d = th[i] - th[j];
                double c = std::cos(d), s = std::sin(d);
                p += v[j] * (G(i, j) * c + B(i, j) * s);
                q += v[j] * (G(i, j) * s - B(i, j) * c);
            }
            P[i] = v[i] * p;
            Q[i] = v[i] * q;
        }
    }

    // dP_i/du and dQ_i/du rows in the given layout (requires evaluate() state)
    void p_row(const ULayout& u, const Eigen::VectorXd& v, const Eigen::VectorXd& th,
               int i, Eigen::RowVectorXd& row) const {
        row.setZero(u.size());
        const int n = int(v.size());
        for (int j = 0; j < n; ++j) {
            if (j != i && G(i, j) == 0.0 && B(i, j) == 0.0) continue;
            double d = th[i] - th[j];
            double c = std::cos(d), s = std::sin(d);
            if (j == i) {
                if (u.ang_pos[i] >= 0) row[u.ang_pos[i]] += -Q[i] - B(i, i) * v[i] * v[i];
                if (u.vcol(i) >= 0) row[u.vcol(i)] += P[i] / v[i] + G(i, i) * v[i];
            } else {
                if (u.ang_pos[j] >= 0) row[u.ang_pos[j]] += -v[i] * v[j] * (G(i, j) * s - B(i, j) * c);
                if (u.vcol(j) >= 0) row[u.vcol(j)] += v[i] * (G(i, j) * c + B(i, j) * s);
            }
        }
    }

    void q_row(const ULayout& u, const Eigen::VectorXd& v, const Eigen::VectorXd& th,
               int i, Eigen::RowVectorXd& row) const {
        row.setZero(u.size());
        const int n = int(v.size());
        for (int j = 0; j < n; ++j) {
            if (j != i && G(i, j) == 0.0 && B(i, j) == 0.0) continue;
            double d = th[i] - th[j];
            double c = std::cos(d), s = std::sin(d);
            if (j == i) {
                if (u.ang_pos[i] >= 0) row[u.ang_pos[i]] += P[i] - G(i, i) * v[i] * v[i];
                if (u.vcol(i) >= 0) row[u.vcol(i)] += Q[i] / v[i] - B(i, i) * v[i];
            } else {
                if (u.ang_pos[j] >= 0) row[u.ang_pos[j]] += v[i] * v[j] * (G(i, j) * c + B(i, j) * s);
                if (u.vcol(j) >= 0) row[u.vcol(j)] += v[i] * (G(i, j) * s - B(i, j) * c);
            }
        }
    }

    Eigen::MatrixXd newton_jacobian(const ULayout& u, const Eigen::VectorXd& v,
                                    const Eigen::VectorXd& th) const {
        Eigen::MatrixXd J(u.size(), u.size());
        Eigen::RowVectorXd row;
        for (std::size_t k = 0; k < u.ang.size(); ++k) {
            p_row(u, v, th, u.ang[k], row);
            J.row(int(k)) = row;
        }
        for (std::size_t k = 0; k < u.mag.size(); ++k) {
            q_row(u, v, th, u.mag[k], row);
            J.row(int(u.ang.size() + k)) = row;
        }
        return J;
    }
};

}  // namespace

std::vector<BranchAdmittance> branch_admittances(const NetworkCase& net) {
    std::vector<BranchAdmittance> out;
    out.reserve(net.branches.size());
    for (const Branch& br : net.branches) {
        std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
        std::complex<double> half_b(0.0, br.b_charging / 2.0);
        double tau = br.tap_ratio;
        std::complex<double> shift = std::polar(1.0, br.phase_shift);
        BranchAdmittance a;
        a.yff = (ys + half_b) / (tau * tau);
        a.yft = -ys / (tau * std::conj(shift));
        a.ytf = -ys / (tau * shift);
        a.ytt = ys + half_b;
        out.push_back(a);
    }
    return out;
}

Eigen::MatrixXcd ybus(const NetworkCase& net) {
    const int n = net.n_buses();
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
    auto adm = branch_admittances(net);
    for (int e = 0; e < net.n_branches(); ++e) {
        const Branch& br = net.branches[e];
        Y(br.from_bus, br.from_bus) += adm[e].yff;
        Y(br.from_bus, br.to_bus) += adm[e].yft;
        Y(br.to_bus, br.from_bus) += adm[e].ytf;
        Y(br.to_bus, br.to_bus) += adm[e].ytt;
    }
    for (int i = 0; i < n; ++i) Y(i, i) += std::complex<double>(net.buses[i].gs, net.buses[i].bs);
    return Y;
}

void branch_flows(const NetworkCase& net, const Eigen::VectorXd& v, const Eigen::VectorXd& theta,
                  Eigen::VectorXd& p_fr, Eigen::VectorXd& q_fr,
                  Eigen::VectorXd& p_to, Eigen::VectorXd& q_to) {
    const int m = net.n_branches();
    p_fr.resize(m); q_fr.resize(m); p_to.resize(m); q_to.resize(m);
    auto adm = branch_admittances(net);
    for (int e = 0; e < m; ++e) {
        const Branch& br = net.branches[e];
        std::complex<double> vf = std::polar(v[br.from_bus], theta[br.from_bus]);
        std::complex<double> vt = std::polar(v[br.to_bus], theta[br.to_bus]);
        std::complex<double> sf = vf * std::conj(adm[e].yff * vf + adm[e].yft * vt);
        std::complex<double> st = vt * std::conj(adm[e].ytf * vf + adm[e].ytt * vt);
        p_fr[e] = sf.real(); q_fr[e] = sf.imag();
        p_to[e] = st.real(); q_to[e] = st.imag();
    }
}

Eigen::VectorXd mismatch(const NetworkCase& net,
                         const Eigen::VectorXd& v, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& pg, const Eigen::VectorXd& qg,
                         const Eigen::VectorXd& pd_extra, const Eigen::VectorXd& qd_extra) {
    const int n = net.n_buses();
    if (v.size() != n || theta.size() != n) throw DimensionMismatch("mismatch: v/theta size != bus count");
    if (pg.size() != net.n_generators() || qg.size() != net.n_generators())
        throw DimensionMismatch("mismatch: pg/qg size != generator count");
    if (pd_extra.size() != n || qd_extra.size() != n) throw DimensionMismatch("mismatch: injection size != bus count");

    Eigen::VectorXcd V(n);
    for (int i = 0; i < n; ++i) V[i] = std::polar(v[i], theta[i]);
    Eigen::VectorXcd S = V.cwiseProduct((ybus(net) * V).conjugate());

    Eigen::VectorXd r(2 * n);
    for (int i = 0; i < n; ++i) {
        r[i] = -net.pd(i) - pd_extra[i] - S[i].real();
        r[n + i] = -net.qd(i) - qd_extra[i] - S[i].imag();
    }
    for (int g = 0; g < net.n_generators(); ++g) {
        r[net.generators[g].bus] += pg[g];
        r[n + net.generators[g].bus] += qg[g];
    }
    return r;
}

Eigen::VectorXd mismatch(const NetworkCase& net,
                         const Eigen::VectorXd& v, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& pg, const Eigen::VectorXd& qg) {
    return mismatch(net, v, theta, pg, qg,
                    Eigen::VectorXd::Zero(net.n_buses()), Eigen::VectorXd::Zero(net.n_buses()));
}

PfControls default_controls(const NetworkCase& net) {
    PfControls c;
    c.pg.resize(net.n_generators());
    c.v_setpoint.resize(net.n_generators());
    for (int g = 0; g < net.n_generators(); ++g) {
        c.pg[g] = net.generators[g].pg_init;
        c.v_setpoint[g] = net.generators[g].v_setpoint;
    }
    return c;
}

OperatingPoint ac_power_flow(const NetworkCase& net, const PfControls& controls,
                             const Eigen::VectorXd& pd_extra, const Eigen::VectorXd& qd_extra,
                             const PfOptions& opts, const OperatingPoint* warm) {
    const int n = net.n_buses();
    const int ng = net.n_generators();
    if (controls.pg.size() != ng || controls.v_setpoint.size() != ng)
        throw DimensionMismatch("ac_power_flow: controls size != generator count");
    if (pd_extra.size() != n || qd_extra.size() != n)
        throw DimensionMismatch("ac_power_flow: injection size != bus count");

    ULayout u(net);
    Polar pol(net);
    const int slack_gen = net.slack_generator();

    Eigen::VectorXd v, th;
    if (warm) { v = warm->v; th = warm->theta; }
    else { v = Eigen::VectorXd::Ones(n); th = Eigen::VectorXd::Zero(n); }
    th[net.slack_bus] = 0.0;
    for (int g = 0; g < ng; ++g) v[net.generators[g].bus] = controls.v_setpoint[g];

    // target injections at the solved rows
    Eigen::VectorXd spec_p = -pd_extra, spec_q = -qd_extra;
    for (int i = 0; i < n; ++i) { spec_p[i] -= net.pd(i); spec_q[i] -= net.qd(i); }
    for (int g = 0; g < ng; ++g)
        if (g != slack_gen) spec_p[net.generators[g].bus] += controls.pg[g];

    OperatingPoint op;
    double nr_norm = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= opts.max_iter; ++it) {
        pol.evaluate(v, th);
        Eigen::VectorXd f(u.size());
        for (std::size_t k = 0; k < u.ang.size(); ++k) f[int(k)] = spec_p[u.ang[k]] - pol.P[u.ang[k]];
        for (std::size_t k = 0; k < u.mag.size(); ++k) f[int(u.ang.size() + k)] = spec_q[u.mag[k]] - pol.Q[u.mag[k]];
        nr_norm = u.size() == 0 ? 0.0 : f.cwiseAbs().maxCoeff();
        op.iterations = it;
        if (!std::isfinite(nr_norm)) { op.converged = false; break; }
        if (nr_norm <= opts.tol) { op.converged = true; break; }
        if (it == opts.max_iter) break;

        Eigen::MatrixXd J = pol.newton_jacobian(u, v, th);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible()) throw SingularJacobian("power flow Jacobian singular at iteration " + std::to_string(it));
        Eigen::VectorXd du = lu.solve(f);
        for (std::size_t k = 0; k < u.ang.size(); ++k) th[u.ang[k]] += du[int(k)];
        for (std::size_t k = 0; k < u.mag.size(); ++k) v[u.mag[k]] += du[int(u.ang.size() + k)];
    }

    op.v = v;
    op.theta = th;
    pol.evaluate(v, th);

    // slack generator absorbs the active residual; bus reactive output is
    // split equally among the generators attached to it
    op.pg = controls.pg;
    op.qg.setZero(ng);
    auto at_bus = net.gens_at_bus();
    if (slack_gen >= 0) {
        double other = 0.0;
        for (int g : at_bus[net.slack_bus])
            if (g != slack_gen) other += controls.pg[g];
        op.pg[slack_gen] = pol.P[net.slack_bus] + net.pd(net.slack_bus) + pd_extra[net.slack_bus] - other;
    }
    for (int i = 0; i < n; ++i) {
        const auto& gs = at_bus[i];
        if (gs.empty()) continue;
        double total = pol.Q[i] + net.qd(i) + qd_extra[i];
        for (int g : gs) op.qg[g] = total / double(gs.size());
    }
    branch_flows(net, v, th, op.p_fr, op.q_fr, op.p_to, op.q_to);
    op.mismatch_norm = mismatch(net, v, th, op.pg, op.qg, pd_extra, qd_extra).cwiseAbs().maxCoeff();
    if (op.converged && op.mismatch_norm > opts.tol) op.converged = op.mismatch_norm <= 10 * opts.tol;
    return op;
}

OperatingPoint ac_power_flow(const NetworkCase& net, const PfControls& controls, const PfOptions& opts) {
    return ac_power_flow(net, controls, Eigen::VectorXd::Zero(net.n_buses()),
                         Eigen::VectorXd::Zero(net.n_buses()), opts);
}

SensitivityBundle sensitivity_matrices(const NetworkCase& net, const OperatingPoint& op,
                                       const std::vector<int>& uncertain_buses,
                                       const Eigen::MatrixXd& policy_alpha) {
    const int n = net.n_buses();
    const int ng = net.n_generators();
    const int nbr = net.n_branches();
    const int N = int(uncertain_buses.size());
    if (policy_alpha.rows() != ng || (N > 0 && policy_alpha.cols() != N))
        throw DimensionMismatch("sensitivity_matrices: alpha must be n_generators x n_uncertain");
    if (!op.converged) throw NotConverged("sensitivity_matrices: operating point not converged");
    for (int b : uncertain_buses)
        if (b < 0 || b >= n) throw DimensionMismatch("sensitivity_matrices: uncertain bus index out of range");

    SensitivityBundle bundle;
    bundle.uncertain_buses = uncertain_buses;
    bundle.pq_buses = net.pq_buses();
    bundle.slack_gen = net.slack_generator();
    bundle.n_generators = ng;
    bundle.n_branches = nbr;
    for (int g = 0; g < ng; ++g)
        if (g != bundle.slack_gen) bundle.responding_gens.push_back(g);

    const int npq = int(bundle.pq_buses.size());
    const int nrg = int(bundle.responding_gens.size());

    bundle.dv_pq.setZero(npq, N);
    bundle.dqg.setZero(ng, N);
    bundle.dp_slack.setZero(N);
    bundle.df_from.setZero(nbr, N);
    bundle.df_to.setZero(nbr, N);
    bundle.g0_v.setZero(npq, N);
    bundle.g0_q.setZero(ng, N);
    bundle.g0_ff.setZero(nbr, N);
    bundle.g0_ft.setZero(nbr, N);
    bundle.g0_slack_total.setZero(N);
    bundle.coef_v.setZero(npq, nrg);
    bundle.coef_q.setZero(ng, nrg);
    bundle.coef_ff.setZero(nbr, nrg);
    bundle.coef_ft.setZero(nbr, nrg);
    bundle.coef_slack.setZero(nrg);
    if (N == 0) return bundle;

    ULayout u(net);
    Polar pol(net);
    pol.evaluate(op.v, op.theta);
    Eigen::MatrixXd J = pol.newton_jacobian(u, op.v, op.theta);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) throw SingularJacobian("sensitivity_matrices: Jacobian singular at the linearization point");

    // S0: network state response to a unit consumption increase at each
    // uncertain bus with no generator response; SG: response to a unit
    // injection increase at each responding generator's bus.
    Eigen::MatrixXd E0 = Eigen::MatrixXd::Zero(u.size(), N);
    for (int j = 0; j < N; ++j)
        if (u.ang_pos[uncertain_buses[j]] >= 0) E0(u.ang_pos[uncertain_buses[j]], j) = -1.0;
    Eigen::MatrixXd S0 = lu.solve(E0);

    Eigen::MatrixXd EG = Eigen::MatrixXd::Zero(u.size(), nrg);
    for (int k = 0; k < nrg; ++k) {
        int bus = net.generators[bundle.responding_gens[k]].bus;
        if (u.ang_pos[bus] >= 0) EG(u.ang_pos[bus], k) = 1.0;
    }
    Eigen::MatrixXd SG = lu.solve(EG);

    auto at_bus = net.gens_at_bus();

    // V at PQ buses: plain selector rows of the state response
    for (int r = 0; r < npq; ++r) {
        int col = u.vcol(bundle.pq_buses[r]);
        bundle.g0_v.row(r) = S0.row(col);
        bundle.coef_v.row(r) = SG.row(col);
    }

    // Q at generators: bus reactive injection, split equally at shared buses
    Eigen::RowVectorXd row;
    for (int i = 0; i < n; ++i) {
        const auto& gl = at_bus[i];
        if (gl.empty()) continue;
        pol.q_row(u, op.v, op.theta, i, row);
        Eigen::RowVectorXd q0 = row * S0;
        Eigen::RowVectorXd qc = row * SG;
        double share = 1.0 / double(gl.size());
        for (int g : gl) {
            bundle.g0_q.row(g) = share * q0;
            bundle.coef_q.row(g) = share * qc;
        }
    }

    // slack generator total active response (network part + direct terms)
    {
        pol.p_row(u, op.v, op.theta, net.slack_bus, row);
        bundle.g0_slack_total = row * S0;
        Eigen::RowVectorXd ct = row * SG;
        for (int j = 0; j < N; ++j)
            if (uncertain_buses[j] == net.slack_bus) bundle.g0_slack_total[j] += 1.0;
        for (int k = 0; k < nrg; ++k) {
            int g = bundle.responding_gens[k];
            // a responding generator at the slack bus trades 1:1 with the
            // slack generator and leaves the network state untouched
            bundle.coef_slack[k] = net.generators[g].bus == net.slack_bus ? -1.0 : ct[k];
        }
    }

    // squared apparent power at both branch ends, chain-ruled through p and q
    auto adm = branch_admittances(net);
    for (int e = 0; e < nbr; ++e) {
        const Branch& br = net.branches[e];
        for (int side = 0; side < 2; ++side) {
            int o = side == 0 ? br.from_bus : br.to_bus;
            int t = side == 0 ? br.to_bus : br.from_bus;
            std::complex<double> yown = side == 0 ? adm[e].yff : adm[e].ytt;
            std::complex<double> yx = side == 0 ? adm[e].yft : adm[e].ytf;
            double go = yown.real(), bo = yown.imag(), gx = yx.real(), bx = yx.imag();
            double vo = op.v[o], vt = op.v[t];
            double d = op.theta[o] - op.theta[t];
            double kc = gx * std::cos(d) + bx * std::sin(d);
            double ks = gx * std::sin(d) - bx * std::cos(d);
            double p = go * vo * vo + vo * vt * kc;
            double q = -bo * vo * vo + vo * vt * ks;
            // dF/du with F = p^2 + q^2
            Eigen::RowVectorXd fr = Eigen::RowVectorXd::Zero(u.size());
            auto add = [&](int col, double dp, double dq) {
                if (col >= 0) fr[col] += 2.0 * (p * dp + q * dq);
            };
            add(u.vcol(o), 2 * go * vo + vt * kc, -2 * bo * vo + vt * ks);
            add(u.vcol(t), vo * kc, vo * ks);
            add(u.ang_pos[o], -vo * vt * ks, vo * vt * kc);
            add(u.ang_pos[t], vo * vt * ks, -vo * vt * kc);
            if (side == 0) {
                bundle.g0_ff.row(e) = fr * S0;
                bundle.coef_ff.row(e) = fr * SG;
            } else {
                bundle.g0_ft.row(e) = fr * S0;
                bundle.coef_ft.row(e) = fr * SG;
            }
        }
    }

    // materialize the rows at the supplied alpha
    Eigen::MatrixXd alpha_resp(nrg, N);
    for (int k = 0; k < nrg; ++k) alpha_resp.row(k) = policy_alpha.row(bundle.responding_gens[k]);
    bundle.dv_pq = bundle.g0_v + bundle.coef_v * alpha_resp;
    bundle.dqg = bundle.g0_q + bundle.coef_q * alpha_resp;
    bundle.df_from = bundle.g0_ff + bundle.coef_ff * alpha_resp;
    bundle.df_to = bundle.g0_ft + bundle.coef_ft * alpha_resp;
    bundle.dp_slack = bundle.g0_slack_total + (bundle.coef_slack.transpose() * alpha_resp);
    if (bundle.slack_gen >= 0) bundle.dp_slack -= policy_alpha.row(bundle.slack_gen);
    return bundle;
}

}  // namespace cloudopf
