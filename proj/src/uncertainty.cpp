#include "cloudopf/uncertainty.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "cloudopf/csv.hpp"
#include "cloudopf/stats.hpp"

namespace cloudopf {

void validate_cloud(const ScenarioCloud& cloud) {
    const int n = cloud.n_sources();
    if (cloud.mean.size() != n || cloud.sigma.size() != n)
        throw DimensionMismatch("cloud: mean/sigma size mismatch");
    if (cloud.cov.rows() != n || cloud.cov.cols() != n)
        throw DimensionMismatch("cloud: covariance must be N x N");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(cloud.cov(i, j) - cloud.cov(j, i)) > 1e-12)
                throw NotPSD("cloud covariance not symmetric");
    for (int i = 0; i < n; ++i)
        if (std::abs(cloud.cov(i, i) - cloud.sigma[i] * cloud.sigma[i]) > 1e-12)
            throw ValidationError("cloud: diag(cov) != sigma^2");
    if (cloud.has_samples()) {
        if (cloud.samples.cols() != n) throw DimensionMismatch("cloud: samples column count");
        const double m = double(cloud.samples.rows());
        Eigen::RowVectorXd mean = cloud.samples.colwise().sum() / m;
        if ((mean.transpose() - cloud.mean).cwiseAbs().maxCoeff() > 1e-12)
            throw ValidationError("cloud: mean != population mean of samples");
        Eigen::MatrixXd centered = cloud.samples.rowwise() - mean;
        Eigen::MatrixXd cov = centered.transpose() * centered / m;
        if ((cov - cloud.cov).cwiseAbs().maxCoeff() > 1e-12)
            throw ValidationError("cloud: cov != population covariance of samples");
    }
}

ScenarioCloud cloud_from_samples(const Eigen::MatrixXd& samples, const std::vector<int>& uncertain_buses) {
    if (samples.rows() < 2) throw TooFewSamples("cloud_from_samples: need at least 2 samples");
    if (samples.cols() != int(uncertain_buses.size()))
        throw DimensionMismatch("cloud_from_samples: column count != uncertain bus count");
    ScenarioCloud c;
    c.uncertain_buses = uncertain_buses;
    const double m = double(samples.rows());
    Eigen::RowVectorXd mean = samples.colwise().sum() / m;
    Eigen::MatrixXd centered = samples.rowwise() - mean;
    c.mean = mean.transpose();
    c.cov = centered.transpose() * centered / m;
    c.sigma = c.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    for (int i = 0; i < c.n_sources(); ++i) c.cov(i, i) = c.sigma[i] * c.sigma[i];
    c.samples = samples;
    return c;
}

ScenarioCloud gaussian_cloud(const NetworkCase& net, const std::vector<int>& uncertain_buses, double sigma_ratio) {
    if (sigma_ratio < 0) throw InvalidFactor("gaussian_cloud: sigma_ratio must be >= 0");
    ScenarioCloud c;
    c.uncertain_buses = uncertain_buses;
    const int n = int(uncertain_buses.size());
    c.mean.resize(n);
    c.sigma.resize(n);
    for (int j = 0; j < n; ++j) {
        int b = uncertain_buses[j];
        if (b < 0 || b >= net.n_buses()) throw DimensionMismatch("gaussian_cloud: bus index out of range");
        double pd = net.pd(b);
        if (pd == 0.0) throw ZeroDemandBus("gaussian_cloud: bus " + std::to_string(net.buses[b].id) +
                                           " carries no active demand");
        c.mean[j] = pd;
        c.sigma[j] = sigma_ratio * pd;
    }
    c.cov = c.sigma.cwiseProduct(c.sigma).asDiagonal();
    return c;
}

std::vector<int> default_uncertain_buses(const NetworkCase& net) {
    std::vector<int> out;
    for (int i = 0; i < net.n_buses(); ++i)
        if (net.pd(i) > 0.0) out.push_back(i);
    return out;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols()) throw DimensionMismatch("psd_sqrt: matrix not square");
    if (cov.size() == 0) return cov;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NotPSD("psd_sqrt: eigendecomposition failed");
    Eigen::VectorXd ev = eig.eigenvalues();
    double vmax = std::max(ev.cwiseAbs().maxCoeff(), 1.0);
    if (ev.minCoeff() < -1e-10 * vmax) throw NotPSD("psd_sqrt: covariance has negative eigenvalue");
    Eigen::VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd sample_cloud(const ScenarioCloud& cloud, int count, std::uint64_t seed) {
    const int n = cloud.n_sources();
    Eigen::MatrixXd root = psd_sqrt(cloud.cov);
    Eigen::MatrixXd out(count, n);
    NormalSampler rng(seed);
    Eigen::VectorXd z(n);
    for (int a = 0; a < count; ++a) {
        for (int j = 0; j < n; ++j) z[j] = rng.next();
        out.row(a) = (root * z).transpose();
    }
    return out;
}

const char* to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::FixedAlpha: return "a";
        case PolicyKind::AlphaVector: return "b";
        case PolicyKind::AlphaMatrix: return "c";
    }
    return "?";
}

ResponsePolicy ResponsePolicy::fixed(const Eigen::VectorXd& alpha_vec, int n_sources) {
    ResponsePolicy p;
    p.kind = PolicyKind::FixedAlpha;
    p.alpha = alpha_vec * Eigen::RowVectorXd::Ones(n_sources);
    return p;
}

ResponsePolicy ResponsePolicy::vector(const Eigen::VectorXd& alpha_vec, int n_sources) {
    ResponsePolicy p = fixed(alpha_vec, n_sources);
    p.kind = PolicyKind::AlphaVector;
    return p;
}

ResponsePolicy ResponsePolicy::matrix(const Eigen::MatrixXd& alpha_mat) {
    ResponsePolicy p;
    p.kind = PolicyKind::AlphaMatrix;
    p.alpha = alpha_mat;
    return p;
}

ResponsePolicy ResponsePolicy::equal_shares(PolicyKind kind, int n_generators, int n_sources) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Constant(n_generators, n_sources, 1.0 / double(n_generators));
    ResponsePolicy p;
    p.kind = kind;
    p.alpha = a;
    return p;
}

void validate_policy(const ResponsePolicy& policy, double tol) {
    const Eigen::MatrixXd& a = policy.alpha;
    if (a.rows() == 0) throw PolicyInvariantViolated("policy has no generators");
    for (int j = 0; j < a.cols(); ++j) {
        double s = a.col(j).sum();
        if (std::abs(s - 1.0) > tol)
            throw PolicyInvariantViolated("policy column " + std::to_string(j) + " sums to " + std::to_string(s));
    }
    if (policy.kind != PolicyKind::AlphaMatrix) {
        for (int j = 1; j < a.cols(); ++j)
            if ((a.col(j) - a.col(0)).cwiseAbs().maxCoeff() > 0.0)
                throw PolicyInvariantViolated("vector policy has non-identical columns");
    }
}

Eigen::VectorXd apply_response(const ResponsePolicy& policy, const Eigen::VectorXd& base_pg,
                               const Eigen::VectorXd& w) {
    if (policy.alpha.rows() != base_pg.size()) throw DimensionMismatch("apply_response: alpha rows != generators");
    if (policy.alpha.cols() != w.size()) throw DimensionMismatch("apply_response: alpha cols != w size");
    validate_policy(policy);
    return base_pg + policy.alpha * w;
}

void write_samples_csv(std::ostream& out, const NetworkCase& net, const ScenarioCloud& cloud) {
    std::vector<std::string> header;
    for (int b : cloud.uncertain_buses) header.push_back("bus_" + std::to_string(net.buses[b].id));
    csv_write_row(out, header);
    for (int a = 0; a < cloud.samples.rows(); ++a) {
        std::vector<std::string> row;
        for (int j = 0; j < cloud.n_sources(); ++j) row.push_back(csv_number(cloud.samples(a, j)));
        csv_write_row(out, row);
    }
}

ScenarioCloud read_samples_csv(std::istream& in, const NetworkCase& net) {
    auto rows = csv_read(in);
    if (rows.size() < 3) throw TooFewSamples("samples CSV needs a header and at least 2 rows");
    std::vector<int> buses;
    for (const auto& h : rows[0]) {
        if (h.rfind("bus_", 0) != 0) throw ParseError("samples CSV header must be bus_<id> columns");
        int idx = net.bus_index(std::stoi(h.substr(4)));
        if (idx < 0) throw ValidationError("samples CSV references unknown bus " + h);
        buses.push_back(idx);
    }
    Eigen::MatrixXd samples(int(rows.size() - 1), int(buses.size()));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != buses.size()) throw ParseError("samples CSV row width mismatch");
        for (std::size_t cidx = 0; cidx < buses.size(); ++cidx)
            samples(int(r - 1), int(cidx)) = std::stod(rows[r][cidx]);
    }
    return cloud_from_samples(samples, buses);
}

}  // namespace cloudopf
