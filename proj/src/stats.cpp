#include "cloudopf/stats.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cloudopf {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p outside (0,1)");
    if (p == 0.5) return 0.0;

    // crude start from the logistic-like tail bound, then safeguarded Newton
    double pl = p < 0.5 ? p : 1.0 - p;
    double x = std::sqrt(-2.0 * std::log(pl));
    x = p < 0.5 ? -x : x;

    double lo = -std::sqrt(-2.0 * std::log(std::numeric_limits<double>::min()));
    double hi = -lo;
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (int it = 0; it < 200; ++it) {
        double f = normal_cdf(x) - p;
        if (f > 0.0) hi = x; else if (f < 0.0) lo = x; else break;
        double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        double step = f / pdf;
        double xn = x - step;
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);  // bisection fallback
        if (xn == x) break;
        x = xn;
        if (std::abs(step) < 1e-17 * (1.0 + std::abs(x))) break;
    }
    return x;
}

double kahan_total(std::span<const double> xs) {
    KahanSum acc;
    for (double v : xs) acc.add(v);
    return acc.value();
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("fit_line: need matching n >= 2");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= double(n); my /= double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx; sxy += dx * dy; syy += dy * dy;
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

std::uint64_t NormalSampler::next_u64() {
    // splitmix64; fixed algorithm so sequences are bit-identical everywhere
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double NormalSampler::uniform01() {
    return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double NormalSampler::next() {
    if (has_spare_) { has_spare_ = false; return spare_; }
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

}  // namespace cloudopf
