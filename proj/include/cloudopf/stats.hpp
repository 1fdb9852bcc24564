#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cloudopf {

// Inverse CDF of the standard normal. Newton iteration on 0.5*erfc(-x/sqrt(2))
// with a bracketing safeguard; accurate to ~1e-15 over (0,1).
// normal_quantile(0.5) returns exactly 0.
double normal_quantile(double p);

// Standard normal CDF, 0.5*erfc(-x/sqrt(2)).
double normal_cdf(double x);

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

double kahan_total(std::span<const double> xs);

// Least-squares fit y = a + b*x; returns {a, b, r_squared}.
struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r_squared = 0.0;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// Deterministic uniform/normal generator (splitmix-seeded xoshiro-free:
// mt19937_64 + explicit Box-Muller so output is identical across platforms).
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ull : seed) {}

    // uniform in (0,1), 53-bit resolution, never exactly 0 or 1
    double uniform01();
    double next();

private:
    std::uint64_t next_u64();
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cloudopf
