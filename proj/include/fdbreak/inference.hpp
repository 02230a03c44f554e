#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fdbreak/kernels.hpp"

namespace fdbreak {

// Coefficients c of sum_i c_i kappa(X_i, .); <c, c'> = c' K c'.
struct RkhsCoeffVector {
    Vector coeffs;

    double inner(const RkhsCoeffVector& other, const Matrix& k) const { return coeffs.dot(k * other.coeffs); }
    double norm_sq(const Matrix& k) const { return inner(*this, k); }
};

enum class IntervalMethod { Asymptotic, Bootstrap };
std::string to_string(IntervalMethod method);

struct BreakInterval {
    int lower = 1;
    int upper = 1;
    IntervalMethod method = IntervalMethod::Bootstrap;
    double level = 0.95;
    double delta_norm_sq = 0.0;
    std::optional<double> sigma_sq;
    std::optional<int> bootstrap_reps;

    bool covers(int k) const noexcept { return lower <= k && k <= upper; }
    int length() const noexcept { return upper - lower; }
};

// Sample-mean coefficients of the two sides of k_hat (1-based: mu1 covers 1..k_hat).
std::pair<RkhsCoeffVector, RkhsCoeffVector> split_mean_coeffs(int n, int k_hat);

// ||mu2 - mu1||^2 from the three block means of K, clipped at 0.
double break_size_sq(const Matrix& k, int k_hat);
double break_size_sq(const GramMatrix& k, int k_hat);

// Pooled two-group variance of the residual embeddings along the break direction,
// normalized by ||delta||^2.
double sigma_hat_sq(const Matrix& k, int k_hat);
double sigma_hat_sq(const GramMatrix& k, int k_hat);

// Monte Carlo law of the leftmost argmax of
//   U(x) = -tau x + sigma W(x)  (x >= 0),   (1 - tau) x + sigma W(x)  (x < 0)
// on the grid {-L, ..., -h, 0, h, ..., L}.
struct LambdaSimConfig {
    int reps = 2000;
    double x_range = 0.0;  // 0: automatic
    double x_step = 0.0;   // 0: 0.01 * max(1, sigma^2)
    std::uint64_t seed = 0;
    int max_doublings = 3;
    double boundary_tolerance = 0.005;
};

struct LambdaSample {
    std::vector<double> draws;  // ascending
    double x_range = 0.0;  // larger of the two half-ranges actually simulated
    double x_step = 0.0;
    double boundary_fraction = 0.0;
};

LambdaSample simulate_lambda(double sigma_sq, double tau, const LambdaSimConfig& config);

// Lower empirical order statistic at 1-based index ceil(level * size).
double lower_quantile(std::span<const double> sorted, double level);

BreakInterval asymptotic_ci(int n, int k_hat, double delta_norm_sq, double sigma_sq, double alpha,
                            const LambdaSimConfig& config);

// Gram matrix of one residual-bootstrap sample: row i of R is
//   e_{pi(i)} - m_{side(pi(i))} + m_{side(i)},  K* = R K R'.
// `resample` holds 0-based indices.
Matrix resampled_gram(const Matrix& k, int k_hat, std::span<const int> resample);

// Break date of the bootstrap sample given by `resample`.
int bootstrap_replicate(const Matrix& k, int k_hat, std::span<const int> resample);

struct BootstrapResult {
    BreakInterval interval;
    std::vector<int> k_star;  // ascending
};

BootstrapResult bootstrap_dates(const Matrix& k, int k_hat, int reps, double alpha, std::uint64_t seed);

// Percentile interval of the bootstrap dates, widened if needed so it contains k_hat.
BreakInterval bootstrap_ci(const Matrix& k, int k_hat, int reps, double alpha, std::uint64_t seed);
BreakInterval bootstrap_ci(const GramMatrix& k, int k_hat, int reps, double alpha, std::uint64_t seed);

}  // namespace fdbreak
