#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fdbreak/spectrum.hpp"

namespace fdbreak {

// S_0..S_n of the kernel CUSUM; S_k is the squared RKHS norm of
// sum_{i<=k} kappa(X_i,.) - (k/n) sum_i kappa(X_i,.).
struct CusumTrace {
    std::vector<double> values;

    int n() const noexcept { return static_cast<int>(values.size()) - 1; }
    bool flat() const noexcept;
};

// Computed from prefix and suffix block sums in O(n^2). The two sums are
// accumulated as mirror images of each other, so reversing the sample
// reverses the trace bit for bit.
CusumTrace cusum_trace(const Matrix& k);
CusumTrace cusum_trace(const GramMatrix& k);

// T_n = max_k S_k / n.
double test_statistic(const CusumTrace& trace);

// Smallest argmax of S_k over 1..n-1; 1 when the trace is identically zero.
int break_date(const CusumTrace& trace);

struct NullLawSample {
    std::vector<double> draws;  // ascending
    int bridge_grid = 0;
    int reps = 0;
    std::uint64_t seed = 0;
};

inline constexpr int kDefaultNullReps = 2000;
inline constexpr int kDefaultBridgeGrid = 1000;

// Draws of sup_tau sum_v theta_v B_v(tau)^2 on the grid {j / bridge_grid}.
// Replicate r uses its own engine seeded from (seed, r), so output does not
// depend on the thread count.
NullLawSample simulate_null(std::span<const double> theta, int reps, int bridge_grid, std::uint64_t seed);

// simulate_null for several eigenvalue lists at once, sharing the bridges.
// Element d equals simulate_null(thetas[d], reps, bridge_grid, seed) exactly.
std::vector<NullLawSample> simulate_null_batch(const std::vector<std::vector<double>>& thetas, int reps,
                                               int bridge_grid, std::uint64_t seed);

// (1 + #{draws >= t_n}) / (reps + 1).
double p_value(double t_n, const NullLawSample& null_sample);

// Order statistic c with: t_n > c exactly when p_value(t_n) <= alpha.
// +infinity when alpha is below 1 / (reps + 1).
double critical_value(const NullLawSample& null_sample, double alpha);

enum class RankSelect { Fve, Loocv, Manual };

struct DetectConfig {
    KernelSpec kernel = KernelSpec::grb_auto();
    double alpha = 0.05;
    double fve = kDefaultFve;
    RankSelect rank_select = RankSelect::Fve;
    int p_manual = 0;
    int p_max = 0;  // 0: min(n - 1, 30)
    int null_reps = kDefaultNullReps;
    int bridge_grid = kDefaultBridgeGrid;
    std::uint64_t seed = 0;
    double rank_tol = kDefaultRankTol;

    void validate() const;
};

struct McConfig {
    int reps = 0;
    int bridge_grid = 0;
    std::uint64_t seed = 0;
};

struct DetectionResult {
    CusumTrace trace;
    double t_n = 0.0;
    double critical_value = 0.0;
    double p_value = 1.0;
    int k_hat = 1;
    double tau_hat = 0.0;
    bool degenerate = false;
    double gamma_used = 0.0;
    Spectrum spectrum_used;
    McConfig mc_config;

    bool rejects(double alpha) const noexcept { return p_value <= alpha; }
};

// Everything in a detection run that precedes the null-law simulation.
struct DetectionStage {
    CusumTrace trace;
    double t_n = 0.0;
    int k_hat = 1;
    double gamma_used = 0.0;
    Spectrum spectrum;
    std::vector<double> theta;  // leading p eigenvalues
};

DetectionStage prepare_detection(const GramMatrix& k, const DetectConfig& config);
DetectionResult finish_detection(DetectionStage stage, const NullLawSample& null_sample, double alpha);

DetectionResult detect(const GramMatrix& k, const DetectConfig& config);
DetectionResult detect(const CurveSet& curves, const DetectConfig& config);

}  // namespace fdbreak
