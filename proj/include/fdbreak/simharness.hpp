#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdbreak/detect.hpp"
#include "fdbreak/funcdata.hpp"
#include "fdbreak/inference.hpp"

namespace fdbreak {

enum class Setting { MeanShift = 1, CovarianceScale = 2, ScoreMixture = 3 };

Setting parse_setting(int number);

// One simulated sample: X_i = m_i + sum_j sqrt(lambda_ij) zeta_ij phi_j on a
// uniform grid, with the regime switching after k* = floor(n tau*).
struct DgpConfig {
    Setting setting = Setting::MeanShift;
    int n = 100;
    double tau_star = 0.0;  // 0: no break
    // Setting 1: SNR, setting 2: variance factor c, setting 3: Gaussian weight pi.
    double param = 0.0;
    int grid_size = 50;
    int n_basis = 21;
    std::uint64_t seed = 0;
    // Setting 1 only: read SNR as a^2 tau(1-tau) / sum(lambda) instead of a tau(1-tau) / sum(lambda).
    bool snr_squared = false;

    int k_star() const;
    void validate() const;
};

// Rows: 1, sqrt2 sin(2 pi j t), sqrt2 cos(2 pi j t) for j = 1..(n_basis-1)/2.
RowMatrix fourier_basis(int grid_size, int n_basis);

// Score variances lambda_j = 1/j, j = 1..n_basis.
std::vector<double> harmonic_lambdas(int n_basis);

double snr_to_a(double snr, double tau_star, std::span<const double> lambdas, bool squared = false);

// Scale making pi N(0,1) + (1-pi) t_3 unit-variance: sqrt(3 - 2 pi).
double mixture_scale(double pi);

CurveSet generate(const DgpConfig& config);

struct ExperimentSpec {
    std::vector<DgpConfig> cells;  // per-cell seeds are ignored; replicate seeds derive from `seed`
    std::vector<KernelSpec> kernels{KernelSpec::grb_auto()};
    int reps = 200;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    bool detect = true;
    bool coverage = false;
    int bootstrap_reps = 500;
    double ci_alpha = 0.05;
    int null_reps = kDefaultNullReps;
    int bridge_grid = kDefaultBridgeGrid;
    double fve = kDefaultFve;
    // Every replicate of a cell calibrates against the same null-law draws.
    bool shared_null = true;
    bool timing = false;

    void validate() const;
};

struct ReplicateRecord {
    int cell = 0;
    std::size_t summary = 0;  // index into ExperimentReport::cells
    int rep = 0;
    std::string kernel;
    std::uint64_t data_seed = 0;
    int k_hat = 0;
    std::optional<double> t_n;
    std::optional<double> p_value;
    std::optional<bool> reject;
    std::optional<int> p_selected;
    double gamma_used = 0.0;
    std::optional<int> ci_lower;
    std::optional<int> ci_upper;
    std::optional<bool> covered;
};

struct CellSummary {
    DgpConfig config;
    std::string kernel;
    int reps = 0;
    std::optional<double> rejection_rate;
    double mean_k_hat = 0.0;
    double median_abs_date_error = 0.0;
    std::optional<double> coverage;
    std::optional<double> mean_ci_length;
    std::optional<double> median_ci_length;
    std::optional<double> runtime_seconds;
};

struct ExperimentReport {
    std::vector<CellSummary> cells;
    std::vector<ReplicateRecord> replicates;
};

ExperimentReport run_experiment(const ExperimentSpec& spec);

nlohmann::json to_json(const DgpConfig& config);
nlohmann::json to_json(const ExperimentReport& report);

// One row per (cell, kernel, replicate).
void write_tidy_csv(std::ostream& out, const ExperimentReport& report);

}  // namespace fdbreak
