#include "fdbreak/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/random/normal_distribution.hpp>

#include "fdbreak/errors.hpp"
#include "fdbreak/parallel.hpp"
#include "fdbreak/random.hpp"

namespace fdbreak {

bool CusumTrace::flat() const noexcept {
    return std::all_of(values.begin(), values.end(), [](double s) { return s == 0.0; });
}

CusumTrace cusum_trace(const Matrix& k) {
    const Eigen::Index n = k.rows();
    if (n < 2 || k.cols() != n) throw DimensionError("cusum_trace: square Gram matrix with n >= 2 required");

    // prefix[m] = sum over the leading m x m block, suffix[m] = sum over the
    // trailing (n - m) x (n - m) block. Inner sums run outward from the
    // diagonal in both cases.
    std::vector<double> prefix(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<double> suffix(static_cast<std::size_t>(n + 1), 0.0);
    for (Eigen::Index m = 1; m <= n; ++m) {
        const Eigen::Index row = m - 1;
        double inner = 0.0;
        for (Eigen::Index j = 0; j < row; ++j) inner += k(row, j);
        prefix[m] = prefix[m - 1] + (2.0 * inner + k(row, row));
    }
    for (Eigen::Index m = n - 1; m >= 0; --m) {
        const Eigen::Index row = m;
        double inner = 0.0;
        for (Eigen::Index j = n - 1; j > row; --j) inner += k(row, j);
        suffix[m] = suffix[m + 1] + (2.0 * inner + k(row, row));
    }
    const double total = 0.5 * (prefix[n] + suffix[0]);

    CusumTrace trace;
    trace.values.assign(static_cast<std::size_t>(n + 1), 0.0);
    const auto nn = static_cast<double>(n * n);
    for (Eigen::Index m = 1; m < n; ++m) {
        const double lead = static_cast<double>((n - m) * (n - m)) / nn;
        const double tail = static_cast<double>(m * m) / nn;
        const double cross_w = -2.0 * static_cast<double>(m * (n - m)) / nn;
        const double cross = 0.5 * (total - (prefix[m] + suffix[m]));
        const double s = cross_w * cross + (lead * prefix[m] + tail * suffix[m]);
        trace.values[m] = s > 0.0 ? s : 0.0;
    }
    return trace;
}

CusumTrace cusum_trace(const GramMatrix& k) { return cusum_trace(k.entries); }

double test_statistic(const CusumTrace& trace) {
    if (trace.n() < 1) throw DimensionError("empty CUSUM trace");
    return *std::max_element(trace.values.begin(), trace.values.end()) / static_cast<double>(trace.n());
}

int break_date(const CusumTrace& trace) {
    const int n = trace.n();
    if (n < 2) throw DimensionError("break_date needs n >= 2");
    int best = 1;
    for (int k = 2; k <= n - 1; ++k) {
        if (trace.values[k] > trace.values[best]) best = k;
    }
    return best;
}

namespace {

// The grid maximum undershoots the continuous supremum by a term proportional to sqrt(step). Comparing the
// full grid with its even-index subgrid (step doubled) cancels that term.
const double kSupExtrapolation = 1.0 / (std::numbers::sqrt2 - 1.0);

void check_null_args(int reps, int bridge_grid) {
    if (reps < 100) throw ArgumentError("null-law simulation needs reps >= 100");
    if (bridge_grid < 100 || bridge_grid % 2 != 0) {
        throw ArgumentError("null-law simulation needs an even bridge_grid >= 100");
    }
}

void check_theta(std::span<const double> theta) {
    if (theta.empty()) throw ArgumentError("null-law simulation needs at least one eigenvalue");
    for (double t : theta) {
        if (!(t > 0.0) || !std::isfinite(t)) throw ArgumentError("null-law eigenvalues must be positive and finite");
    }
}

}  // namespace

std::vector<NullLawSample> simulate_null_batch(const std::vector<std::vector<double>>& thetas, int reps,
                                               int bridge_grid, std::uint64_t seed) {
    check_null_args(reps, bridge_grid);
    std::size_t p_max = 0;
    for (const auto& theta : thetas) {
        check_theta(theta);
        p_max = std::max(p_max, theta.size());
    }
    const std::size_t sets = thetas.size();
    const auto grid = static_cast<std::size_t>(bridge_grid);
    const double step_scale = 1.0 / std::sqrt(static_cast<double>(bridge_grid));

    std::vector<std::vector<double>> draws(sets, std::vector<double>(static_cast<std::size_t>(reps)));
    parallel_for(reps, [&](std::ptrdiff_t r) {
        Engine engine(derive_seed(seed, streams::null_law, static_cast<std::uint64_t>(r)));
        boost::random::normal_distribution<double> normal;
        std::vector<double> walk(grid + 1, 0.0);
        std::vector<double> sq(grid + 1, 0.0);
        std::vector<double> acc(sets * (grid + 1), 0.0);
        for (std::size_t v = 0; v < p_max; ++v) {
            double w = 0.0;
            for (std::size_t j = 1; j <= grid; ++j) {
                w += normal(engine);
                walk[j] = w;
            }
            const double end = walk[grid];
            for (std::size_t j = 0; j <= grid; ++j) {
                const double tau = static_cast<double>(j) / static_cast<double>(grid);
                const double bridge = (walk[j] - tau * end) * step_scale;
                sq[j] = bridge * bridge;
            }
            for (std::size_t d = 0; d < sets; ++d) {
                if (v >= thetas[d].size()) continue;
                const double weight = thetas[d][v];
                double* a = acc.data() + d * (grid + 1);
                for (std::size_t j = 0; j <= grid; ++j) a[j] += weight * sq[j];
            }
        }
        for (std::size_t d = 0; d < sets; ++d) {
            const double* a = acc.data() + d * (grid + 1);
            double fine = 0.0;
            double coarse = 0.0;
            for (std::size_t j = 0; j <= grid; ++j) {
                fine = std::max(fine, a[j]);
                if (j % 2 == 0) coarse = std::max(coarse, a[j]);
            }
            draws[d][static_cast<std::size_t>(r)] = fine + kSupExtrapolation * (fine - coarse);
        }
    });

    std::vector<NullLawSample> out(sets);
    for (std::size_t d = 0; d < sets; ++d) {
        std::sort(draws[d].begin(), draws[d].end());
        out[d] = NullLawSample{std::move(draws[d]), bridge_grid, reps, seed};
    }
    return out;
}

NullLawSample simulate_null(std::span<const double> theta, int reps, int bridge_grid, std::uint64_t seed) {
    return std::move(simulate_null_batch({std::vector<double>(theta.begin(), theta.end())}, reps, bridge_grid, seed)
                         .front());
}

double p_value(double t_n, const NullLawSample& null_sample) {
    const auto& d = null_sample.draws;
    const auto at_least = static_cast<double>(d.end() - std::lower_bound(d.begin(), d.end(), t_n));
    return (1.0 + at_least) / (static_cast<double>(d.size()) + 1.0);
}

double critical_value(const NullLawSample& null_sample, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
    const auto& d = null_sample.draws;
    const auto reps = static_cast<long long>(d.size());
    if (reps == 0) throw ArgumentError("empty null-law sample");
    // Largest count M of draws >= t_n that still gives p_value <= alpha,
    // evaluated with the same floating-point expression as p_value.
    const auto p_of = [reps](long long count) {
        return (1.0 + static_cast<double>(count)) / (static_cast<double>(reps) + 1.0);
    };
    long long m = static_cast<long long>(std::floor(alpha * static_cast<double>(reps + 1))) - 1;
    m = std::clamp(m, -1LL, reps - 1);
    while (m + 1 <= reps - 1 && p_of(m + 1) <= alpha) ++m;
    while (m >= 0 && p_of(m) > alpha) --m;
    if (m < 0) return std::numeric_limits<double>::infinity();
    return d[static_cast<std::size_t>(reps - 1 - m)];
}

void DetectConfig::validate() const {
    kernel.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
    if (!(fve > 0.0 && fve < 1.0)) throw ArgumentError("fve must lie in (0, 1)");
    if (rank_select == RankSelect::Manual && p_manual < 1) throw ArgumentError("manual p must be >= 1");
    if (p_max < 0) throw ArgumentError("p_max must be non-negative");
    check_null_args(null_reps, bridge_grid);
}

DetectionStage prepare_detection(const GramMatrix& k, const DetectConfig& config) {
    config.validate();
    DetectionStage stage;
    stage.trace = cusum_trace(k);
    stage.t_n = test_statistic(stage.trace);
    stage.k_hat = break_date(stage.trace);
    stage.gamma_used = k.gamma_used;

    SpectrumOptions options;
    options.rank_tol = config.rank_tol;
    options.with_vectors = false;
    options.fve = config.fve;
    stage.spectrum = eigen_spectrum(k, options);

    const auto retained = static_cast<int>(stage.spectrum.retained());
    int p = stage.spectrum.p_selected;
    switch (config.rank_select) {
        case RankSelect::Fve: break;
        case RankSelect::Manual: p = config.p_manual; break;
        case RankSelect::Loocv: {
            const auto n = static_cast<int>(k.size());
            const int p_max = config.p_max > 0 ? std::min(config.p_max, n - 1) : std::min(n - 1, 30);
            p = select_p_loocv(k, p_max, config.rank_tol);
            break;
        }
    }
    p = std::clamp(p, 1, retained);
    stage.spectrum.p_selected = p;
    stage.theta.assign(stage.spectrum.eigenvalues.data(), stage.spectrum.eigenvalues.data() + p);
    return stage;
}

DetectionResult finish_detection(DetectionStage stage, const NullLawSample& null_sample, double alpha) {
    DetectionResult r;
    r.t_n = stage.t_n;
    r.k_hat = stage.k_hat;
    r.tau_hat = static_cast<double>(stage.k_hat) / static_cast<double>(stage.trace.n());
    r.degenerate = stage.trace.flat();
    r.gamma_used = stage.gamma_used;
    r.p_value = p_value(stage.t_n, null_sample);
    r.critical_value = critical_value(null_sample, alpha);
    r.trace = std::move(stage.trace);
    r.spectrum_used = std::move(stage.spectrum);
    r.mc_config = McConfig{null_sample.reps, null_sample.bridge_grid, null_sample.seed};
    return r;
}

DetectionResult detect(const GramMatrix& k, const DetectConfig& config) {
    auto stage = prepare_detection(k, config);
    const auto null_sample = simulate_null(stage.theta, config.null_reps, config.bridge_grid, config.seed);
    return finish_detection(std::move(stage), null_sample, config.alpha);
}

DetectionResult detect(const CurveSet& curves, const DetectConfig& config) {
    config.validate();
    return detect(gram(curves, config.kernel), config);
}

}  // namespace fdbreak
