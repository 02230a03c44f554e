#include "fdbreak/inference.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "fdbreak/detect.hpp"
#include "fdbreak/errors.hpp"
#include "fdbreak/parallel.hpp"
#include "fdbreak/random.hpp"

namespace fdbreak {

std::string to_string(IntervalMethod method) {
    return method == IntervalMethod::Asymptotic ? "asymptotic" : "bootstrap";
}

namespace {

void check_split(Eigen::Index n, int k_hat) {
    if (n < 2) throw DimensionError("need n >= 2");
    if (k_hat < 1 || k_hat > n - 1) throw ArgumentError("k_hat must lie in 1..n-1");
}

double block_mean(const Matrix& k, Eigen::Index r0, Eigen::Index rows, Eigen::Index c0, Eigen::Index cols) {
    return k.block(r0, c0, rows, cols).sum() / static_cast<double>(rows * cols);
}

}  // namespace

std::pair<RkhsCoeffVector, RkhsCoeffVector> split_mean_coeffs(int n, int k_hat) {
    check_split(n, k_hat);
    Vector mu1 = Vector::Zero(n);
    Vector mu2 = Vector::Zero(n);
    mu1.head(k_hat).setConstant(1.0 / k_hat);
    mu2.tail(n - k_hat).setConstant(1.0 / (n - k_hat));
    return {RkhsCoeffVector{std::move(mu1)}, RkhsCoeffVector{std::move(mu2)}};
}

double break_size_sq(const Matrix& k, int k_hat) {
    const Eigen::Index n = k.rows();
    check_split(n, k_hat);
    const Eigen::Index a = k_hat;
    const Eigen::Index b = n - k_hat;
    const double d = block_mean(k, a, b, a, b) + block_mean(k, 0, a, 0, a) - 2.0 * block_mean(k, 0, a, a, b);
    return std::max(0.0, d);
}

double break_size_sq(const GramMatrix& k, int k_hat) { return break_size_sq(k.entries, k_hat); }

double sigma_hat_sq(const Matrix& k, int k_hat) {
    const Eigen::Index n = k.rows();
    check_split(n, k_hat);
    const double delta_sq = break_size_sq(k, k_hat);
    if (!(delta_sq > 0.0)) throw DegenerateDataError("estimated break size is zero");
    const auto [mu1, mu2] = split_mean_coeffs(static_cast<int>(n), k_hat);
    // <kappa(X_i,.), delta> for every i, then remove the side mean.
    const Vector along = k * (mu2.coeffs - mu1.coeffs);
    const double mean1 = along.head(k_hat).mean();
    const double mean2 = along.tail(n - k_hat).mean();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = along[i] - (i < k_hat ? mean1 : mean2);
        sum += r * r;
    }
    return std::max(0.0, sum / static_cast<double>(n) / delta_sq);
}

double sigma_hat_sq(const GramMatrix& k, int k_hat) { return sigma_hat_sq(k.entries, k_hat); }

double lower_quantile(std::span<const double> sorted, double level) {
    if (sorted.empty()) throw ArgumentError("quantile of an empty sample");
    const auto size = static_cast<double>(sorted.size());
    auto index = static_cast<long long>(std::ceil(level * size - 1e-9));
    index = std::clamp(index, 1LL, static_cast<long long>(sorted.size()));
    return sorted[static_cast<std::size_t>(index - 1)];
}

namespace {

// Leftmost argmax over {-steps..steps}; the left and right halves of the
// path come from separate engines so that widening the range extends the
// same path.
long long path_argmax(double sigma, double tau, double step, long long left_steps, long long right_steps,
                      std::uint64_t seed, std::uint64_t rep) {
    const double scale = sigma * std::sqrt(step);
    double best = 0.0;
    long long best_index = 0;
    {
        Engine engine(derive_seed(seed, streams::lambda_paths, 2 * rep));
        boost::random::normal_distribution<double> normal;
        double w = 0.0;
        for (long long j = 1; j <= left_steps; ++j) {
            w += normal(engine);
            const double x = -static_cast<double>(j) * step;
            const double u = (1.0 - tau) * x + scale * w;
            if (u >= best) {
                best = u;
                best_index = -j;
            }
        }
    }
    {
        Engine engine(derive_seed(seed, streams::lambda_paths, 2 * rep + 1));
        boost::random::normal_distribution<double> normal;
        double w = 0.0;
        for (long long j = 1; j <= right_steps; ++j) {
            w += normal(engine);
            const double x = static_cast<double>(j) * step;
            const double u = -tau * x + scale * w;
            if (u > best) {
                best = u;
                best_index = j;
            }
        }
    }
    return best_index;
}

}  // namespace

LambdaSample simulate_lambda(double sigma_sq, double tau, const LambdaSimConfig& config) {
    if (!(sigma_sq >= 0.0) || !std::isfinite(sigma_sq)) throw ArgumentError("sigma^2 must be finite and >= 0");
    if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError("tau must lie in (0, 1)");
    if (config.reps < 1) throw ArgumentError("lambda simulation needs reps >= 1");
    if (config.x_step < 0.0 || config.x_range < 0.0) throw ArgumentError("x_step and x_range must be >= 0");

    const double step = config.x_step > 0.0 ? config.x_step : 0.01 * std::max(1.0, sigma_sq);
    // The left half has drift 1 - tau and the right half drift tau; each automatic half-range spans at least
    // 20 argmax scales sigma^2 / drift^2 of its side.
    const auto auto_range = [&](double drift) { return std::max(200.0 * step, 20.0 * sigma_sq / (drift * drift)); };
    double left_range = config.x_range > 0.0 ? config.x_range : auto_range(1.0 - tau);
    double right_range = config.x_range > 0.0 ? config.x_range : auto_range(tau);
    const double sigma = std::sqrt(sigma_sq);

    LambdaSample out;
    out.x_step = step;
    std::vector<long long> index(static_cast<std::size_t>(config.reps));
    for (int attempt = 0;; ++attempt) {
        const auto left = std::max<long long>(1, std::llround(left_range / step));
        const auto right = std::max<long long>(1, std::llround(right_range / step));
        parallel_for(config.reps, [&](std::ptrdiff_t r) {
            index[static_cast<std::size_t>(r)] =
                path_argmax(sigma, tau, step, left, right, config.seed, static_cast<std::uint64_t>(r));
        });
        const auto on_edge = std::count_if(index.begin(), index.end(),
                                           [left, right](long long j) { return j == right || j == -left; });
        out.boundary_fraction = static_cast<double>(on_edge) / static_cast<double>(config.reps);
        out.x_range = static_cast<double>(std::max(left, right)) * step;
        if (out.boundary_fraction < config.boundary_tolerance) break;
        if (attempt >= config.max_doublings) {
            throw SimulationError("argmax of the limiting process keeps hitting the simulation boundary (" +
                                  std::to_string(out.boundary_fraction) + " of paths at range " +
                                  std::to_string(out.x_range) + ")");
        }
        left_range *= 2.0;
        right_range *= 2.0;
    }
    out.draws.resize(index.size());
    std::transform(index.begin(), index.end(), out.draws.begin(),
                   [step](long long j) { return static_cast<double>(j) * step; });
    std::sort(out.draws.begin(), out.draws.end());
    return out;
}

BreakInterval asymptotic_ci(int n, int k_hat, double delta_norm_sq, double sigma_sq, double alpha,
                            const LambdaSimConfig& config) {
    check_split(n, k_hat);
    if (!(delta_norm_sq > 0.0)) throw DegenerateDataError("asymptotic interval needs a positive break size");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
    const double tau_hat = static_cast<double>(k_hat) / static_cast<double>(n);
    const auto lambda = simulate_lambda(sigma_sq, tau_hat, config);
    const double q_low = lower_quantile(lambda.draws, alpha / 2.0);
    const double q_high = lower_quantile(lambda.draws, 1.0 - alpha / 2.0);

    // delta^2 (k_hat - k*) ~ Lambda, so k* = k_hat - Lambda / delta^2.
    const double lower = static_cast<double>(k_hat) - q_high / delta_norm_sq;
    const double upper = static_cast<double>(k_hat) - q_low / delta_norm_sq;

    BreakInterval ci;
    ci.method = IntervalMethod::Asymptotic;
    ci.level = 1.0 - alpha;
    ci.lower = static_cast<int>(std::clamp(std::floor(lower), 1.0, static_cast<double>(n)));
    ci.upper = static_cast<int>(std::clamp(std::ceil(upper), 1.0, static_cast<double>(n)));
    ci.delta_norm_sq = delta_norm_sq;
    ci.sigma_sq = sigma_sq;
    return ci;
}

Matrix resampled_gram(const Matrix& k, int k_hat, std::span<const int> resample) {
    const Eigen::Index n = k.rows();
    check_split(n, k_hat);
    if (static_cast<Eigen::Index>(resample.size()) != n) throw DimensionError("resample must have n indices");
    for (int idx : resample) {
        if (idx < 0 || idx >= n) throw ArgumentError("resample index out of range");
    }
    const auto [mu1, mu2] = split_mean_coeffs(static_cast<int>(n), k_hat);
    const std::array<Vector, 2> u{k * mu1.coeffs, k * mu2.coeffs};
    std::array<std::array<double, 2>, 2> c{};
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) c[a][b] = (a == 0 ? mu1 : mu2).coeffs.dot(u[b]);
    }
    const auto side = [k_hat](Eigen::Index i) { return i < k_hat ? 0 : 1; };

    // With s_i = m_side(i) - m_side(pi(i)):
    //   K*_ij = K[pi_i, pi_j] + (K s_j)[pi_i] + (K s_i)[pi_j] + s_i' K s_j.
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index a = resample[i];
        const int to_i = side(i);
        const int from_i = side(a);
        for (Eigen::Index j = i; j < n; ++j) {
            const Eigen::Index d = resample[j];
            const int to_j = side(j);
            const int from_j = side(d);
            double v = k(a, d);
            if (to_j != from_j) v += u[to_j][a] - u[from_j][a];
            if (to_i != from_i) v += u[to_i][d] - u[from_i][d];
            if (to_i != from_i && to_j != from_j) {
                v += (c[to_i][to_j] - c[to_i][from_j]) - (c[from_i][to_j] - c[from_i][from_j]);
            }
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

int bootstrap_replicate(const Matrix& k, int k_hat, std::span<const int> resample) {
    return break_date(cusum_trace(resampled_gram(k, k_hat, resample)));
}

BootstrapResult bootstrap_dates(const Matrix& k, int k_hat, int reps, double alpha, std::uint64_t seed) {
    const Eigen::Index n = k.rows();
    check_split(n, k_hat);
    if (reps < 100) throw ArgumentError("bootstrap needs B >= 100");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");

    std::vector<int> dates(static_cast<std::size_t>(reps));
    parallel_for(reps, [&](std::ptrdiff_t b) {
        Engine engine(derive_seed(seed, streams::bootstrap, static_cast<std::uint64_t>(b)));
        boost::random::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
        std::vector<int> resample(static_cast<std::size_t>(n));
        for (auto& idx : resample) idx = pick(engine);
        dates[static_cast<std::size_t>(b)] = bootstrap_replicate(k, k_hat, resample);
    });
    std::sort(dates.begin(), dates.end());

    std::vector<double> sorted(dates.begin(), dates.end());
    BootstrapResult result;
    auto& ci = result.interval;
    ci.method = IntervalMethod::Bootstrap;
    ci.level = 1.0 - alpha;
    ci.lower = std::min(k_hat, static_cast<int>(lower_quantile(sorted, alpha / 2.0)));
    ci.upper = std::max(k_hat, static_cast<int>(lower_quantile(sorted, 1.0 - alpha / 2.0)));
    ci.delta_norm_sq = break_size_sq(k, k_hat);
    ci.bootstrap_reps = reps;
    result.k_star = std::move(dates);
    return result;
}

BreakInterval bootstrap_ci(const Matrix& k, int k_hat, int reps, double alpha, std::uint64_t seed) {
    return bootstrap_dates(k, k_hat, reps, alpha, seed).interval;
}

BreakInterval bootstrap_ci(const GramMatrix& k, int k_hat, int reps, double alpha, std::uint64_t seed) {
    return bootstrap_ci(k.entries, k_hat, reps, alpha, seed);
}

}  // namespace fdbreak
