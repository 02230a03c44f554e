#include "fdbreak/simharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "fdbreak/errors.hpp"
#include "fdbreak/parallel.hpp"
#include "fdbreak/random.hpp"

namespace fdbreak {

Setting parse_setting(int number) {
    if (number < 1 || number > 3) throw ArgumentError("setting must be 1, 2 or 3");
    return static_cast<Setting>(number);
}

int DgpConfig::k_star() const {
    return static_cast<int>(std::floor(static_cast<double>(n) * tau_star));
}

void DgpConfig::validate() const {
    if (n < 2) throw ArgumentError("n must be >= 2");
    if (!(tau_star >= 0.0 && tau_star < 1.0)) throw ArgumentError("tau_star must lie in [0, 1)");
    if (grid_size < 2) throw ArgumentError("grid_size must be >= 2");
    if (n_basis < 1 || n_basis % 2 == 0) throw ArgumentError("n_basis must be odd");
    if (!std::isfinite(param)) throw ArgumentError("param must be finite");
    switch (setting) {
        case Setting::MeanShift:
            if (param < 0.0) throw ArgumentError("setting 1 needs SNR >= 0");
            break;
        case Setting::CovarianceScale:
            if (param < 1.0) throw ArgumentError("setting 2 needs c >= 1");
            break;
        case Setting::ScoreMixture:
            if (param < 0.0 || param > 1.0) throw ArgumentError("setting 3 needs pi in [0, 1]");
            break;
    }
}

RowMatrix fourier_basis(int grid_size, int n_basis) {
    if (n_basis < 1 || n_basis % 2 == 0) throw ArgumentError("n_basis must be odd (constant plus sine/cosine pairs)");
    if (grid_size < 2) throw ArgumentError("grid_size must be >= 2");
    const Grid grid = Grid::uniform(static_cast<std::size_t>(grid_size));
    const auto t = grid.points();
    RowMatrix basis(n_basis, grid_size);
    basis.row(0).setOnes();
    for (int j = 1; 2 * j <= n_basis - 1; ++j) {
        for (int k = 0; k < grid_size; ++k) {
            const double arg = 2.0 * std::numbers::pi * j * t[static_cast<std::size_t>(k)];
            basis(2 * j - 1, k) = std::numbers::sqrt2 * std::sin(arg);
            basis(2 * j, k) = std::numbers::sqrt2 * std::cos(arg);
        }
    }
    return basis;
}

std::vector<double> harmonic_lambdas(int n_basis) {
    std::vector<double> lambdas(static_cast<std::size_t>(n_basis));
    for (int j = 0; j < n_basis; ++j) lambdas[static_cast<std::size_t>(j)] = 1.0 / (j + 1);
    return lambdas;
}

double snr_to_a(double snr, double tau_star, std::span<const double> lambdas, bool squared) {
    if (!(snr >= 0.0)) throw ArgumentError("SNR must be >= 0");
    if (snr == 0.0) return 0.0;
    if (!(tau_star > 0.0 && tau_star < 1.0)) throw ArgumentError("a positive SNR needs tau_star in (0, 1)");
    const double total = std::accumulate(lambdas.begin(), lambdas.end(), 0.0);
    const double a = snr * total / (tau_star * (1.0 - tau_star));
    return squared ? std::sqrt(a) : a;
}

double mixture_scale(double pi) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw ArgumentError("mixing proportion must lie in [0, 1]");
    return std::sqrt(3.0 - 2.0 * pi);
}

CurveSet generate(const DgpConfig& config) {
    config.validate();
    const int n = config.n;
    const int m = config.grid_size;
    const int nb = config.n_basis;
    const int k_star = config.tau_star > 0.0 ? config.k_star() : n;
    const RowMatrix basis = fourier_basis(m, nb);
    const auto lambdas = harmonic_lambdas(nb);

    double shift = 0.0;
    if (config.setting == Setting::MeanShift && config.tau_star > 0.0) {
        shift = snr_to_a(config.param, config.tau_star, lambdas, config.snr_squared);
    }
    const Eigen::RowVectorXd mean_shift = shift * basis.colwise().sum() / std::sqrt(static_cast<double>(nb));

    // Gaussian scores are drawn for every curve in the same order regardless
    // of setting, so pre-break curves match the null sample of the same seed.
    Engine scores(derive_seed(config.seed, streams::dgp_scores, 0));
    Engine mixture(derive_seed(config.seed, streams::dgp_mixture, 0));
    boost::random::normal_distribution<double> normal;
    boost::random::uniform_01<double> uniform;
    boost::random::chi_squared_distribution<double> chi3(3.0);
    const double c_pi = config.setting == Setting::ScoreMixture ? mixture_scale(config.param) : 1.0;

    RowMatrix values = RowMatrix::Zero(n, m);
    Eigen::RowVectorXd zeta(nb);
    for (int i = 0; i < n; ++i) {
        const bool post = i >= k_star;
        for (int j = 0; j < nb; ++j) {
            const double z = normal(scores);
            double variance = lambdas[static_cast<std::size_t>(j)];
            double score = z;
            if (post && config.setting == Setting::CovarianceScale) variance *= config.param;
            if (post && config.setting == Setting::ScoreMixture) {
                double draw = 0.0;
                if (uniform(mixture) < config.param) {
                    draw = normal(mixture);
                } else {
                    const double numerator = normal(mixture);
                    draw = numerator / std::sqrt(chi3(mixture) / 3.0);
                }
                score = draw / c_pi;
            }
            zeta[j] = std::sqrt(variance) * score;
        }
        values.row(i) = zeta * basis;
        if (post && shift != 0.0) values.row(i) += mean_shift;
    }
    return CurveSet(Grid::uniform(static_cast<std::size_t>(m)), std::move(values));
}

void ExperimentSpec::validate() const {
    if (cells.empty()) throw ArgumentError("experiment needs at least one cell");
    if (kernels.empty()) throw ArgumentError("experiment needs at least one kernel");
    if (reps < 50) throw ArgumentError("experiment needs reps >= 50");
    if (!detect && !coverage) throw ArgumentError("experiment must detect, cover, or both");
    if (!(alpha > 0.0 && alpha < 1.0) || !(ci_alpha > 0.0 && ci_alpha < 1.0)) {
        throw ArgumentError("alpha must lie in (0, 1)");
    }
    for (const auto& c : cells) c.validate();
    for (const auto& k : kernels) k.validate();
    if (coverage && bootstrap_reps < 100) throw ArgumentError("bootstrap needs B >= 100");
}

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

struct ReplicateWork {
    ReplicateRecord record;
    std::vector<double> theta;
};

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    ExperimentReport report;
    DetectConfig detect_config;
    detect_config.alpha = spec.alpha;
    detect_config.fve = spec.fve;
    detect_config.null_reps = spec.null_reps;
    detect_config.bridge_grid = spec.bridge_grid;

    for (std::size_t c = 0; c < spec.cells.size(); ++c) {
        const std::uint64_t cell_seed = derive_seed(spec.seed, streams::replicate, c);
        for (std::size_t kk = 0; kk < spec.kernels.size(); ++kk) {
            const auto started = std::chrono::steady_clock::now();
            const KernelSpec kernel = spec.kernels[kk];
            DgpConfig cell = spec.cells[c];
            const int k_star = cell.tau_star > 0.0 ? cell.k_star() : 0;
            const bool cover = spec.coverage && cell.tau_star > 0.0;
            detect_config.kernel = kernel;

            std::vector<ReplicateWork> work(static_cast<std::size_t>(spec.reps));
            parallel_for(spec.reps, [&](std::ptrdiff_t r) {
                DgpConfig dgp = cell;
                dgp.seed = derive_seed(cell_seed, streams::replicate, static_cast<std::uint64_t>(r));
                const CurveSet curves = generate(dgp);
                const GramMatrix k = gram(curves, kernel);
                auto& w = work[static_cast<std::size_t>(r)];
                auto& rec = w.record;
                rec.cell = static_cast<int>(c);
                rec.rep = static_cast<int>(r);
                rec.kernel = to_string(kernel.family);
                rec.data_seed = dgp.seed;
                rec.gamma_used = k.gamma_used;
                if (spec.detect) {
                    auto stage = prepare_detection(k, detect_config);
                    rec.k_hat = stage.k_hat;
                    rec.t_n = stage.t_n;
                    rec.p_selected = static_cast<int>(stage.theta.size());
                    w.theta = std::move(stage.theta);
                } else {
                    rec.k_hat = break_date(cusum_trace(k));
                }
                if (cover) {
                    const auto ci = bootstrap_ci(k.entries, rec.k_hat, spec.bootstrap_reps, spec.ci_alpha,
                                                 derive_seed(dgp.seed, streams::bootstrap, kk));
                    rec.ci_lower = ci.lower;
                    rec.ci_upper = ci.upper;
                    rec.covered = ci.covers(k_star);
                }
            });

            if (spec.detect) {
                const std::uint64_t null_seed = derive_seed(cell_seed, streams::null_law, kk);
                std::vector<NullLawSample> nulls;
                if (spec.shared_null) {
                    std::vector<std::vector<double>> thetas;
                    thetas.reserve(work.size());
                    for (const auto& w : work) thetas.push_back(w.theta);
                    nulls = simulate_null_batch(thetas, spec.null_reps, spec.bridge_grid, null_seed);
                } else {
                    for (std::size_t r = 0; r < work.size(); ++r) {
                        nulls.push_back(simulate_null(work[r].theta, spec.null_reps, spec.bridge_grid,
                                                      derive_seed(null_seed, streams::null_law, r)));
                    }
                }
                for (std::size_t r = 0; r < work.size(); ++r) {
                    auto& rec = work[r].record;
                    rec.p_value = p_value(*rec.t_n, nulls[r]);
                    rec.reject = *rec.p_value <= spec.alpha;
                }
            }

            CellSummary summary;
            summary.config = cell;
            summary.config.seed = cell_seed;
            summary.kernel = to_string(kernel.family);
            summary.reps = spec.reps;
            std::vector<double> date_error;
            std::vector<double> lengths;
            double k_sum = 0.0;
            int rejections = 0;
            int covered = 0;
            for (const auto& w : work) {
                const auto& rec = w.record;
                k_sum += rec.k_hat;
                date_error.push_back(std::abs(rec.k_hat - k_star));
                if (rec.reject && *rec.reject) ++rejections;
                if (rec.covered) {
                    covered += *rec.covered ? 1 : 0;
                    lengths.push_back(*rec.ci_upper - *rec.ci_lower);
                }
            }
            const double reps = spec.reps;
            summary.mean_k_hat = k_sum / reps;
            summary.median_abs_date_error = median_of(date_error);
            if (spec.detect) summary.rejection_rate = rejections / reps;
            if (cover) {
                summary.coverage = covered / reps;
                summary.mean_ci_length = std::accumulate(lengths.begin(), lengths.end(), 0.0) / reps;
                summary.median_ci_length = median_of(lengths);
            }
            if (spec.timing) {
                summary.runtime_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            }
            report.cells.push_back(summary);
            for (auto& w : work) {
                w.record.summary = report.cells.size() - 1;
                report.replicates.push_back(std::move(w.record));
            }
        }
    }
    return report;
}

nlohmann::json to_json(const DgpConfig& config) {
    return {{"setting", static_cast<int>(config.setting)},
            {"n", config.n},
            {"tau_star", config.tau_star},
            {"k_star", config.tau_star > 0.0 ? config.k_star() : 0},
            {"param", config.param},
            {"grid_size", config.grid_size},
            {"n_basis", config.n_basis},
            {"snr_squared", config.snr_squared},
            {"seed", config.seed}};
}

namespace {

template <class T>
nlohmann::json optional_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const ExperimentReport& report) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& s : report.cells) {
        nlohmann::json cell{{"config", to_json(s.config)},
                            {"kernel", s.kernel},
                            {"reps", s.reps},
                            {"rejection_rate", optional_json(s.rejection_rate)},
                            {"mean_k_hat", s.mean_k_hat},
                            {"median_abs_date_error", s.median_abs_date_error},
                            {"coverage", optional_json(s.coverage)},
                            {"mean_ci_length", optional_json(s.mean_ci_length)},
                            {"median_ci_length", optional_json(s.median_ci_length)}};
        if (s.runtime_seconds) cell["runtime_seconds"] = *s.runtime_seconds;
        cells.push_back(std::move(cell));
    }
    return {{"cells", std::move(cells)}};
}

void write_tidy_csv(std::ostream& out, const ExperimentReport& report) {
    out << "cell,setting,n,tau_star,param,kernel,rep,data_seed,t_n,p_value,reject,p_selected,gamma,k_hat,ci_lower,"
           "ci_upper,covered\n";
    const auto prec = out.precision(17);
    const auto opt = [&out](const auto& v) {
        if (v) out << *v;
    };
    for (const auto& r : report.replicates) {
        const DgpConfig& cfg = report.cells.at(r.summary).config;
        out << r.cell << ',' << static_cast<int>(cfg.setting) << ',' << cfg.n << ',' << cfg.tau_star << ','
            << cfg.param << ',';
        out << r.kernel << ',' << r.rep << ',' << r.data_seed << ',';
        opt(r.t_n);
        out << ',';
        opt(r.p_value);
        out << ',';
        if (r.reject) out << (*r.reject ? 1 : 0);
        out << ',';
        opt(r.p_selected);
        out << ',' << r.gamma_used << ',' << r.k_hat << ',';
        opt(r.ci_lower);
        out << ',';
        opt(r.ci_upper);
        out << ',';
        if (r.covered) out << (*r.covered ? 1 : 0);
        out << '\n';
    }
    out.precision(prec);
}

}  // namespace fdbreak
