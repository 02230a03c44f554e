#include "fdbreak/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "fdbreak/errors.hpp"
#include "fdbreak/parallel.hpp"

namespace fdbreak {

Matrix center_gram(const Matrix& k) {
    const Eigen::Index n = k.rows();
    if (n < 1 || k.cols() != n) throw DimensionError("center_gram: square matrix required");
    const Vector row_mean = k.rowwise().mean();
    const Vector col_mean = k.colwise().mean().transpose();
    const double grand = row_mean.mean();
    Matrix g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            g(i, j) = (k(i, j) - row_mean[i] - col_mean[j] + grand) / static_cast<double>(n);
        }
    }
    // Symmetrize away the rounding asymmetry of the two mean vectors.
    return 0.5 * (g + g.transpose());
}

Spectrum eigen_spectrum(const GramMatrix& k, const SpectrumOptions& options) {
    return eigen_spectrum(k.entries, options);
}

Spectrum eigen_spectrum(const Matrix& k, const SpectrumOptions& options) {
    if (!(options.rank_tol >= 0.0)) throw ArgumentError("rank_tol must be non-negative");
    const Matrix g = center_gram(k);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(
        g, options.with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw SimulationError("eigen-decomposition failed to converge");

    const Eigen::Index n = g.rows();
    const Vector raw = solver.eigenvalues().reverse();  // non-increasing
    const double top = raw[0];
    if (!(top > 0.0)) throw DegenerateDataError("centered Gram operator is zero (curves are identical under the kernel)");

    Eigen::Index kept = 0;
    while (kept < n && raw[kept] > options.rank_tol * top) ++kept;

    Spectrum s;
    s.eigenvalues = raw.head(kept);
    s.trace = g.trace();
    s.min_raw_eigenvalue = std::min(0.0, raw[n - 1]);

    if (options.with_vectors) {
        const Matrix u = solver.eigenvectors().rowwise().reverse().leftCols(kept);
        // (G^+)^{1/2} restricted to the retained range; the z's maximizing
        // z' G G^+ G z are the retained eigenvectors of G itself.
        const Vector inv_sqrt = s.eigenvalues.cwiseSqrt().cwiseInverse();
        const Matrix pinv_sqrt = u * inv_sqrt.asDiagonal() * u.transpose();
        s.eigvec_coeffs = pinv_sqrt * u;
    }
    s.p_selected = select_p_fve(s.eigenvalues, options.fve);
    return s;
}

int select_p_fve(std::span<const double> eigenvalues, double fve_threshold) {
    if (!(fve_threshold > 0.0 && fve_threshold < 1.0)) throw ArgumentError("fve threshold must lie in (0, 1)");
    double total = 0.0;
    for (double v : eigenvalues) total += std::max(0.0, v);
    if (!(total > 0.0)) throw DegenerateDataError("no positive eigenvalue");
    double cumulative = 0.0;
    for (std::size_t p = 0; p < eigenvalues.size(); ++p) {
        cumulative += std::max(0.0, eigenvalues[p]);
        if (cumulative / total >= fve_threshold) return static_cast<int>(p + 1);
    }
    return static_cast<int>(eigenvalues.size());
}

int select_p_fve(const Vector& eigenvalues, double fve_threshold) {
    return select_p_fve(std::span<const double>(eigenvalues.data(), static_cast<std::size_t>(eigenvalues.size())),
                        fve_threshold);
}

std::vector<double> loocv_criterion(const GramMatrix& k, int p_max, double rank_tol) {
    const Eigen::Index n = k.size();
    if (n < 3) throw ArgumentError("leave-one-out selection needs n >= 3");
    if (p_max < 1 || p_max >= n) throw ArgumentError("p_max must lie in 1..n-1");
    const Matrix& full = k.entries;
    const Eigen::Index m = n - 1;

    std::vector<std::vector<double>> per_curve(static_cast<std::size_t>(n),
                                               std::vector<double>(static_cast<std::size_t>(p_max), 0.0));
    parallel_for(n, [&](std::ptrdiff_t held) {
        const auto idx = [held](Eigen::Index s) { return s < held ? s : s + 1; };
        Matrix ks(m, m);
        Vector ki(m);
        for (Eigen::Index b = 0; b < m; ++b) {
            ki[b] = full(idx(b), held);
            for (Eigen::Index a = 0; a < m; ++a) ks(a, b) = full(idx(a), idx(b));
        }
        const Vector row_mean = ks.rowwise().mean();
        Eigen::SelfAdjointEigenSolver<Matrix> solver(center_gram(ks));
        const Vector theta = solver.eigenvalues().reverse();
        const Matrix u = solver.eigenvectors().rowwise().reverse();
        Eigen::Index kept = 0;
        if (theta[0] > 0.0) {
            while (kept < m && kept < p_max && theta[kept] > rank_tol * theta[0]) ++kept;
        }

        // Projection of kappa(X_i, .) - mu onto RKHS-orthonormal eigenfunctions
        // of the held-out sample, evaluated at the remaining curves.
        const Vector centered = ki - row_mean;
        Vector residual = centered;
        auto& crit = per_curve[static_cast<std::size_t>(held)];
        for (int p = 0; p < p_max; ++p) {
            if (p < kept) {
                Vector a = u.col(p);
                a.array() -= a.mean();
                a /= std::sqrt(static_cast<double>(m) * theta[p]);
                const Vector eval = ks * a;
                residual -= a.dot(centered) * eval;
            }
            crit[static_cast<std::size_t>(p)] = residual.squaredNorm();
        }
    });

    std::vector<double> total(static_cast<std::size_t>(p_max), 0.0);
    for (const auto& c : per_curve) {
        for (std::size_t p = 0; p < total.size(); ++p) total[p] += c[p];
    }
    return total;
}

int select_p_loocv(const GramMatrix& k, int p_max, double rank_tol) {
    const auto crit = loocv_criterion(k, p_max, rank_tol);
    const double best = *std::min_element(crit.begin(), crit.end());
    const double slack = 1e-12 * std::max(1.0, std::abs(best));
    for (std::size_t p = 0; p < crit.size(); ++p) {
        if (crit[p] <= best + slack) return static_cast<int>(p + 1);
    }
    return 1;
}

}  // namespace fdbreak
