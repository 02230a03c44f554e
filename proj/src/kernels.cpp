#include "fdbreak/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fdbreak/errors.hpp"

namespace fdbreak {

std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::Grb: return "grb";
        case KernelFamily::Linear: return "linear";
        case KernelFamily::Quadratic: return "quadratic";
    }
    return "unknown";
}

KernelFamily parse_kernel_family(const std::string& name) {
    if (name == "grb") return KernelFamily::Grb;
    if (name == "linear") return KernelFamily::Linear;
    if (name == "quadratic") return KernelFamily::Quadratic;
    throw ArgumentError("unknown kernel '" + name + "' (expected grb, linear or quadratic)");
}

void KernelSpec::validate() const {
    if (family != KernelFamily::Grb && gamma) {
        throw ArgumentError("gamma applies to the grb kernel only");
    }
    if (gamma && !(*gamma > 0.0 && std::isfinite(*gamma))) {
        throw ArgumentError("gamma must be a positive finite number");
    }
}

double median_heuristic(const Matrix& sq_dist) {
    const Eigen::Index n = sq_dist.rows();
    if (n < 2 || sq_dist.cols() != n) throw DimensionError("median_heuristic: need a square matrix with n >= 2");
    std::vector<double> upper;
    upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) upper.push_back(sq_dist(i, j));
    }
    const std::size_t count = upper.size();
    const std::size_t mid = count / 2;
    std::nth_element(upper.begin(), upper.begin() + static_cast<std::ptrdiff_t>(mid), upper.end());
    double median = upper[mid];
    if (count % 2 == 0) {
        const double below = *std::max_element(upper.begin(), upper.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (below + median);
    }
    if (!(median > 0.0)) {
        throw DegenerateDataError("median pairwise squared distance is zero (curves are identical)");
    }
    return 1.0 / median;
}

GramMatrix gram_from_sq_distances(const Matrix& sq_dist, const KernelSpec& spec) {
    spec.validate();
    if (spec.family != KernelFamily::Grb) throw ArgumentError("squared distances determine only the grb kernel");
    const double gamma = spec.gamma ? *spec.gamma : median_heuristic(sq_dist);
    const Eigen::Index n = sq_dist.rows();
    Matrix k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        k(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = std::exp(-gamma * sq_dist(i, j));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return GramMatrix{std::move(k), spec, gamma};
}

GramMatrix gram(const CurveSet& curves, const KernelSpec& spec) {
    spec.validate();
    if (spec.family == KernelFamily::Grb) return gram_from_sq_distances(sq_distance_matrix(curves), spec);

    const auto n = static_cast<Eigen::Index>(curves.count());
    const auto w = curves.grid().weights();
    const Eigen::Map<const Vector> weights(w.data(), static_cast<Eigen::Index>(w.size()));
    RowMatrix x = curves.values();
    if (spec.family == KernelFamily::Quadratic) x.rowwise() -= mean_curve(curves).transpose();

    Matrix inner = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            double sum = 0.0;
            for (Eigen::Index k = 0; k < x.cols(); ++k) sum += weights[k] * (x(i, k) * x(j, k));
            inner(i, j) = sum;
            inner(j, i) = sum;
        }
    }
    if (spec.family == KernelFamily::Quadratic) inner = inner.array().square().matrix();
    return GramMatrix{std::move(inner), spec, 0.0};
}

GramMatrix gram_from_matrix(Matrix entries, KernelSpec kernel, double gamma_used) {
    if (entries.rows() != entries.cols()) throw DimensionError("Gram matrix must be square");
    if (entries.rows() < 2) throw DimensionError("Gram matrix needs n >= 2");
    if (!entries.allFinite()) throw DataError("Gram matrix entries must be finite");
    const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
    if ((entries - entries.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw DataError("Gram matrix must be symmetric");
    }
    return GramMatrix{std::move(entries), kernel, gamma_used};
}

}  // namespace fdbreak
