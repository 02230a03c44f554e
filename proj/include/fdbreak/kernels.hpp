#pragma once

#include <optional>
#include <string>

#include "fdbreak/funcdata.hpp"

namespace fdbreak {

enum class KernelFamily { Grb, Linear, Quadratic };

std::string to_string(KernelFamily family);
KernelFamily parse_kernel_family(const std::string& name);

// Kernel choice. `gamma` is only meaningful for GRB; an empty gamma means the
// median heuristic picks it.
struct KernelSpec {
    KernelFamily family = KernelFamily::Grb;
    std::optional<double> gamma;

    static KernelSpec grb_auto() { return {}; }
    static KernelSpec grb(double gamma) { return {KernelFamily::Grb, gamma}; }
    static KernelSpec linear() { return {KernelFamily::Linear, std::nullopt}; }
    static KernelSpec quadratic() { return {KernelFamily::Quadratic, std::nullopt}; }

    void validate() const;
};

struct GramMatrix {
    Matrix entries;
    KernelSpec kernel;
    // Resolved GRB bandwidth; 0 for the baseline families.
    double gamma_used = 0.0;

    Eigen::Index size() const noexcept { return entries.rows(); }
};

// 1 / median of the strict upper triangle of a squared-distance matrix.
double median_heuristic(const Matrix& sq_dist);

GramMatrix gram(const CurveSet& curves, const KernelSpec& spec);

// GRB Gram matrix from precomputed squared distances.
GramMatrix gram_from_sq_distances(const Matrix& sq_dist, const KernelSpec& spec);

// Wraps a caller-supplied symmetric matrix (tests, precomputed kernels). The
// spec is descriptive only.
GramMatrix gram_from_matrix(Matrix entries, KernelSpec kernel = KernelSpec::linear(), double gamma_used = 0.0);

}  // namespace fdbreak
