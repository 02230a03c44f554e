#pragma once

#include <vector>

#include "fdbreak/kernels.hpp"

namespace fdbreak {

inline constexpr double kDefaultRankTol = 1e-10;
inline constexpr double kDefaultFve = 0.9;

// Spectrum of the centered Gram operator G = QKQ/n.
struct Spectrum {
    // Retained eigenvalues, non-increasing and strictly positive.
    Vector eigenvalues;
    // Column v is the coefficient vector of the v-th eigenfunction with respect
    // to the centered basis Q b; G-orthonormal. Empty when vectors were not
    // requested.
    Matrix eigvec_coeffs;
    int p_selected = 1;
    double trace = 0.0;            // trace(G)
    double min_raw_eigenvalue = 0; // most negative eigenvalue before clipping

    Eigen::Index retained() const noexcept { return eigenvalues.size(); }
};

struct SpectrumOptions {
    double rank_tol = kDefaultRankTol;
    bool with_vectors = true;
    double fve = kDefaultFve;
};

// QKQ/n with Q = I - 11'/n.
Matrix center_gram(const Matrix& k);

Spectrum eigen_spectrum(const GramMatrix& k, const SpectrumOptions& options = {});
Spectrum eigen_spectrum(const Matrix& k, const SpectrumOptions& options = {});

// Smallest p whose leading eigenvalues explain at least `fve_threshold` of the total.
int select_p_fve(std::span<const double> eigenvalues, double fve_threshold);
int select_p_fve(const Vector& eigenvalues, double fve_threshold);

// Leave-one-curve-out residual sum of squares for p = 1..p_max (entry p-1).
std::vector<double> loocv_criterion(const GramMatrix& k, int p_max, double rank_tol = kDefaultRankTol);

// Argmin of loocv_criterion; ties go to the smaller p.
int select_p_loocv(const GramMatrix& k, int p_max, double rank_tol = kDefaultRankTol);

}  // namespace fdbreak
