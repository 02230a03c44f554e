#pragma once

#include <istream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fdbreak {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Strictly increasing observation points inside [0, 1], with the trapezoidal
// weights used for every L2 integral on this grid.
class Grid {
public:
    explicit Grid(std::vector<double> points);

    // Uniform grid of `size` points on [0, 1].
    static Grid uniform(std::size_t size);

    // Maps an increasing grid on any [a, b] affinely onto [0, 1].
    static Grid normalized(std::vector<double> points);

    std::size_t size() const noexcept { return points_.size(); }
    std::span<const double> points() const noexcept { return points_; }
    std::span<const double> weights() const noexcept { return weights_; }

private:
    std::vector<double> points_;
    std::vector<double> weights_;
};

// n curves sampled on a shared grid; row i holds X_i in order of observation.
class CurveSet {
public:
    CurveSet(Grid grid, RowMatrix values);

    const Grid& grid() const noexcept { return grid_; }
    const RowMatrix& values() const noexcept { return values_; }
    std::size_t count() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::span<const double> curve(std::size_t i) const {
        return {values_.data() + i * values_.cols(), static_cast<std::size_t>(values_.cols())};
    }

    // Same curves in reverse temporal order.
    CurveSet reversed() const;

private:
    Grid grid_;
    RowMatrix values_;
};

// Trapezoidal approximation of the integral of f*g over the grid.
double l2_inner(std::span<const double> f, std::span<const double> g, const Grid& grid);

// Pairwise squared L2 distances; symmetric with an exactly zero diagonal.
Matrix sq_distance_matrix(const CurveSet& curves);

// Pointwise sample mean curve.
Vector mean_curve(const CurveSet& curves);

// CSV layout: first row holds the grid points, each later row one curve.
CurveSet read_curves_csv(std::istream& in);
CurveSet read_curves_csv_file(const std::string& path);
void write_curves_csv(std::ostream& out, const CurveSet& curves);

}  // namespace fdbreak
