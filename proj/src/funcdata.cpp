#include "fdbreak/funcdata.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fdbreak/errors.hpp"

namespace fdbreak {

namespace {

std::vector<double> trapezoid_weights(const std::vector<double>& t) {
    const std::size_t m = t.size();
    std::vector<double> w(m, 0.0);
    for (std::size_t k = 0; k + 1 < m; ++k) {
        const double half = 0.5 * (t[k + 1] - t[k]);
        w[k] += half;
        w[k + 1] += half;
    }
    // Last weight closes the sum so that the weights add up to exactly t.back() - t.front() whenever that
    // difference is representable (always for grids spanning [0, 1]).
    double partial = 0.0;
    for (std::size_t k = 0; k + 1 < m; ++k) partial += w[k];
    w[m - 1] = (t.back() - t.front()) - partial;
    return w;
}

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw DataError(std::string(what) + ": non-finite sample");
    }
}

std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto first = cell.find_first_not_of(" \t\r");
        const auto last = cell.find_last_not_of(" \t\r");
        if (first == std::string::npos) {
            throw DataError("line " + std::to_string(line_no) + ": empty cell (missing values are not accepted)");
        }
        cell = cell.substr(first, last - first + 1);
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(cell, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != cell.size() || !std::isfinite(value)) {
            throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + cell + "' as a finite number");
        }
        row.push_back(value);
    }
    if (!line.empty() && line.back() == ',') {
        throw DataError("line " + std::to_string(line_no) + ": trailing empty cell");
    }
    return row;
}

}  // namespace

Grid::Grid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw DimensionError("grid needs at least 2 points");
    check_finite(points_, "grid");
    if (points_.front() < 0.0 || points_.back() > 1.0) {
        throw DataError("grid points must lie in [0, 1]");
    }
    for (std::size_t k = 1; k < points_.size(); ++k) {
        if (!(points_[k] > points_[k - 1])) throw DataError("grid points must be strictly increasing");
    }
    weights_ = trapezoid_weights(points_);
}

Grid Grid::uniform(std::size_t size) {
    if (size < 2) throw DimensionError("grid needs at least 2 points");
    std::vector<double> t(size);
    for (std::size_t k = 0; k < size; ++k) t[k] = static_cast<double>(k) / static_cast<double>(size - 1);
    return Grid(std::move(t));
}

Grid Grid::normalized(std::vector<double> points) {
    if (points.size() < 2) throw DimensionError("grid needs at least 2 points");
    check_finite(points, "grid");
    const double a = points.front();
    const double b = points.back();
    if (!(b > a)) throw DataError("grid points must be strictly increasing");
    if (a == 0.0 && b == 1.0) return Grid(std::move(points));
    for (double& x : points) x = (x - a) / (b - a);
    points.front() = 0.0;
    points.back() = 1.0;
    return Grid(std::move(points));
}

CurveSet::CurveSet(Grid grid, RowMatrix values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.rows() < 2) throw DimensionError("need at least 2 curves");
    if (static_cast<std::size_t>(values_.cols()) != grid_.size()) {
        throw DimensionError("curve length " + std::to_string(values_.cols()) + " does not match grid size " +
                             std::to_string(grid_.size()));
    }
    if (!values_.allFinite()) throw DataError("curve values must be finite");
}

CurveSet CurveSet::reversed() const {
    RowMatrix flipped = values_.colwise().reverse();
    return CurveSet(grid_, std::move(flipped));
}

double l2_inner(std::span<const double> f, std::span<const double> g, const Grid& grid) {
    if (f.size() != grid.size() || g.size() != grid.size()) {
        throw DimensionError("l2_inner: curve lengths must match the grid");
    }
    check_finite(f, "l2_inner");
    check_finite(g, "l2_inner");
    const auto w = grid.weights();
    double sum = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) sum += w[k] * f[k] * g[k];
    return sum;
}

Matrix sq_distance_matrix(const CurveSet& curves) {
    const auto n = static_cast<Eigen::Index>(curves.count());
    const auto m = static_cast<Eigen::Index>(curves.grid().size());
    const auto w = curves.grid().weights();
    const RowMatrix& x = curves.values();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double* xi = x.data() + i * m;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double* xj = x.data() + j * m;
            double sum = 0.0;
            for (Eigen::Index k = 0; k < m; ++k) {
                const double diff = xi[k] - xj[k];
                sum += w[k] * diff * diff;
            }
            d(i, j) = sum;
            d(j, i) = sum;
        }
    }
    return d;
}

Vector mean_curve(const CurveSet& curves) {
    // Rows are summed in mirrored pairs so that the result is bit-identical for the reversed sample.
    const RowMatrix& x = curves.values();
    const Eigen::Index n = x.rows();
    Vector sum = Vector::Zero(x.cols());
    for (Eigen::Index i = 0; i < n / 2; ++i) sum += (x.row(i) + x.row(n - 1 - i)).transpose();
    if (n % 2 == 1) sum += x.row(n / 2).transpose();
    return sum / static_cast<double>(n);
}

CurveSet read_curves_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> grid_points;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto row = parse_row(line, line_no);
        if (grid_points.empty()) {
            grid_points = std::move(row);
            continue;
        }
        if (row.size() != grid_points.size()) {
            throw DimensionError("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(grid_points.size()) + " values, found " +
                                 std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (grid_points.empty()) throw DataError("CSV contains no grid row");
    if (rows.size() < 2) throw DimensionError("CSV must contain at least 2 curves");
    RowMatrix values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(grid_points.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < grid_points.size(); ++k) {
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
    }
    return CurveSet(Grid::normalized(std::move(grid_points)), std::move(values));
}

CurveSet read_curves_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_curves_csv(in);
}

void write_curves_csv(std::ostream& out, const CurveSet& curves) {
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << std::setprecision(17);
    const auto t = curves.grid().points();
    for (std::size_t k = 0; k < t.size(); ++k) out << (k ? "," : "") << t[k];
    out << '\n';
    const RowMatrix& x = curves.values();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index k = 0; k < x.cols(); ++k) out << (k ? "," : "") << x(i, k);
        out << '\n';
    }
    out.flags(flags);
    out.precision(prec);
}

}  // namespace fdbreak
