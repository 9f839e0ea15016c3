#include "hjbpen/control_family.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hjbpen {

ControlInterval::ControlInterval(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
        throw std::invalid_argument("control interval needs finite lo <= hi");
}

ControlGrid::ControlGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("control grid is empty");
    for (std::size_t j = 0; j < points_.size(); ++j) {
        if (!std::isfinite(points_[j])) throw std::invalid_argument("control grid has a non-finite point");
        if (j > 0 && !(points_[j] > points_[j - 1]))
            throw std::invalid_argument("control grid must be strictly increasing");
    }
}

ControlGrid ControlGrid::uniform(ControlInterval iv, std::size_t count) {
    if (count == 0) throw std::invalid_argument("control grid is empty");
    if (count > 1 && iv.lo == iv.hi) throw std::invalid_argument("degenerate interval cannot hold several points");
    std::vector<double> pts(count);
    if (count == 1) {
        pts[0] = iv.lo;
    } else {
        const double n = static_cast<double>(count - 1);
        for (std::size_t j = 0; j < count; ++j) pts[j] = iv.lo + iv.width() * static_cast<double>(j) / n;
        pts.back() = iv.hi;
    }
    return ControlGrid(std::move(pts));
}

std::size_t ControlGrid::index_of(double u, double tol) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), u);
    std::size_t best = points_.size();
    double dist = tol;
    for (auto cand : {it, it == points_.begin() ? it : it - 1}) {
        if (cand == points_.end()) continue;
        const double d = std::abs(*cand - u);
        if (d <= dist) {
            dist = d;
            best = static_cast<std::size_t>(cand - points_.begin());
        }
    }
    if (best == points_.size()) throw std::invalid_argument("control " + std::to_string(u) + " is not on the grid");
    return best;
}

double ControlledFamily::row_residual(double u, std::size_t i, std::span<const double> x,
                                      std::span<double> scratch) const {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double b = row(u, i, scratch);
    return band_row_dot(scratch, half_bandwidth(), i, x) - b;
}

BandMatrix ControlledFamily::matrix(double u) const {
    BandMatrix m(dimension(), half_bandwidth());
    std::vector<double> band(2 * half_bandwidth() + 1);
    const std::size_t off = half_bandwidth() - m.half_bandwidth();
    for (std::size_t i = 0; i < dimension(); ++i) {
        std::fill(band.begin(), band.end(), 0.0);
        row(u, i, band);
        auto dst = m.row_band(i);
        for (std::size_t o = 0; o < dst.size(); ++o) dst[o] = band[o + off];
    }
    return m;
}

RealVector ControlledFamily::rhs(double u) const {
    RealVector b(dimension());
    std::vector<double> band(2 * half_bandwidth() + 1);
    for (std::size_t i = 0; i < dimension(); ++i) {
        std::fill(band.begin(), band.end(), 0.0);
        b[i] = row(u, i, band);
    }
    return b;
}

FunctionFamily::FunctionFamily(std::size_t n, std::size_t half_bandwidth, RowFn fn)
    : n_(n), w_(half_bandwidth), fn_(std::move(fn)) {
    if (n == 0) throw std::invalid_argument("family dimension must be positive");
    if (!fn_) throw std::invalid_argument("family row function is empty");
}

namespace {

template <class Better>
RowChoice scan(const ControlledFamily& fam, const ControlGrid& grid, std::span<const double> x,
               std::size_t i, Better better) {
    if (grid.size() == 0) throw std::invalid_argument("control grid is empty");
    if (i >= fam.dimension() || x.size() != fam.dimension())
        throw std::invalid_argument("row scan: bad row index or vector length");
    std::vector<double> scratch(2 * fam.half_bandwidth() + 1);
    RowChoice best{0, grid[0], fam.row_residual(grid[0], i, x, scratch)};
    for (std::size_t j = 1; j < grid.size(); ++j) {
        const double v = fam.row_residual(grid[j], i, x, scratch);
        if (better(v, best.value)) best = {j, grid[j], v};
    }
    return best;
}

}  // namespace

RowChoice row_min_residual(const ControlledFamily& fam, const ControlGrid& grid,
                           std::span<const double> x, std::size_t i) {
    return scan(fam, grid, x, i, [](double v, double b) { return v < b; });
}

RowChoice row_max_residual(const ControlledFamily& fam, const ControlGrid& grid,
                           std::span<const double> x, std::size_t i) {
    return scan(fam, grid, x, i, [](double v, double b) { return v > b; });
}

RowChoice row_max_violation(const ControlledFamily& fam, const ControlGrid& grid,
                            std::span<const double> x, std::size_t i, const PenaltyTerm& pen) {
    // The largest violation b_u - A_u x is the smallest residual, and pen is
    // strictly increasing on the positives, so the argmin residual is the
    // argmax penalty unless nothing is violated (then every penalty is 0).
    const RowChoice m = row_min_residual(fam, grid, x, i);
    const double v = pen.value(-m.value);
    if (v > 0.0) return {m.grid_index, m.control, v};
    return {0, grid[0], 0.0};
}

KonCheck certify_family(const ControlledFamily& fam, const ControlGrid& grid) {
    const std::size_t w = fam.half_bandwidth();
    const std::size_t n = fam.dimension();
    std::vector<double> band(2 * w + 1);
    for (double u : grid.points()) {
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(band.begin(), band.end(), 0.0);
            fam.row(u, i, band);
            KonCheck c = check_kon_row(band, w, i, n);
            if (!c.certified) {
                c.reason += " (control " + std::to_string(u) + ")";
                return c;
            }
        }
    }
    return {true, std::nullopt, {}};
}

}  // namespace hjbpen
