#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hjbpen/matrix_core.hpp"
#include "hjbpen/penalty.hpp"

namespace hjbpen {

struct ControlInterval {
    double lo = 0.0;
    double hi = 0.0;

    /// Throws std::invalid_argument unless lo <= hi (both finite).
    ControlInterval(double lo_, double hi_);
    double width() const noexcept { return hi - lo; }
};

/// Sorted, strictly increasing sample of a control interval.
class ControlGrid {
public:
    /// Throws std::invalid_argument if empty, unsorted or non-finite.
    explicit ControlGrid(std::vector<double> points);

    /// count equally spaced points including both endpoints; a single point
    /// sits at lo.
    static ControlGrid uniform(ControlInterval iv, std::size_t count);

    std::span<const double> points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    double operator[](std::size_t j) const { return points_[j]; }
    double front() const { return points_.front(); }
    double back() const { return points_.back(); }

    /// Index of the grid point within tol of u, or throws std::invalid_argument.
    std::size_t index_of(double u, double tol) const;

private:
    std::vector<double> points_;
};

/// The map u -> (A_u, b_u), evaluated one row at a time.
class ControlledFamily {
public:
    virtual ~ControlledFamily() = default;

    virtual std::size_t dimension() const = 0;
    virtual std::size_t half_bandwidth() const = 0;

    /// Writes row i of A_u into band (length 2w+1, diagonal at offset w,
    /// already zeroed by the caller) and returns (b_u)_i.
    virtual double row(double u, std::size_t i, std::span<double> band) const = 0;

    /// (A_u x - b_u)_i; scratch must hold 2w+1 entries.
    double row_residual(double u, std::size_t i, std::span<const double> x, std::span<double> scratch) const;

    BandMatrix matrix(double u) const;
    RealVector rhs(double u) const;
};

/// Family defined by a callable with the same contract as ControlledFamily::row.
class FunctionFamily final : public ControlledFamily {
public:
    using RowFn = std::function<double(double u, std::size_t i, std::span<double> band)>;

    FunctionFamily(std::size_t n, std::size_t half_bandwidth, RowFn fn);

    std::size_t dimension() const override { return n_; }
    std::size_t half_bandwidth() const override { return w_; }
    double row(double u, std::size_t i, std::span<double> band) const override { return fn_(u, i, band); }

private:
    std::size_t n_;
    std::size_t w_;
    RowFn fn_;
};

struct RowChoice {
    std::size_t grid_index = 0;
    double control = 0.0;
    double value = 0.0;
};

/// min over the grid of (A_u x - b_u)_i; ties go to the smallest grid index.
RowChoice row_min_residual(const ControlledFamily& fam, const ControlGrid& grid,
                           std::span<const double> x, std::size_t i);
/// max over the grid of (A_u x - b_u)_i; ties go to the smallest grid index.
RowChoice row_max_residual(const ControlledFamily& fam, const ControlGrid& grid,
                           std::span<const double> x, std::size_t i);
/// max over the grid of pen((b_u - A_u x)_i); ties go to the smallest grid index.
RowChoice row_max_violation(const ControlledFamily& fam, const ControlGrid& grid,
                            std::span<const double> x, std::size_t i, const PenaltyTerm& pen);

/// Certifies A_u for every grid point, row by row.
KonCheck certify_family(const ControlledFamily& fam, const ControlGrid& grid);

}  // namespace hjbpen
