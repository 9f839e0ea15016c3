#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjbpen {

using RealVector = std::vector<double>;

/// Raised when a matrix fails K°N certification where certification is required.
class NotCertifiedError : public std::runtime_error {
public:
    NotCertifiedError(std::size_t row, const std::string& reason);
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// Raised when a linear solve produces a non-finite result or a large residual.
class LinearSolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Square matrix in band storage.
///
/// Row i stores columns i-w .. i+w at band offsets 0 .. 2w, so the diagonal
/// sits at offset w. Entries whose column falls outside [0, n) are kept at 0.
class BandMatrix {
public:
    BandMatrix() = default;
    BandMatrix(std::size_t n, std::size_t half_bandwidth);

    /// Builds from dense rows; the half-bandwidth is the smallest one that
    /// holds every nonzero entry.
    static BandMatrix from_dense(const std::vector<std::vector<double>>& rows);
    static BandMatrix identity(std::size_t n);

    std::size_t size() const noexcept { return n_; }
    std::size_t half_bandwidth() const noexcept { return w_; }
    std::size_t band_width() const noexcept { return 2 * w_ + 1; }

    /// Zero outside the band.
    double operator()(std::size_t r, std::size_t c) const;
    /// Throws std::out_of_range outside the band.
    void set(std::size_t r, std::size_t c, double v);

    std::span<double> row_band(std::size_t i);
    std::span<const double> row_band(std::size_t i) const;

    RealVector multiply(std::span<const double> x) const;
    double norm_inf() const;
    std::vector<std::vector<double>> to_dense() const;

private:
    std::size_t n_ = 0;
    std::size_t w_ = 0;
    std::vector<double> data_;
};

/// Dot product of one band row (diagonal at offset w) with x.
double band_row_dot(std::span<const double> band, std::size_t w, std::size_t i,
                    std::span<const double> x);

struct KonCheck {
    bool certified = false;
    std::optional<std::size_t> failing_row;
    std::string reason;

    explicit operator bool() const noexcept { return certified; }
};

/// Checks a single band row: nonpositive off-diagonals and a diagonal that
/// strictly exceeds the sum of their magnitudes. Throws std::domain_error on
/// NaN or infinite entries.
KonCheck check_kon_row(std::span<const double> band, std::size_t w, std::size_t i, std::size_t n);

/// Row-dominance K°N check. Rejection is a value; non-finite entries throw.
KonCheck check_kon(const BandMatrix& m);
KonCheck check_kon(const std::vector<std::vector<double>>& dense);

/// A band matrix that has passed check_kon.
class KonMatrix {
public:
    /// Throws NotCertifiedError with the failing row.
    static KonMatrix certify(BandMatrix m);
    static KonMatrix identity(std::size_t n);

    const BandMatrix& matrix() const noexcept { return m_; }
    std::size_t size() const noexcept { return m_.size(); }
    std::size_t half_bandwidth() const noexcept { return m_.half_bandwidth(); }
    double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
    RealVector multiply(std::span<const double> x) const { return m_.multiply(x); }

private:
    explicit KonMatrix(BandMatrix m) : m_(std::move(m)) {}

    BandMatrix m_;

    friend KonMatrix compose_rows(std::span<const KonMatrix>, std::span<const std::size_t>);
    friend KonMatrix operator+(const KonMatrix&, const KonMatrix&);
};

/// Which source supplies each output row.
using RowSelection = std::vector<std::size_t>;

/// Row i of the result is row i of sources[sel[i]]. Certified by closure.
KonMatrix compose_rows(std::span<const KonMatrix> sources, std::span<const std::size_t> sel);

/// Sums of K°N matrices stay in K°N.
KonMatrix operator+(const KonMatrix& a, const KonMatrix& b);

/// Band LU without pivoting, then a backward-error check (≤ 1e-12).
RealVector solve_linear(const KonMatrix& a, std::span<const double> b);
/// Certifies first; throws NotCertifiedError if that fails.
RealVector solve_linear(const BandMatrix& a, std::span<const double> b);

double norm_inf(std::span<const double> x);
double max_abs_diff(std::span<const double> x, std::span<const double> y);

}  // namespace hjbpen
