#pragma once

// Helpers shared by the HJB and obstacle solvers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hjbpen/control_family.hpp"
#include "hjbpen/hjb_solver.hpp"
#include "hjbpen/matrix_core.hpp"

namespace hjbpen::detail {

constexpr double kDenominatorGuard = 1e-300;

inline void require_finite(std::span<const double> x, const char* what) {
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

inline void require_length(std::span<const double> x, std::size_t n, const char* what) {
    if (x.size() != n) throw std::invalid_argument(std::string(what) + ": vector length mismatch");
}

inline std::vector<RowChoice> scan_min(const ControlledFamily& f, const ControlGrid& g, std::span<const double> x) {
    std::vector<RowChoice> out(f.dimension());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = row_min_residual(f, g, x, i);
    return out;
}

inline std::vector<RowChoice> scan_max(const ControlledFamily& f, const ControlGrid& g, std::span<const double> x) {
    std::vector<RowChoice> out(f.dimension());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = row_max_residual(f, g, x, i);
    return out;
}

/// Accumulates weighted rows into a band matrix of fixed half-bandwidth.
class RowAssembler {
public:
    RowAssembler(std::size_t n, std::size_t w) : m_(n, w) {}

    /// Adds weight * row i of A_u; returns weight * (b_u)_i.
    double add_family_row(const ControlledFamily& f, double u, std::size_t i, double weight) {
        const std::size_t wf = f.half_bandwidth();
        std::vector<double>& band = family_scratch(wf);
        std::fill(band.begin(), band.end(), 0.0);
        const double b = f.row(u, i, band);
        add_band(i, band, wf, weight);
        return weight * b;
    }

    void add_matrix_row(const BandMatrix& a, std::size_t i, double weight) {
        add_band(i, a.row_band(i), a.half_bandwidth(), weight);
    }

    BandMatrix take() { return std::move(m_); }

private:
    void add_band(std::size_t i, std::span<const double> band, std::size_t wsrc, double weight) {
        auto dst = m_.row_band(i);
        const std::size_t w = m_.half_bandwidth();
        for (std::size_t o = 0; o < band.size(); ++o) {
            if (band[o] == 0.0) continue;
            // column i + o - wsrc must fit in the destination band
            const std::size_t to = o + w - wsrc;
            if (to >= dst.size()) throw std::logic_error("row assembly: band overflow");
            dst[to] += weight * band[o];
        }
    }

    std::vector<double>& family_scratch(std::size_t wf) {
        if (fam_.size() != 2 * wf + 1) fam_.assign(2 * wf + 1, 0.0);
        return fam_;
    }

    BandMatrix m_;
    std::vector<double> fam_;
};

// Row i of A_u times x, with (b_u)_i returned through b.
inline double row_apply(const ControlledFamily& f, double u, std::size_t i, std::span<const double> x,
                        std::vector<double>& scratch, double& b) {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    b = f.row(u, i, scratch);
    return band_row_dot(scratch, f.half_bandwidth(), i, x);
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void finish(SolveReport& r, const Stopwatch& sw, bool ok, std::string msg = {}) {
    r.converged = ok;
    r.wall_time = sw.seconds();
    r.message = std::move(msg);
}

}  // namespace hjbpen::detail
