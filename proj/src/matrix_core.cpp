#include "hjbpen/matrix_core.hpp"

#include <algorithm>
#include <cmath>

namespace hjbpen {

NotCertifiedError::NotCertifiedError(std::size_t row, const std::string& reason)
    : std::runtime_error("matrix not in K°N at row " + std::to_string(row) + ": " + reason),
      row_(row) {}

BandMatrix::BandMatrix(std::size_t n, std::size_t half_bandwidth)
    : n_(n), w_(n == 0 ? 0 : std::min(half_bandwidth, n - 1)), data_(n * (2 * w_ + 1), 0.0) {}

BandMatrix BandMatrix::from_dense(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    std::size_t w = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (rows[r].size() != n) throw std::invalid_argument("from_dense: matrix is not square");
        for (std::size_t c = 0; c < n; ++c) {
            if (rows[r][c] != 0.0) w = std::max(w, r > c ? r - c : c - r);
        }
    }
    BandMatrix m(n, w);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (rows[r][c] != 0.0) m.set(r, c, rows[r][c]);
        }
    }
    return m;
}

BandMatrix BandMatrix::identity(std::size_t n) {
    BandMatrix m(n, 0);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
    return m;
}

double BandMatrix::operator()(std::size_t r, std::size_t c) const {
    if (r >= n_ || c >= n_) throw std::out_of_range("BandMatrix index out of range");
    if (c + w_ < r || c > r + w_) return 0.0;
    return data_[r * band_width() + (c + w_ - r)];
}

void BandMatrix::set(std::size_t r, std::size_t c, double v) {
    if (r >= n_ || c >= n_ || c + w_ < r || c > r + w_)
        throw std::out_of_range("BandMatrix::set outside band");
    data_[r * band_width() + (c + w_ - r)] = v;
}

std::span<double> BandMatrix::row_band(std::size_t i) {
    return {data_.data() + i * band_width(), band_width()};
}

std::span<const double> BandMatrix::row_band(std::size_t i) const {
    return {data_.data() + i * band_width(), band_width()};
}

double band_row_dot(std::span<const double> band, std::size_t w, std::size_t i,
                    std::span<const double> x) {
    const std::size_t n = x.size();
    const std::size_t lo = i >= w ? i - w : 0;
    const std::size_t hi = std::min(n - 1, i + w);
    double s = 0.0;
    for (std::size_t c = lo; c <= hi; ++c) s += band[c + w - i] * x[c];
    return s;
}

RealVector BandMatrix::multiply(std::span<const double> x) const {
    if (x.size() != n_) throw std::invalid_argument("multiply: dimension mismatch");
    RealVector y(n_);
    for (std::size_t i = 0; i < n_; ++i) y[i] = band_row_dot(row_band(i), w_, i, x);
    return y;
}

double BandMatrix::norm_inf() const {
    double best = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        double s = 0.0;
        for (double v : row_band(i)) s += std::abs(v);
        best = std::max(best, s);
    }
    return best;
}

std::vector<std::vector<double>> BandMatrix::to_dense() const {
    std::vector<std::vector<double>> d(n_, std::vector<double>(n_, 0.0));
    for (std::size_t r = 0; r < n_; ++r)
        for (std::size_t c = 0; c < n_; ++c) d[r][c] = (*this)(r, c);
    return d;
}

KonCheck check_kon_row(std::span<const double> band, std::size_t w, std::size_t i, std::size_t n) {
    double off = 0.0;
    double diag = 0.0;
    for (std::size_t o = 0; o < band.size(); ++o) {
        const double v = band[o];
        if (!std::isfinite(v)) throw std::domain_error("check_kon: non-finite entry in row " + std::to_string(i));
        if (o + i < w || o + i - w >= n) continue;
        if (o == w) {
            diag = v;
        } else {
            if (v > 0.0) return {false, i, "positive off-diagonal entry"};
            off -= v;
        }
    }
    if (!(diag > off)) return {false, i, "diagonal does not strictly dominate the row"};
    return {true, std::nullopt, {}};
}

KonCheck check_kon(const BandMatrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        KonCheck r = check_kon_row(m.row_band(i), m.half_bandwidth(), i, m.size());
        if (!r.certified) return r;
    }
    return {true, std::nullopt, {}};
}

KonCheck check_kon(const std::vector<std::vector<double>>& dense) {
    for (const auto& row : dense)
        for (double v : row)
            if (std::isnan(v)) throw std::domain_error("check_kon: NaN entry");
    return check_kon(BandMatrix::from_dense(dense));
}

KonMatrix KonMatrix::certify(BandMatrix m) {
    KonCheck c = check_kon(m);
    if (!c.certified) throw NotCertifiedError(*c.failing_row, c.reason);
    return KonMatrix(std::move(m));
}

KonMatrix KonMatrix::identity(std::size_t n) { return KonMatrix(BandMatrix::identity(n)); }

KonMatrix compose_rows(std::span<const KonMatrix> sources, std::span<const std::size_t> sel) {
    if (sources.empty()) throw std::invalid_argument("compose_rows: no sources");
    const std::size_t n = sources[0].size();
    std::size_t w = 0;
    for (const auto& s : sources) {
        if (s.size() != n) throw std::invalid_argument("compose_rows: dimension mismatch");
        w = std::max(w, s.half_bandwidth());
    }
    if (sel.size() != n) throw std::invalid_argument("compose_rows: selection length mismatch");
    BandMatrix out(n, w);
    for (std::size_t i = 0; i < n; ++i) {
        if (sel[i] >= sources.size()) throw std::invalid_argument("compose_rows: selection index out of range");
        const BandMatrix& src = sources[sel[i]].matrix();
        const std::size_t ws = src.half_bandwidth();
        auto from = src.row_band(i);
        auto to = out.row_band(i);
        for (std::size_t o = 0; o < from.size(); ++o) to[o + w - ws] = from[o];
    }
    return KonMatrix(std::move(out));
}

KonMatrix operator+(const KonMatrix& a, const KonMatrix& b) {
    if (a.size() != b.size()) throw std::invalid_argument("KonMatrix sum: dimension mismatch");
    const std::size_t w = std::max(a.half_bandwidth(), b.half_bandwidth());
    BandMatrix out(a.size(), w);
    for (const KonMatrix* m : {&a, &b}) {
        const std::size_t wm = m->half_bandwidth();
        for (std::size_t i = 0; i < a.size(); ++i) {
            auto from = m->matrix().row_band(i);
            auto to = out.row_band(i);
            for (std::size_t o = 0; o < from.size(); ++o) to[o + w - wm] += from[o];
        }
    }
    return KonMatrix(std::move(out));
}

RealVector solve_linear(const KonMatrix& a, std::span<const double> b) {
    const BandMatrix& A = a.matrix();
    const std::size_t n = A.size();
    if (b.size() != n) throw std::invalid_argument("solve_linear: dimension mismatch");
    if (n == 0) return {};
    const std::size_t w = A.half_bandwidth();
    const std::size_t bw = A.band_width();

    // Elimination works on a copy of the band; no fill-in leaves the band without pivoting.
    std::vector<double> lu(bw * n);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = A.row_band(i);
        std::copy(row.begin(), row.end(), lu.begin() + static_cast<std::ptrdiff_t>(i * bw));
    }
    auto at = [&](std::size_t r, std::size_t c) -> double& { return lu[r * bw + (c + w - r)]; };
    RealVector x(b.begin(), b.end());

    for (std::size_t k = 0; k < n; ++k) {
        const double pivot = at(k, k);
        const std::size_t last = std::min(n - 1, k + w);
        for (std::size_t r = k + 1; r <= last; ++r) {
            const double l = at(r, k) / pivot;
            if (l == 0.0) continue;
            at(r, k) = 0.0;
            for (std::size_t c = k + 1; c <= last; ++c) at(r, c) -= l * at(k, c);
            x[r] -= l * x[k];
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        const std::size_t last = std::min(n - 1, k + w);
        double s = x[k];
        for (std::size_t c = k + 1; c <= last; ++c) s -= at(k, c) * x[c];
        x[k] = s / at(k, k);
    }

    for (double v : x)
        if (!std::isfinite(v)) throw LinearSolveError("solve_linear: non-finite solution");
    const RealVector ax = A.multiply(x);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res = std::max(res, std::abs(ax[i] - b[i]));
    const double scale = A.norm_inf() * norm_inf(x) + norm_inf(b);
    if (res > 1e-12 * scale) throw LinearSolveError("solve_linear: residual check failed");
    return x;
}

RealVector solve_linear(const BandMatrix& a, std::span<const double> b) {
    return solve_linear(KonMatrix::certify(a), b);
}

double norm_inf(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("max_abs_diff: dimension mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

}  // namespace hjbpen
