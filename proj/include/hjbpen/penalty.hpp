#pragma once

#include <string>
#include <string_view>

namespace hjbpen {

/// Componentwise penalty π: the exact max{y, 0} or a C¹ quadratic-spline
/// smoothing of it with width epsilon.
class PenaltyTerm {
public:
    enum class Kind { max, smoothed };

    PenaltyTerm() = default;
    static PenaltyTerm max_penalty() { return PenaltyTerm(); }
    /// Throws std::invalid_argument unless eps > 0 and finite.
    static PenaltyTerm smoothed(double eps);
    /// Accepts "max" or "smooth:<eps>".
    static PenaltyTerm parse(std::string_view text);

    Kind kind() const noexcept { return kind_; }
    bool is_smooth() const noexcept { return kind_ == Kind::smoothed; }
    double epsilon() const noexcept { return eps_; }
    /// Lower bound of π' on [epsilon, ∞); 1 for both kinds.
    double c_min() const noexcept { return 1.0; }

    double value(double y) const noexcept;
    /// Derivative, using the left limit 0 at y = 0 for the max penalty.
    double derivative(double y) const noexcept;

    std::string to_string() const;

private:
    Kind kind_ = Kind::max;
    double eps_ = 0.0;
};

inline double pen_value(const PenaltyTerm& p, double y) { return p.value(y); }
inline double pen_derivative(const PenaltyTerm& p, double y) { return p.derivative(y); }

}  // namespace hjbpen
