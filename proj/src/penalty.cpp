#include "hjbpen/penalty.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace hjbpen {

PenaltyTerm PenaltyTerm::smoothed(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw std::invalid_argument("smoothed penalty needs a positive finite epsilon");
    PenaltyTerm p;
    p.kind_ = Kind::smoothed;
    p.eps_ = eps;
    return p;
}

PenaltyTerm PenaltyTerm::parse(std::string_view text) {
    if (text == "max") return max_penalty();
    constexpr std::string_view prefix = "smooth:";
    if (text.substr(0, prefix.size()) == prefix) {
        const std::string num(text.substr(prefix.size()));
        std::size_t used = 0;
        double eps = 0.0;
        try {
            eps = std::stod(num, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != num.size())
            throw std::invalid_argument("bad penalty epsilon: '" + num + "'");
        return smoothed(eps);
    }
    throw std::invalid_argument("unknown penalty '" + std::string(text) + "' (expected max or smooth:<eps>)");
}

double PenaltyTerm::value(double y) const noexcept {
    if (y <= 0.0) return 0.0;
    if (kind_ == Kind::max) return y;
    if (y <= eps_) return y * y / (2.0 * eps_);
    return y - 0.5 * eps_;
}

double PenaltyTerm::derivative(double y) const noexcept {
    if (y <= 0.0) return 0.0;
    if (kind_ == Kind::max) return 1.0;
    if (y <= eps_) return y / eps_;
    return 1.0;
}

std::string PenaltyTerm::to_string() const {
    if (kind_ == Kind::max) return "max";
    char buf[64];
    std::snprintf(buf, sizeof buf, "smooth:%.17g", eps_);
    return buf;
}

}  // namespace hjbpen
