#include "cspez/geometry.hpp"

#include <limits>

namespace cspez {

namespace {

bool finite(const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); }

}  // namespace

void validate(const PursuerParams& p) {
    if (!finite(p.position) || !std::isfinite(p.heading) || !std::isfinite(p.turn_radius) || !std::isfinite(p.range) ||
        !std::isfinite(p.speed)) {
        throw std::invalid_argument("pursuer parameters must be finite");
    }
    if (p.turn_radius <= 0.0) throw std::invalid_argument("pursuer turn radius must be positive");
    if (p.range <= 0.0) throw std::invalid_argument("pursuer range must be positive");
    if (p.speed <= 0.0) throw std::invalid_argument("pursuer speed must be positive");
}

void validate(const EvaderState& e) {
    if (!finite(e.position) || !std::isfinite(e.heading) || !std::isfinite(e.speed)) {
        throw std::invalid_argument("evader state must be finite");
    }
    if (e.speed < 0.0) throw std::invalid_argument("evader speed must be non-negative");
}

Vec2 project_evader(const EvaderState& e, double range, double pursuer_speed) {
    validate(e);
    if (!std::isfinite(range) || !std::isfinite(pursuer_speed)) throw std::invalid_argument("range and speed must be finite");
    if (pursuer_speed <= 0.0) throw std::invalid_argument("pursuer speed must be positive");
    return project_evader<double>(e, range, pursuer_speed);
}

double ez_value_extended(const EvaderState& e, std::array<double, 6> theta) {
    if (theta[5] <= 0.0) return std::numeric_limits<double>::infinity();
    if (theta[3] < 0.0) theta[3] = 0.0;
    const PursuerParams p = PursuerParams::from_vector(theta);
    const Vec2 f = project_evader<double>(e, p.range, p.speed);
    if (f.x == p.position.x && f.y == p.position.y) return -p.range;
    if (p.turn_radius == 0.0) return norm(f - p.position) - p.range;
    return shortest_cs_length(f, p) - p.range;
}

std::string to_string(TurnSide side) { return side == TurnSide::Left ? "left" : "right"; }

}  // namespace cspez
