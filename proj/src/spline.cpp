#include "cspez/spline.hpp"

namespace cspez {

nlohmann::json spline_to_json(const SplineTrajectory& s) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& c : s.control_points()) pts.push_back({c.x, c.y});
    return {{"degree", s.degree()},
            {"t0", s.t0()},
            {"tf", s.tf()},
            {"n_internal_knots", s.n_internal_knots()},
            {"control_points", pts}};
}

SplineTrajectory spline_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("trajectory: expected an object");
    static const std::array<std::string, 5> keys = {"degree", "t0", "tf", "n_internal_knots", "control_points"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw std::invalid_argument("trajectory: unknown key '" + key + "'");
        }
    }
    for (const auto& key : keys) {
        if (!j.contains(key)) throw std::invalid_argument("trajectory: missing key '" + key + "'");
    }
    std::vector<Vec2> pts;
    for (const auto& p : j.at("control_points")) {
        if (!p.is_array() || p.size() != 2) throw std::invalid_argument("trajectory: control points must be [x, y] pairs");
        pts.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    SplineTrajectory s(j.at("degree").get<int>(), j.at("t0").get<double>(), j.at("tf").get<double>(), std::move(pts));
    if (s.n_internal_knots() != j.at("n_internal_knots").get<int>()) {
        throw std::invalid_argument("trajectory: n_internal_knots must equal the control point count minus the degree");
    }
    return s;
}

}  // namespace cspez
