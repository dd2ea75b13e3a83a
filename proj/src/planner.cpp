#include "cspez/planner.hpp"

#include <chrono>
#include <cmath>

#include "cspez/mlp.hpp"
#include "cspez/surrogate.hpp"

namespace cspez {

namespace {

constexpr int kMaxControl = 8;

Vec2 vec_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument(what + ": expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

std::pair<double, double> pair_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument(what + ": expected [lo, hi]");
    return {j[0].get<double>(), j[1].get<double>()};
}

// No time limit is written as null.
nlohmann::json solver_to_json(const SolverOptions& s) {
    nlohmann::json j = {{"kkt_tol", s.kkt_tol},     {"feas_tol", s.feas_tol},       {"max_outer", s.max_outer},
                        {"max_inner", s.max_inner}, {"rho_initial", s.rho_initial}, {"time_limit_s", nullptr}};
    if (std::isfinite(s.time_limit_s)) j["time_limit_s"] = s.time_limit_s;
    return j;
}

SolverOptions solver_from_json(const nlohmann::json& j, SolverOptions s) {
    if (!j.is_object()) throw std::invalid_argument("solver: expected an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "kkt_tol") {
            s.kkt_tol = v.get<double>();
        } else if (key == "feas_tol") {
            s.feas_tol = v.get<double>();
        } else if (key == "max_outer") {
            s.max_outer = v.get<int>();
        } else if (key == "max_inner") {
            s.max_inner = v.get<int>();
        } else if (key == "rho_initial") {
            s.rho_initial = v.get<double>();
        } else if (key == "time_limit_s") {
            s.time_limit_s = v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
        } else if (key == "verbose") {
            s.verbose = v.get<bool>();
        } else {
            throw std::invalid_argument("solver: unknown key '" + key + "'");
        }
    }
    if (!(s.kkt_tol > 0.0) || !(s.feas_tol > 0.0) || s.max_outer < 1 || s.max_inner < 1 || !(s.rho_initial > 0.0)) {
        throw std::invalid_argument("solver: options out of range");
    }
    return s;
}

}  // namespace

void PlanProblem::validate() const {
    auto finite = [](const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); };
    if (!finite(start) || !finite(goal)) throw std::invalid_argument("plan: start and goal must be finite");
    if (norm(goal - start) <= 0.0) throw std::invalid_argument("plan: start and goal coincide");
    if (!(evader_speed > 0.0)) throw std::invalid_argument("plan: evader speed must be positive");
    if (!(turn_rate_min < turn_rate_max)) throw std::invalid_argument("plan: turn-rate bounds must satisfy lo < hi");
    if (!(curvature_max > 0.0)) throw std::invalid_argument("plan: curvature bound must be positive");
    if (!(region.x_min < region.x_max && region.y_min < region.y_max)) throw std::invalid_argument("plan: empty region");
    if (!region.contains(start) || !region.contains(goal)) throw std::invalid_argument("plan: start and goal must lie in the region");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("plan: epsilon must be in (0, 1]");
    if (method == Method::MonteCarlo && epsilon < 1.0) {
        throw std::invalid_argument("plan: the Monte Carlo estimate has no useful gradient; use linear, quadratic or nn");
    }
    if (degree < 2) throw std::invalid_argument("plan: degree must be at least 2 for curvature");
    if (n_control <= degree || n_control > kMaxControl) {
        throw std::invalid_argument("plan: n_control must be in (degree, " + std::to_string(kMaxControl) + "]");
    }
    if (n_samples < 2) throw std::invalid_argument("plan: n_samples must be at least 2");
    if (!(speed_band > 0.0 && speed_band < 1.0)) throw std::invalid_argument("plan: speed_band must be in (0, 1)");
    if (!(initial_time_factor > 0.0)) throw std::invalid_argument("plan: initial_time_factor must be positive");
    belief.validate();
}

nlohmann::json problem_to_json(const PlanProblem& p) {
    return {{"start", {p.start.x, p.start.y}},
            {"goal", {p.goal.x, p.goal.y}},
            {"evader_speed", p.evader_speed},
            {"turn_rate_bounds", {p.turn_rate_min, p.turn_rate_max}},
            {"curvature_max", p.curvature_max},
            {"region", {{"x", {p.region.x_min, p.region.x_max}}, {"y", {p.region.y_min, p.region.y_max}}}},
            {"belief", belief_to_json(p.belief)},
            {"method", to_string(p.method)},
            {"epsilon", p.epsilon},
            {"n_control", p.n_control},
            {"degree", p.degree},
            {"n_samples", p.n_samples},
            {"speed_band", p.speed_band},
            {"initial_time_factor", p.initial_time_factor},
            {"solver", solver_to_json(p.solver)}};
}

PlanProblem problem_from_json(const nlohmann::json& j, PlanProblem p) {
    if (!j.is_object()) throw std::invalid_argument("plan: expected an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "start") {
            p.start = vec_from_json(v, "plan.start");
        } else if (key == "goal") {
            p.goal = vec_from_json(v, "plan.goal");
        } else if (key == "evader_speed") {
            p.evader_speed = v.get<double>();
        } else if (key == "turn_rate_bounds") {
            std::tie(p.turn_rate_min, p.turn_rate_max) = pair_from_json(v, "plan.turn_rate_bounds");
        } else if (key == "curvature_max") {
            p.curvature_max = v.get<double>();
        } else if (key == "region") {
            if (!v.is_object()) throw std::invalid_argument("plan.region: expected {x: [lo, hi], y: [lo, hi]}");
            for (const auto& [rk, rv] : v.items()) {
                if (rk == "x") {
                    std::tie(p.region.x_min, p.region.x_max) = pair_from_json(rv, "plan.region.x");
                } else if (rk == "y") {
                    std::tie(p.region.y_min, p.region.y_max) = pair_from_json(rv, "plan.region.y");
                } else {
                    throw std::invalid_argument("plan.region: unknown key '" + rk + "'");
                }
            }
        } else if (key == "belief") {
            p.belief = belief_from_json(v);
        } else if (key == "method") {
            p.method = method_from_string(v.get<std::string>());
        } else if (key == "epsilon") {
            p.epsilon = v.get<double>();
        } else if (key == "n_control") {
            p.n_control = v.get<int>();
        } else if (key == "degree") {
            p.degree = v.get<int>();
        } else if (key == "n_samples") {
            p.n_samples = v.get<int>();
        } else if (key == "speed_band") {
            p.speed_band = v.get<double>();
        } else if (key == "initial_time_factor") {
            p.initial_time_factor = v.get<double>();
        } else if (key == "solver") {
            p.solver = solver_from_json(v, p.solver);
        } else {
            throw std::invalid_argument("plan: unknown key '" + key + "'");
        }
    }
    p.validate();
    return p;
}

nlohmann::json result_to_json(const PlanResult& r, bool include_timing) {
    nlohmann::json j = {{"trajectory", spline_to_json(r.trajectory)},
                        {"tf", r.tf},
                        {"status", to_string(r.status)},
                        {"iterations", r.iterations},
                        {"evaluations", r.evaluations},
                        {"max_violation", r.max_violation},
                        {"kkt_residual", r.kkt_residual},
                        {"max_cspez", r.max_cspez},
                        {"sample_times", r.sample_times},
                        {"cspez", r.cspez}};
    if (include_timing) j["wall_time_s"] = r.wall_time_s;
    return j;
}

nlohmann::json validation_to_json(const ValidationReport& v) {
    return {{"n_points", v.n_points},
            {"max_mc_cspez", v.max_mc_cspez},
            {"max_mc_time", v.max_mc_time},
            {"max_estimate", v.max_estimate},
            {"start_error", v.start_error},
            {"goal_error", v.goal_error},
            {"speed_excess", v.speed_excess},
            {"max_speed_deviation", v.max_speed_deviation},
            {"turn_rate_excess", v.turn_rate_excess},
            {"curvature_excess", v.curvature_excess},
            {"region_excess", v.region_excess}};
}

std::vector<Vec2> straight_line_controls(const Vec2& start, const Vec2& goal, int n_control, int degree) {
    // Greville abscissae of the uniform knots, normalised so t0 -> 0 and tf -> 1.
    const double nk = static_cast<double>(n_control - degree);
    std::vector<Vec2> pts;
    for (int i = 0; i < n_control; ++i) {
        const double s = (static_cast<double>(i) - 0.5 * (degree - 1)) / nk;
        pts.push_back(start + s * (goal - start));
    }
    return pts;
}

PlannerNlp::PlannerNlp(const PlanProblem& problem, const MlpModel* model) : problem_(problem), model_(model) {
    problem_.validate();
    constrained_ = problem_.epsilon < 1.0;
    if (constrained_ && problem_.method == Method::Neural && (model_ == nullptr || model_->empty())) {
        throw ModelError("the nn planning constraint needs a trained model");
    }
    if (constrained_) {
        quantile_ = normal_quantile(problem_.epsilon);
        logit_eps_ = std::log(problem_.epsilon / (1.0 - problem_.epsilon));
    }
    for (int i = 0; i < problem_.n_samples; ++i) fractions_.push_back(static_cast<double>(i) / (problem_.n_samples - 1));
    samples_.resize(fractions_.size());
}

Eigen::VectorXd PlannerNlp::lower() const {
    Eigen::VectorXd lo = NlpProblem::lower();
    lo[n_vars() - 1] = 0.5 * norm(problem_.goal - problem_.start) / problem_.evader_speed;
    return lo;
}

Eigen::VectorXd PlannerNlp::upper() const {
    Eigen::VectorXd hi = NlpProblem::upper();
    hi[n_vars() - 1] = 20.0 * norm(problem_.goal - problem_.start) / problem_.evader_speed;
    return hi;
}

Eigen::VectorXd PlannerNlp::pack(const std::vector<Vec2>& controls, double tf) const {
    if (static_cast<int>(controls.size()) != problem_.n_control) throw std::invalid_argument("pack: wrong control count");
    Eigen::VectorXd x(n_vars());
    for (int i = 0; i < problem_.n_control; ++i) {
        x[2 * i] = controls[static_cast<std::size_t>(i)].x;
        x[2 * i + 1] = controls[static_cast<std::size_t>(i)].y;
    }
    x[n_vars() - 1] = tf;
    return x;
}

SplineTrajectory PlannerNlp::trajectory(const Eigen::VectorXd& x) const {
    std::vector<Vec2> pts;
    for (int i = 0; i < problem_.n_control; ++i) pts.push_back({x[2 * i], x[2 * i + 1]});
    return SplineTrajectory(problem_.degree, 0.0, x[n_vars() - 1], std::move(pts));
}

EvaderState PlannerNlp::evader_at(const Sample& s) const {
    return {{s.flat.position.x.v, s.flat.position.y.v}, s.flat.heading.v, problem_.evader_speed};
}

double PlannerNlp::cspez_value(const EvaderState& e, double* probability) const {
    ZMoments<double> m;
    if (problem_.method == Method::Quadratic) {
        m = quadratic_moments<double>(problem_.belief, e);
    } else {
        m = linear_moments<double>(problem_.belief, e);
    }
    if (!m.finite || !std::isfinite(m.variance)) {
        if (probability != nullptr) *probability = m.mean <= 0.0 ? 1.0 : 0.0;
        return -m.mean;
    }
    const double var = std::max(m.variance, 0.0);
    if (probability != nullptr) *probability = gaussian_cdf(0.0, m.mean, var);
    // P(z <= 0) <= eps  <=>  mu + sigma * Phi^-1(eps) >= 0.
    return -(m.mean + quantile_ * std::sqrt(std::max(var, 1e-24)));
}

std::array<double, 3> PlannerNlp::cspez_gradient(const EvaderState& e) const {
    using S = Dual<double, 3>;
    const BasicEvader<S> es{{S::variable(e.position.x, 0), S::variable(e.position.y, 1)}, S::variable(e.heading, 2),
                            S(e.speed)};
    ZMoments<S> m;
    if (problem_.method == Method::Quadratic) {
        m = quadratic_moments<S>(problem_.belief, es);
    } else {
        m = linear_moments<S>(problem_.belief, es);
    }
    if (!m.finite || !all_finite(m.variance)) return {0.0, 0.0, 0.0};
    const S var = m.variance.v > 1e-24 ? m.variance : S(1e-24);
    const S g = -(m.mean + quantile_ * sqrt(var));
    if (!all_finite(g)) return {0.0, 0.0, 0.0};
    return {g.d[0], g.d[1], g.d[2]};
}

bool PlannerNlp::refresh(const Eigen::VectorXd& x) {
    if (cached_ && x == cached_x_) return cached_ok_;
    cached_ = true;
    cached_x_ = x;
    cached_ok_ = false;
    if (!x.allFinite()) return false;

    const int n = n_vars();
    std::vector<BasicVec2<J>> pts;
    for (int i = 0; i < problem_.n_control; ++i) pts.push_back({J::variable(x[2 * i], 2 * i), J::variable(x[2 * i + 1], 2 * i + 1)});
    const J tf = J::variable(x[n - 1], n - 1);
    try {
        const BasicSpline<J> spline(problem_.degree, J(0.0), tf, std::move(pts));
        const double v_floor = 1e-6 * problem_.evader_speed;
        for (std::size_t i = 0; i < fractions_.size(); ++i) {
            samples_[i].flat = spline.flat_outputs(fractions_[i] * tf, v_floor);
            samples_[i].grad_ready = false;
        }
    } catch (const DegenerateVelocity&) {
        return false;
    } catch (const SplineDomainError&) {
        return false;
    } catch (const std::invalid_argument&) {
        return false;
    }

    if (constrained_) {
        if (problem_.method == Method::Neural) {
            Eigen::MatrixXd feats(static_cast<Eigen::Index>(samples_.size()), kFeatureCount);
            for (std::size_t i = 0; i < samples_.size(); ++i) {
                const FeatureVector f = build_features(problem_.belief, evader_at(samples_[i]));
                for (int c = 0; c < kFeatureCount; ++c) feats(static_cast<Eigen::Index>(i), c) = f[static_cast<std::size_t>(c)];
            }
            Eigen::VectorXd logits;
            Eigen::MatrixXd grads;
            model_->logit_batch(feats, logits, &grads);
            for (std::size_t i = 0; i < samples_.size(); ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                samples_[i].g_cspez = logits[r] - logit_eps_;
                samples_[i].probability = sigmoid(logits[r]);
                samples_[i].dg = {grads(r, kRelX), grads(r, kRelY), grads(r, kRelHeading)};
                samples_[i].grad_ready = true;
            }
        } else {
            for (auto& s : samples_) s.g_cspez = cspez_value(evader_at(s), &s.probability);
        }
    }
    cached_ok_ = true;
    return true;
}

bool PlannerNlp::evaluate(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& c_eq, Eigen::VectorXd& c_in) {
    if (!refresh(x)) return false;
    f = x[n_vars() - 1];
    const auto& first = samples_.front().flat.position;
    const auto& last = samples_.back().flat.position;
    c_eq.resize(4);
    c_eq << first.x.v - problem_.start.x, first.y.v - problem_.start.y, last.x.v - problem_.goal.x,
        last.y.v - problem_.goal.y;
    c_in.resize(n_ineq());
    const double ve = problem_.evader_speed;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& fl = samples_[i].flat;
        const Eigen::Index b = static_cast<Eigen::Index>(i) * kPerSample;
        c_in[b + 0] = fl.speed.v - ve;
        c_in[b + 1] = (1.0 - problem_.speed_band) * ve - fl.speed.v;
        c_in[b + 2] = fl.turn_rate.v - problem_.turn_rate_max;
        c_in[b + 3] = problem_.turn_rate_min - fl.turn_rate.v;
        c_in[b + 4] = fl.curvature.v - problem_.curvature_max;
        c_in[b + 5] = -problem_.curvature_max - fl.curvature.v;
        c_in[b + 6] = fl.position.x.v - problem_.region.x_max;
        c_in[b + 7] = problem_.region.x_min - fl.position.x.v;
        c_in[b + 8] = fl.position.y.v - problem_.region.y_max;
        c_in[b + 9] = problem_.region.y_min - fl.position.y.v;
        // Without an engagement-zone constraint the row is a constant -1.
        c_in[b + 10] = constrained_ ? samples_[i].g_cspez : -1.0;
    }
    return true;
}

Eigen::VectorXd PlannerNlp::objective_gradient(const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    g[n_vars() - 1] = 1.0;
    return g;
}

Eigen::VectorXd PlannerNlp::constraint_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& w_eq,
                                                const Eigen::VectorXd& w_in) {
    const int n = n_vars();
    if (!refresh(x)) return Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    auto add = [&](double w, const J& q) {
        if (w == 0.0) return;
        for (int k = 0; k < n; ++k) g[k] += w * q.d[static_cast<std::size_t>(k)];
    };
    const auto& first = samples_.front().flat.position;
    const auto& last = samples_.back().flat.position;
    add(w_eq[0], first.x);
    add(w_eq[1], first.y);
    add(w_eq[2], last.x);
    add(w_eq[3], last.y);
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        auto& s = samples_[i];
        const Eigen::Index b = static_cast<Eigen::Index>(i) * kPerSample;
        add(w_in[b + 0] - w_in[b + 1], s.flat.speed);
        add(w_in[b + 2] - w_in[b + 3], s.flat.turn_rate);
        add(w_in[b + 4] - w_in[b + 5], s.flat.curvature);
        double wx = w_in[b + 6] - w_in[b + 7];
        double wy = w_in[b + 8] - w_in[b + 9];
        double wh = 0.0;
        const double wc = w_in[b + 10];
        if (constrained_ && wc != 0.0) {
            if (!s.grad_ready) {
                s.dg = cspez_gradient(evader_at(s));
                s.grad_ready = true;
            }
            wx += wc * s.dg[0];
            wy += wc * s.dg[1];
            wh = wc * s.dg[2];
        }
        add(wx, s.flat.position.x);
        add(wy, s.flat.position.y);
        add(wh, s.flat.heading);
    }
    return g;
}

std::vector<double> PlannerNlp::sample_probabilities(const Eigen::VectorXd& x) {
    std::vector<double> out(samples_.size(), 0.0);
    if (!constrained_ || !refresh(x)) return out;
    for (std::size_t i = 0; i < samples_.size(); ++i) out[i] = samples_[i].probability;
    return out;
}

PlanResult plan(const PlanProblem& problem, const MlpModel* model) {
    const auto start = std::chrono::steady_clock::now();
    PlannerNlp nlp(problem, model);
    const double distance = norm(problem.goal - problem.start);
    const double tf0 = problem.initial_time_factor * distance / problem.evader_speed;
    const Eigen::VectorXd x0 =
        nlp.pack(straight_line_controls(problem.start, problem.goal, problem.n_control, problem.degree), tf0);
    const SolverResult sr = solve_augmented_lagrangian(nlp, x0, problem.solver);

    PlanResult r;
    r.trajectory = nlp.trajectory(sr.x);
    r.tf = sr.x[nlp.n_vars() - 1];
    r.status = sr.status;
    r.iterations = sr.inner_iterations;
    r.evaluations = sr.evaluations;
    r.max_violation = sr.max_violation;
    r.kkt_residual = sr.kkt_residual;
    for (double s : nlp.sample_fractions()) r.sample_times.push_back(s * r.tf);
    // Recompute the estimates from the returned trajectory rather than the solver state.
    if (nlp.has_cspez_constraint()) {
        const double v_floor = 1e-6 * problem.evader_speed;
        for (double t : r.sample_times) {
            double p = 0.0;
            try {
                const FlatOutputs fo = r.trajectory.flat_outputs(std::min(t, r.tf), v_floor);
                const EvaderState e{fo.position, fo.heading, problem.evader_speed};
                p = estimate(problem.method, problem.belief, e, model).probability;
            } catch (const DegenerateVelocity&) {
                p = std::numeric_limits<double>::quiet_NaN();
            }
            r.cspez.push_back(p);
            if (!(p <= r.max_cspez)) r.max_cspez = p;
        }
    } else {
        r.cspez.assign(r.sample_times.size(), 0.0);
    }
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

ValidationReport validate(const SplineTrajectory& trajectory, const PlanProblem& problem, std::size_t mc_n,
                          std::uint64_t seed, int refine, const MlpModel* model) {
    if (refine < 1) throw std::invalid_argument("validate: refine must be at least 1");
    ValidationReport v;
    const int m = refine * problem.n_samples;
    v.n_points = m;
    const double tf = trajectory.tf();
    const double ve = problem.evader_speed;
    const double v_floor = 1e-6 * ve;
    v.start_error = norm(trajectory.eval(trajectory.t0()) - problem.start);
    v.goal_error = norm(trajectory.eval(tf) - problem.goal);
    const bool with_estimate = problem.method != Method::MonteCarlo && (problem.method != Method::Neural || model != nullptr);
    for (int i = 0; i < m; ++i) {
        const double t = std::min(tf, trajectory.t0() + (tf - trajectory.t0()) * i / (m - 1));
        v.times.push_back(t);
        FlatOutputs fo;
        try {
            fo = trajectory.flat_outputs(t, v_floor);
        } catch (const DegenerateVelocity&) {
            v.speed_excess = std::max(v.speed_excess, 1.0);
            v.mc_cspez.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double lo = (1.0 - problem.speed_band) * ve;
        v.speed_excess = std::max(v.speed_excess, std::max({0.0, fo.speed - ve, lo - fo.speed}) / ve);
        v.max_speed_deviation = std::max(v.max_speed_deviation, std::abs(fo.speed - ve) / ve);
        v.turn_rate_excess =
            std::max(v.turn_rate_excess, std::max({0.0, fo.turn_rate - problem.turn_rate_max, problem.turn_rate_min - fo.turn_rate}));
        v.curvature_excess = std::max(v.curvature_excess, std::max(0.0, std::abs(fo.curvature) - problem.curvature_max));
        v.region_excess = std::max(v.region_excess, std::max({0.0, fo.position.x - problem.region.x_max,
                                                              problem.region.x_min - fo.position.x,
                                                              fo.position.y - problem.region.y_max,
                                                              problem.region.y_min - fo.position.y}));
        const EvaderState e{fo.position, fo.heading, ve};
        RngStream rng = RngStream::split(seed, static_cast<std::uint64_t>(i));
        const double p = mc_cspez(problem.belief, e, mc_n, rng).probability;
        v.mc_cspez.push_back(p);
        if (p > v.max_mc_cspez) {
            v.max_mc_cspez = p;
            v.max_mc_time = t;
        }
        if (with_estimate) v.max_estimate = std::max(v.max_estimate, estimate(problem.method, problem.belief, e, model).probability);
    }
    return v;
}

}  // namespace cspez
