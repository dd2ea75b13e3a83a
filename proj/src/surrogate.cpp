#include "cspez/surrogate.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include "cspez/estimators.hpp"
#include "cspez/parallel.hpp"

namespace cspez {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr char kTrainingMagic[8] = {'C', 'S', 'P', 'Z', 'T', 'S', '0', '1'};

}  // namespace

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names{
        "mu_a",    "mu_R",  "mu_v",  "var_x", "var_y", "cov_xy",     "var_psi",
        "var_a",   "var_R", "var_v", "rel_x", "rel_y", "rel_heading", "evader_speed"};
    return names;
}

double wrap_angle(double angle) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(angle + std::numbers::pi, two_pi);
    if (w < 0.0) w += two_pi;
    return w - std::numbers::pi;
}

FeatureVector build_features(const PursuerBelief& b, const EvaderState& e) {
    return {b.mean[3],
            b.mean[4],
            b.mean[5],
            b.cov_position(0, 0),
            b.cov_position(1, 1),
            b.cov_position(0, 1),
            b.var_heading,
            b.var_turn_radius,
            b.var_range,
            b.var_speed,
            e.position.x - b.mean[0],
            e.position.y - b.mean[1],
            wrap_angle(e.heading - b.mean[2]),
            e.speed};
}

Configuration configuration_from_features(const FeatureVector& f, double reference_heading) {
    Configuration c;
    c.belief.mean = {0.0, 0.0, reference_heading, f[kMeanTurnRadius], f[kMeanRange], f[kMeanSpeed]};
    c.belief.cov_position << f[kVarX], f[kCovXY], f[kCovXY], f[kVarY];
    c.belief.var_heading = f[kVarHeading];
    c.belief.var_turn_radius = f[kVarTurnRadius];
    c.belief.var_range = f[kVarRange];
    c.belief.var_speed = f[kVarSpeed];
    c.evader.position = {f[kRelX], f[kRelY]};
    c.evader.heading = reference_heading + f[kRelHeading];
    c.evader.speed = f[kEvaderSpeed];
    return c;
}

FeatureRanges FeatureRanges::defaults() {
    FeatureRanges r;
    r.bounds = {{{0.05, 0.5},
                 {0.5, 2.0},
                 {1.0, 3.0},
                 {0.0, 0.15},
                 {0.0, 0.15},
                 {-0.06, 0.06},
                 {0.0, 0.3},
                 {0.0, 0.01},
                 {0.0, 0.15},
                 {0.0, 0.4},
                 {-4.0, 4.0},
                 {-4.0, 4.0},
                 {-std::numbers::pi, std::numbers::pi},
                 {0.3, 1.5}}};
    r.reference_heading = std::numbers::pi / 4.0;
    return r;
}

bool FeatureRanges::contains(const FeatureVector& f, double slack) const {
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double pad = slack * std::max(1.0, bounds[i].second - bounds[i].first);
        if (f[i] < bounds[i].first - pad || f[i] > bounds[i].second + pad) return false;
    }
    return true;
}

void FeatureRanges::validate() const {
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        const auto [lo, hi] = bounds[i];
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
            throw RangeConfigError("range for '" + feature_names()[i] + "' must satisfy lo < hi");
        }
    }
    if (bounds[kMeanTurnRadius].first <= 0.0 || bounds[kMeanRange].first <= 0.0 || bounds[kMeanSpeed].first <= 0.0) {
        throw RangeConfigError("mean turn radius, range and speed must be positive");
    }
    for (int k : {kVarX, kVarY, kVarHeading, kVarTurnRadius, kVarRange, kVarSpeed}) {
        if (bounds[static_cast<std::size_t>(k)].first < 0.0) {
            throw RangeConfigError("variance range for '" + feature_names()[static_cast<std::size_t>(k)] +
                                   "' must be non-negative");
        }
    }
    if (bounds[kEvaderSpeed].first < 0.0) throw RangeConfigError("evader speed must be non-negative");
    if (!std::isfinite(reference_heading)) throw RangeConfigError("reference heading must be finite");
}

nlohmann::json ranges_to_json(const FeatureRanges& r) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < r.bounds.size(); ++i) j[feature_names()[i]] = {r.bounds[i].first, r.bounds[i].second};
    j["reference_heading"] = r.reference_heading;
    return j;
}

FeatureRanges ranges_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw RangeConfigError("ranges: expected an object");
    FeatureRanges r;
    std::set<std::string> seen;
    for (const auto& [key, value] : j.items()) {
        if (key == "reference_heading") {
            if (!value.is_number()) throw RangeConfigError("ranges: reference_heading must be a number");
            r.reference_heading = value.get<double>();
            seen.insert(key);
            continue;
        }
        const auto& names = feature_names();
        const auto it = std::find(names.begin(), names.end(), key);
        if (it == names.end()) throw RangeConfigError("ranges: unknown key '" + key + "'");
        if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
            throw RangeConfigError("ranges: '" + key + "' must be [lo, hi]");
        }
        r.bounds[static_cast<std::size_t>(it - names.begin())] = {value[0].get<double>(), value[1].get<double>()};
        seen.insert(key);
    }
    for (const auto& name : feature_names()) {
        if (!seen.count(name)) throw RangeConfigError("ranges: missing '" + name + "'");
    }
    if (!seen.count("reference_heading")) throw RangeConfigError("ranges: missing 'reference_heading'");
    r.validate();
    return r;
}

std::vector<std::vector<double>> lhs_unit(std::size_t n, std::size_t dims, RngStream& rng) {
    if (n == 0) throw std::invalid_argument("latin hypercube needs n >= 1");
    std::vector<std::vector<double>> pts(n, std::vector<double>(dims));
    std::vector<std::size_t> perm(n);
    for (std::size_t d = 0; d < dims; ++d) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        for (std::size_t i = 0; i < n; ++i) {
            pts[i][d] = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
        }
    }
    return pts;
}

std::vector<Configuration> latin_hypercube(std::size_t n, const FeatureRanges& ranges, RngStream& rng) {
    ranges.validate();
    const auto unit = lhs_unit(n, kFeatureCount, rng);
    std::vector<FeatureVector> feats(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < static_cast<std::size_t>(kFeatureCount); ++d) {
            const auto [lo, hi] = ranges.bounds[d];
            feats[i][d] = lo + (hi - lo) * unit[i][d];
        }
    }

    // Re-pair the covariance column until every 2x2 position block is PSD.
    auto cap = [&](std::size_t i) { return std::sqrt(feats[i][kVarX] * feats[i][kVarY]); };
    auto ok = [&](double cov, std::size_t owner) { return std::abs(cov) <= cap(owner); };
    std::size_t draws = 0;
    const std::size_t budget = 100 * n;
    for (std::size_t i = 0; i < n; ++i) {
        while (!ok(feats[i][kCovXY], i)) {
            if (++draws > budget) {
                throw RangeConfigError("latin hypercube: could not pair covariances with PSD position blocks within " +
                                       std::to_string(budget) + " draws; narrow the cov_xy range");
            }
            const std::size_t j = static_cast<std::size_t>(rng.next_u64() % n);
            if (ok(feats[j][kCovXY], i) && ok(feats[i][kCovXY], j)) std::swap(feats[i][kCovXY], feats[j][kCovXY]);
        }
    }

    std::vector<Configuration> out;
    out.reserve(n);
    for (const auto& f : feats) out.push_back(configuration_from_features(f, ranges.reference_heading));
    return out;
}

TrainingSet generate_labels(const std::vector<Configuration>& configs, std::size_t mc_n, std::uint64_t seed,
                            unsigned workers) {
    if (mc_n == 0) throw std::invalid_argument("generate_labels: mc_n must be positive");
    TrainingSet ts;
    ts.features.resize(configs.size());
    ts.labels.resize(configs.size());
    parallel_for(configs.size(), workers, [&](std::size_t i) {
        RngStream rng = RngStream::split(seed, i);
        ts.features[i] = build_features(configs[i].belief, configs[i].evader);
        ts.labels[i] = mc_cspez(configs[i].belief, configs[i].evader, mc_n, rng).probability;
    });
    ts.metadata = {{"mc_samples", mc_n}, {"seed", seed}, {"rows", configs.size()}};
    return ts;
}

void save_training_set(const TrainingSet& ts, const std::filesystem::path& path) {
    if (ts.features.size() != ts.labels.size()) throw std::invalid_argument("training set: feature/label count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const std::uint64_t rows = ts.size();
    const std::uint32_t cols = kFeatureCount + 1;
    out.write(kTrainingMagic, sizeof(kTrainingMagic));
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    std::vector<double> column(rows);
    for (std::size_t c = 0; c < static_cast<std::size_t>(kFeatureCount); ++c) {
        for (std::size_t r = 0; r < rows; ++r) column[r] = ts.features[r][c];
        out.write(reinterpret_cast<const char*>(column.data()), static_cast<std::streamsize>(rows * sizeof(double)));
    }
    out.write(reinterpret_cast<const char*>(ts.labels.data()), static_cast<std::streamsize>(rows * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing " + path.string());

    nlohmann::json sidecar = ts.metadata;
    sidecar["rows"] = rows;
    std::vector<std::string> names(feature_names().begin(), feature_names().end());
    names.emplace_back("label");
    sidecar["columns"] = names;
    std::ofstream meta(path.string() + ".json");
    meta << sidecar.dump(2) << '\n';
}

TrainingSet load_training_set(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    char magic[8];
    std::uint64_t rows = 0;
    std::uint32_t cols = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (!in || std::memcmp(magic, kTrainingMagic, sizeof(magic)) != 0 || cols != kFeatureCount + 1) {
        throw std::runtime_error(path.string() + " is not a training-set file");
    }
    TrainingSet ts;
    ts.features.resize(rows);
    ts.labels.resize(rows);
    std::vector<double> column(rows);
    for (std::size_t c = 0; c < static_cast<std::size_t>(kFeatureCount); ++c) {
        in.read(reinterpret_cast<char*>(column.data()), static_cast<std::streamsize>(rows * sizeof(double)));
        for (std::size_t r = 0; r < rows; ++r) ts.features[r][c] = column[r];
    }
    in.read(reinterpret_cast<char*>(ts.labels.data()), static_cast<std::streamsize>(rows * sizeof(double)));
    if (!in) throw std::runtime_error(path.string() + " is truncated");
    std::ifstream meta(path.string() + ".json");
    if (meta) ts.metadata = nlohmann::json::parse(meta);
    return ts;
}

}  // namespace cspez
