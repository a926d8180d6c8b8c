#pragma once

// Truth trajectories, INS velocity and gravimeter error models, dead
// reckoning, segment buffering and correction reset.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "gravmatch/error.hpp"
#include "gravmatch/geo.hpp"
#include "gravmatch/mapgrid.hpp"

namespace gravmatch {

/// Deterministic random stream. Gaussian draws use Box-Muller on 53-bit
/// uniforms so sequences do not depend on the standard library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in (0, 1].
    double uniform() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

    double gaussian() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

struct TruthState {
    LonLat position;
    Velocity velocity;  // carries this state to the next one
};

struct SensorConfig {
    Velocity bias;            // deg/h
    double sigma_v = 0.0;     // deg/s, per axis
    double sigma_z = 0.0;     // mGal
    double dt = 12.0;         // s
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(sigma_v >= 0.0) || !(sigma_z >= 0.0)) throw InvalidArgument("sensor sigmas must be non-negative");
        if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    }
};

/// Straight legs in degree space at constant speed. Sampling restarts at
/// every waypoint, so each waypoint is a state and the last step of a leg
/// may be shorter than speed * dt. The final partial step is dropped.
inline std::vector<TruthState> simulate_truth(std::span<const LonLat> waypoints, double speed_deg_per_hr,
                                              double dt_s) {
    if (waypoints.size() < 2) throw InvalidArgument("need at least two waypoints");
    if (!(speed_deg_per_hr > 0.0)) throw InvalidArgument("speed must be positive");
    if (!(dt_s > 0.0)) throw InvalidArgument("dt must be positive");

    const double step = speed_deg_per_hr * dt_s / kSecondsPerHour;
    std::vector<TruthState> out;
    for (std::size_t leg = 0; leg + 1 < waypoints.size(); ++leg) {
        const LonLat a = waypoints[leg];
        const LonLat b = waypoints[leg + 1];
        const double len = distance_deg(a, b);
        if (len == 0.0) continue;
        const LonLat dir{(b.lon - a.lon) / len, (b.lat - a.lat) / len};
        const Velocity v{dir.lon * speed_deg_per_hr, dir.lat * speed_deg_per_hr};
        const bool last_leg = leg + 2 == waypoints.size();
        for (std::size_t i = 0;; ++i) {
            const double s = static_cast<double>(i) * step;
            if (s > len) break;
            TruthState st{a + s * dir, v};
            if (!last_leg && s + step >= len) {
                // short hop onto the next waypoint
                const double hours = dt_s / kSecondsPerHour;
                st.velocity = {(b.lon - st.position.lon) / hours, (b.lat - st.position.lat) / hours};
                out.push_back(st);
                break;
            }
            out.push_back(st);
        }
    }
    if (out.empty()) throw InvalidArgument("waypoints do not span any distance");
    return out;
}

/// v = v0 + b + eta, eta ~ N(0, (3600 sigma_v)^2 I) in deg/h.
inline Velocity measure_velocity(const TruthState& truth, const SensorConfig& cfg, Rng& rng) {
    const double s = cfg.sigma_v * kSecondsPerHour;
    const double ex = rng.gaussian();
    const double ey = rng.gaussian();
    return {truth.velocity.lon + cfg.bias.lon + s * ex, truth.velocity.lat + cfg.bias.lat + s * ey};
}

inline double measure_gravity(const GravityMap& map, LonLat truth_pos, double sigma_z, Rng& rng) {
    const double g = lookup(map, truth_pos);
    return g + sigma_z * rng.gaussian();
}

/// positions[t] = anchor + sum_{u <= t} velocities[u] * dt.
inline std::vector<LonLat> dead_reckon(LonLat anchor, std::span<const Velocity> velocities, double dt_s) {
    if (velocities.empty()) throw InvalidArgument("dead_reckon needs at least one velocity");
    std::vector<LonLat> out;
    out.reserve(velocities.size());
    LonLat p = anchor;
    for (const Velocity& v : velocities) {
        p = p + displacement(v, dt_s);
        out.push_back(p);
    }
    return out;
}

/// Measurements and INS positions collected between two corrections.
struct SegmentBuffers {
    std::vector<double> Z;
    std::vector<Velocity> V;
    std::vector<LonLat> S_ins;

    std::size_t size() const { return Z.size(); }

    void push(double z, Velocity v, LonLat s) {
        Z.push_back(z);
        V.push_back(v);
        S_ins.push_back(s);
    }

    void clear() {
        Z.clear();
        V.clear();
        S_ins.clear();
    }

    void validate() const {
        if (V.size() != Z.size() || S_ins.size() != Z.size()) throw LengthMismatch("segment buffers differ in length");
    }
};

struct NavRecord {
    LonLat truth;
    LonLat ins;       // dead-reckoned position
    LonLat estimate;  // navigation output; replaced by the matcher once corrected
    Velocity velocity;
    double gravity = 0.0;
    bool corrected = false;
};

/// Per-step navigation history plus the dead-reckoning anchor.
struct NavLog {
    std::vector<NavRecord> records;
    LonLat anchor;  // last navigation position

    explicit NavLog(LonLat start = {}) : anchor(start) {}

    /// Next dead-reckoned position: the anchor advanced by the previous
    /// step's measured velocity (the anchor itself for the first step).
    LonLat next_ins(double dt_s) const {
        if (records.empty()) return anchor;
        return anchor + displacement(records.back().velocity, dt_s);
    }

    /// Appends a step whose INS position is next_ins(dt_s).
    const NavRecord& advance(LonLat truth, Velocity v_meas, double z_meas, double dt_s) {
        const LonLat ins = next_ins(dt_s);
        records.push_back({truth, ins, ins, v_meas, z_meas, false});
        anchor = ins;
        return records.back();
    }
};

/// Overwrites the last `path.size()` navigation positions with the matched
/// path and re-anchors dead reckoning on its final position.
inline void apply_correction(NavLog& log, std::span<const LonLat> path) {
    if (path.empty() || path.size() > log.records.size())
        throw LengthMismatch("correction of length " + std::to_string(path.size()) + " against " +
                             std::to_string(log.records.size()) + " logged steps");
    const std::size_t first = log.records.size() - path.size();
    for (std::size_t i = 0; i < path.size(); ++i) {
        log.records[first + i].estimate = path[i];
        log.records[first + i].corrected = true;
    }
    log.anchor = path.back();
}

}  // namespace gravmatch
