#pragma once

// Iterative closest contour point baseline: each gravity measurement defines
// an iso-contour of the map; the INS segment is moved by repeated rigid
// (rotation + translation) fits onto the closest contour points.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "gravmatch/error.hpp"
#include "gravmatch/geo.hpp"
#include "gravmatch/insmodel.hpp"
#include "gravmatch/mapgrid.hpp"
#include "gravmatch/matcher.hpp"

namespace gravmatch {

struct ContourSegment {
    LonLat a;
    LonLat b;
};

/// Iso-contour pieces inside one window.
using Contour = std::vector<ContourSegment>;

/// One contour per trajectory point.
using ContourSet = std::vector<Contour>;

namespace detail {

inline LonLat lerp_crossing(LonLat p0, double v0, LonLat p1, double v1, double z) {
    const double f = (z - v0) / (v1 - v0);
    return {p0.lon + f * (p1.lon - p0.lon), p0.lat + f * (p1.lat - p0.lat)};
}

}  // namespace detail

/// Marching squares over the window's cell-centre lattice at level z, with
/// linear interpolation along edges. A corner counts as above when its value
/// is >= z. Saddles are split by the mean of the four corners: when the mean
/// is above z the two above-corners are joined through the square.
inline Contour extract_contour(const GravityMap& /*map*/, double z, const GridWindow& window) {
    Contour out;
    const int n = window.n;
    auto cell = [&](int r, int c) -> const WindowCell& {
        return window.cells[static_cast<std::size_t>(r * n + c)];
    };
    for (int r = 0; r + 1 < n; ++r) {
        for (int c = 0; c + 1 < n; ++c) {
            // corners counter-clockwise from bottom-left (low row, low col)
            const WindowCell* k[4] = {&cell(r, c), &cell(r, c + 1), &cell(r + 1, c + 1), &cell(r + 1, c)};
            int mask = 0;
            for (int i = 0; i < 4; ++i)
                if (k[i]->gravity >= z) mask |= 1 << i;
            if (mask == 0 || mask == 15) continue;

            // edge e joins corner e and corner (e + 1) % 4
            auto edge = [&](int e) {
                const WindowCell* p = k[e];
                const WindowCell* q = k[(e + 1) % 4];
                return detail::lerp_crossing(p->position, p->gravity, q->position, q->gravity, z);
            };
            if (mask == 5 || mask == 10) {
                const double mean = (k[0]->gravity + k[1]->gravity + k[2]->gravity + k[3]->gravity) / 4.0;
                // Cut off corners 1 and 3 or corners 0 and 2.
                const bool cut_odd = (mask == 5) == (mean >= z);
                if (cut_odd) {
                    out.push_back({edge(0), edge(1)});
                    out.push_back({edge(2), edge(3)});
                } else {
                    out.push_back({edge(3), edge(0)});
                    out.push_back({edge(1), edge(2)});
                }
                continue;
            }
            LonLat pts[2];
            int found = 0;
            for (int e = 0; e < 4; ++e) {
                const bool a = (mask >> e) & 1;
                const bool b = (mask >> ((e + 1) % 4)) & 1;
                if (a != b) pts[found++] = edge(e);
            }
            out.push_back({pts[0], pts[1]});
        }
    }
    return out;
}

inline LonLat closest_point_on_segment(LonLat p, const ContourSegment& s) {
    const LonLat d = s.b - s.a;
    const double len2 = d.lon * d.lon + d.lat * d.lat;
    if (len2 == 0.0) return s.a;
    const double f = std::clamp(((p.lon - s.a.lon) * d.lon + (p.lat - s.a.lat) * d.lat) / len2, 0.0, 1.0);
    return s.a + f * d;
}

inline LonLat closest_point(LonLat p, const Contour& contour) {
    if (contour.empty()) throw NoContour("empty contour");
    LonLat best = closest_point_on_segment(p, contour.front());
    double best_d = distance_deg(p, best);
    for (std::size_t i = 1; i < contour.size(); ++i) {
        const LonLat q = closest_point_on_segment(p, contour[i]);
        const double d = distance_deg(p, q);
        if (d < best_d) {
            best = q;
            best_d = d;
        }
    }
    return best;
}

inline std::vector<LonLat> closest_points(std::span<const LonLat> traj, const ContourSet& contours) {
    if (traj.size() != contours.size()) throw LengthMismatch("one contour per trajectory point required");
    std::vector<LonLat> out;
    out.reserve(traj.size());
    for (std::size_t t = 0; t < traj.size(); ++t) {
        if (contours[t].empty()) throw NoContour("no contour at t=" + std::to_string(t));
        out.push_back(closest_point(traj[t], contours[t]));
    }
    return out;
}

/// p -> R(theta) p + translation, rotation about the degree-space origin.
struct RigidTransform {
    double theta = 0.0;
    LonLat translation;

    LonLat apply(LonLat p) const {
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        return {c * p.lon - s * p.lat + translation.lon, s * p.lon + c * p.lat + translation.lat};
    }

    LonLat invert(LonLat q) const {
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        const LonLat d = q - translation;
        return {c * d.lon + s * d.lat, -s * d.lon + c * d.lat};
    }
};

/// Least-squares rigid alignment of src onto dst (2-D orthogonal Procrustes).
inline RigidTransform fit_rigid(std::span<const LonLat> src, std::span<const LonLat> dst) {
    if (src.size() != dst.size()) throw LengthMismatch("point sets differ in size");
    if (src.size() < 2) throw Degenerate("need at least two point pairs");
    const double n = static_cast<double>(src.size());
    LonLat cs, cd;
    for (std::size_t i = 0; i < src.size(); ++i) {
        cs = cs + src[i];
        cd = cd + dst[i];
    }
    cs = (1.0 / n) * cs;
    cd = (1.0 / n) * cd;

    double dot = 0.0;
    double cross = 0.0;
    double spread = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const LonLat a = src[i] - cs;
        const LonLat b = dst[i] - cd;
        dot += a.lon * b.lon + a.lat * b.lat;
        cross += a.lon * b.lat - a.lat * b.lon;
        spread += a.lon * a.lon + a.lat * a.lat;
    }
    if (spread == 0.0) throw Degenerate("source points coincide");

    RigidTransform tr;
    tr.theta = std::atan2(cross, dot);
    const double c = std::cos(tr.theta);
    const double s = std::sin(tr.theta);
    tr.translation = {cd.lon - (c * cs.lon - s * cs.lat), cd.lat - (s * cs.lon + c * cs.lat)};
    return tr;
}

struct IccpOptions {
    int max_iter = 50;
    double tol = 1e-6;  // degrees, largest per-point move of one update
};

struct IccpTrace {
    int iterations = 0;
    std::vector<double> objective;  // sum of squared closest-point distances before each fit
    RigidTransform total;           // maps the INS segment onto the result
};

inline ContourSet extract_contours(const GravityMap& map, std::span<const GridWindow> windows,
                                   std::span<const double> z) {
    ContourSet out;
    out.reserve(windows.size());
    for (std::size_t t = 0; t < windows.size(); ++t) out.push_back(extract_contour(map, z[t], windows[t]));
    return out;
}

/// Aligns the INS segment to the measurement iso-contours. Contours are
/// extracted once, in n x n windows around the INS positions.
inline PathEstimate iccp_match(const SegmentBuffers& buffers, const GravityMap& map, const MatchConfig& cfg,
                               const IccpOptions& opts = {}, IccpTrace* trace = nullptr) {
    buffers.validate();
    if (buffers.size() < 2) throw InvalidArgument("ICCP needs at least two points");
    std::vector<GridWindow> windows;
    windows.reserve(buffers.size());
    for (std::size_t t = 0; t < buffers.size(); ++t) windows.push_back(build_window(map, buffers.S_ins[t], cfg.n, t));
    const ContourSet contours = extract_contours(map, windows, buffers.Z);

    const std::vector<LonLat> start = buffers.S_ins;
    std::vector<LonLat> traj = start;
    IccpTrace local;
    IccpTrace& tr = trace ? *trace : local;
    tr = IccpTrace{};
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        const std::vector<LonLat> target = closest_points(traj, contours);
        double obj = 0.0;
        for (std::size_t t = 0; t < traj.size(); ++t) {
            const LonLat d = traj[t] - target[t];
            obj += d.lon * d.lon + d.lat * d.lat;
        }
        tr.objective.push_back(obj);
        const RigidTransform step = fit_rigid(traj, target);
        double moved = 0.0;
        for (auto& p : traj) {
            const LonLat q = step.apply(p);
            moved = std::max(moved, distance_deg(p, q));
            p = q;
        }
        ++tr.iterations;
        if (moved < opts.tol) break;
    }
    tr.total = fit_rigid(start, traj);

    PathEstimate path;
    for (std::size_t t = 0; t < traj.size(); ++t) path.states.push_back({t, 0, 0, traj[t], 0.0});
    return path;
}

}  // namespace gravmatch
