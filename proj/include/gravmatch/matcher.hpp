#pragma once

// Hidden-Markov map matching over the cells (and sub-cells) of per-time
// windows. Hidden states are candidate positions, observations are gravity
// measurements, and transitions follow the INS velocity.
//
// Three decoders share one state space and one factorised posterior:
//   - the per-start greedy chain family (vbmp, rvbmp, rvbmp2), which
//     conditions each step on the previously chosen state only;
//   - viterbi_exact, the textbook trellis DP for the global MAP path;
//   - brute_force_map, exhaustive enumeration for small instances.
// All scores are log densities accumulated as
//   meas(1) + sum_{t >= 2} (meas(t) + trans(t)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "gravmatch/error.hpp"
#include "gravmatch/geo.hpp"
#include "gravmatch/insmodel.hpp"
#include "gravmatch/mapgrid.hpp"

namespace gravmatch {

struct MatchConfig {
    int T = 6;
    int n = 13;
    int o = 1;               // sub-cells per axis; 1 disables the second layer
    double alpha = 0.0;      // relative-likelihood pruning threshold
    double sigma_z = 1.0;    // mGal
    double sigma_v = 9e-6;   // deg/s
    double dt = 12.0;        // s

    void validate() const {
        if (T < 1) throw InvalidArgument("segment length must be positive");
        if (n < 3 || n % 2 == 0) throw InvalidArgument("window size must be odd and >= 3");
        if (o < 1 || o % 2 == 0) throw InvalidArgument("sub-cell factor must be odd and >= 1");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
        if (!(sigma_z > 0.0)) throw DegenerateSigma("sigma_z must be positive for matching");
        if (!(sigma_v > 0.0)) throw DegenerateSigma("sigma_v must be positive for matching");
        if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    }
};

struct CandidateState {
    std::size_t t = 0;  // 0-based position inside the segment
    int j = 0;          // window cell label, 1-based
    int l = 0;          // sub-cell label, 1-based
    LonLat position;
    double gravity = 0.0;
};

struct PathEstimate {
    std::vector<CandidateState> states;
    double log_posterior = 0.0;

    std::vector<LonLat> positions() const {
        std::vector<LonLat> out;
        out.reserve(states.size());
        for (const auto& s : states) out.push_back(s.position);
        return out;
    }
};

/// Surviving cell labels per time, each list ascending.
struct PrunedIndexSets {
    std::vector<std::vector<int>> A;
};

struct MatchStats {
    std::size_t chains = 0;
    std::size_t transition_evals = 0;
};

// ---------------------------------------------------------------------------
// Likelihoods

class MeasurementModel {
public:
    explicit MeasurementModel(double sigma_z) {
        if (!(sigma_z > 0.0)) throw DegenerateSigma("sigma_z must be positive");
        norm_ = -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sigma_z);
        inv_two_var_ = 1.0 / (2.0 * sigma_z * sigma_z);
    }

    double operator()(double z, double g) const {
        const double r = z - g;
        return norm_ - r * r * inv_two_var_;
    }

private:
    double norm_ = 0.0;
    double inv_two_var_ = 0.0;
};

/// Isotropic Gaussian over the one-step displacement: mean v * dt, standard
/// deviation sigma_v * dt per axis.
class TransitionModel {
public:
    TransitionModel(double sigma_v, double dt_s) : dt_(dt_s) {
        if (!(sigma_v > 0.0)) throw DegenerateSigma("sigma_v must be positive");
        const double s = sigma_v * dt_s;
        norm_ = -std::log(2.0 * std::numbers::pi) - 2.0 * std::log(s);
        inv_two_var_ = 1.0 / (2.0 * s * s);
    }

    LonLat mean(LonLat prev, Velocity v) const { return prev + displacement(v, dt_); }

    double operator()(LonLat next, LonLat mean) const {
        const LonLat d = next - mean;
        return norm_ - (d.lon * d.lon + d.lat * d.lat) * inv_two_var_;
    }

    double peak() const { return norm_; }

private:
    double dt_;
    double norm_ = 0.0;
    double inv_two_var_ = 0.0;
};

/// log N(z; g, sigma_z^2)
inline double meas_loglik(double z, double g, double sigma_z) { return MeasurementModel(sigma_z)(z, g); }

inline double trans_loglik(LonLat c_next, LonLat c_prev, Velocity v, double dt_s, double sigma_v) {
    const TransitionModel tm(sigma_v, dt_s);
    return tm(c_next, tm.mean(c_prev, v));
}

// ---------------------------------------------------------------------------
// Pruning

/// Labels whose measurement likelihood is at least alpha times the window
/// maximum. The argmax label always survives.
inline std::vector<int> prune(const GridWindow& window, double z, const MatchConfig& cfg) {
    const MeasurementModel mm(cfg.sigma_z);
    std::vector<double> ll(window.cells.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < window.cells.size(); ++i) {
        ll[i] = mm(z, window.cells[i].gravity);
        best = std::max(best, ll[i]);
    }
    std::vector<int> out;
    if (cfg.alpha <= 0.0) {
        for (const auto& c : window.cells) out.push_back(c.label);
        return out;
    }
    const double floor = std::log(cfg.alpha);
    for (std::size_t i = 0; i < window.cells.size(); ++i)
        if (ll[i] - best >= floor) out.push_back(window.cells[i].label);
    return out;
}

inline PrunedIndexSets prune_all(std::span<const GridWindow> windows, const SegmentBuffers& buffers,
                                 const MatchConfig& cfg) {
    if (windows.size() != buffers.size()) throw LengthMismatch("one window per buffered measurement required");
    PrunedIndexSets sets;
    sets.A.reserve(windows.size());
    for (std::size_t t = 0; t < windows.size(); ++t) sets.A.push_back(prune(windows[t], buffers.Z[t], cfg));
    return sets;
}

/// sum_t |A_t| * |A_{t+1}|
inline std::size_t pair_work(const PrunedIndexSets& sets) {
    std::size_t w = 0;
    for (std::size_t t = 0; t + 1 < sets.A.size(); ++t) w += sets.A[t].size() * sets.A[t + 1].size();
    return w;
}

/// (T - 1) * n^4, the unpruned pair count.
inline std::size_t full_pair_work(std::size_t T, std::size_t n) { return T < 2 ? 0 : (T - 1) * n * n * n * n; }

// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kTieTolerance = 1e-9;

// Precomputed per-segment quantities shared by all decoders.
class SegmentModel {
public:
    struct Cell {
        int j;
        LonLat center;
        double gravity;
        double meas;
    };

    SegmentModel(std::span<const GridWindow> windows, const SegmentBuffers& buffers, const PrunedIndexSets& sets,
                 const MatchConfig& cfg)
        : windows_(windows), buffers_(buffers), cfg_(cfg), meas_(cfg.sigma_z), trans_(cfg.sigma_v, cfg.dt) {
        cfg.validate();
        buffers.validate();
        if (windows.empty()) throw EmptyCandidates("empty segment");
        if (windows.size() != buffers.size() || sets.A.size() != windows.size())
            throw LengthMismatch("windows, buffers and pruned sets must share one length");
        cells_.resize(windows.size());
        for (std::size_t t = 0; t < windows.size(); ++t) {
            if (sets.A[t].empty()) throw EmptyCandidates("no surviving cells at t=" + std::to_string(t));
            for (int j : sets.A[t]) {
                const WindowCell& c = windows[t].cell(j);
                cells_[t].push_back({j, c.position, c.gravity, meas_(buffers.Z[t], c.gravity)});
            }
        }
    }

    std::size_t length() const { return windows_.size(); }
    int o() const { return cfg_.o; }
    int h() const { return (cfg_.o - 1) / 2; }
    const std::vector<Cell>& cells(std::size_t t) const { return cells_[t]; }
    const TransitionModel& trans() const { return trans_; }
    const SegmentBuffers& buffers() const { return buffers_; }

    double step_lon(std::size_t t) const { return windows_[t].res_lon / cfg_.o; }
    double step_lat(std::size_t t) const { return windows_[t].res_lat / cfg_.o; }

    LonLat subcell(std::size_t t, const Cell& c, int row_off, int col_off) const {
        return subcell_center(c.center, windows_[t].res_lon, windows_[t].res_lat, cfg_.o, row_off, col_off);
    }

    CandidateState state(std::size_t t, const Cell& c, int l) const {
        const auto [dr, dc] = subcell_offsets(l, cfg_.o);
        return {t, c.j, l, subcell(t, c, dr, dc), c.gravity};
    }

    LonLat transition_mean(std::size_t t, LonLat prev) const { return trans_.mean(prev, buffers_.V[t - 1]); }

private:
    std::span<const GridWindow> windows_;
    const SegmentBuffers& buffers_;
    MatchConfig cfg_;
    MeasurementModel meas_;
    TransitionModel trans_;
    std::vector<std::vector<Cell>> cells_;
};

// Sub-cell offset along one axis nearest to `target`; ties go to the lower
// offset. The Gaussian is separable, so this maximises the transition term
// over all sub-cells of a cell.
inline int nearest_offset(double center, double step, double target, int h) {
    if (h == 0) return 0;
    const double u = std::floor((target - center) / step);
    const int k0 = static_cast<int>(std::clamp(u, static_cast<double>(-h), static_cast<double>(h)));
    const int k1 = std::min(k0 + 1, h);
    const double d0 = std::abs(center + k0 * step - target);
    const double d1 = std::abs(center + k1 * step - target);
    return d1 < d0 ? k1 : k0;
}

inline double ins_distance(std::span<const CandidateState> states, const SegmentBuffers& buffers) {
    double d = 0.0;
    for (const auto& s : states) d += distance_deg(s.position, buffers.S_ins[s.t]);
    return d;
}

inline PathEstimate run_chain(const SegmentModel& model, const CandidateState& start, MatchStats* stats) {
    PathEstimate path;
    path.states.reserve(model.length());
    path.states.push_back(start);
    const auto& first = model.cells(0);
    const auto it = std::find_if(first.begin(), first.end(), [&](const auto& c) { return c.j == start.j; });
    if (it == first.end()) throw InvalidArgument("start cell is not admissible at t=1");
    path.log_posterior = it->meas;
    const int h = model.h();
    for (std::size_t t = 1; t < model.length(); ++t) {
        const LonLat mean = model.transition_mean(t, path.states.back().position);
        const SegmentModel::Cell* best_cell = nullptr;
        int best_r = 0;
        int best_c = 0;
        double best = -std::numeric_limits<double>::infinity();
        LonLat best_pos;
        for (const auto& cell : model.cells(t)) {
            const int dr = nearest_offset(cell.center.lat, model.step_lat(t), mean.lat, h);
            const int dc = nearest_offset(cell.center.lon, model.step_lon(t), mean.lon, h);
            const LonLat pos = model.subcell(t, cell, dr, dc);
            const double score = cell.meas + model.trans()(pos, mean);
            if (score > best || best_cell == nullptr) {
                best = score;
                best_cell = &cell;
                best_r = dr;
                best_c = dc;
                best_pos = pos;
            }
        }
        if (stats) stats->transition_evals += model.cells(t).size();
        const int l = (best_r + h) * model.o() + (best_c + h) + 1;
        path.states.push_back({t, best_cell->j, l, best_pos, best_cell->gravity});
        path.log_posterior += best;
    }
    if (stats) ++stats->chains;
    return path;
}

}  // namespace detail

/// Greedy chain from a fixed start: each step takes the state maximising
/// meas(t) + trans(t | previously chosen state) over j in A_t and every
/// sub-cell. Within-step ties go to the lowest (j, l).
inline PathEstimate greedy_chain(const CandidateState& start, std::span<const GridWindow> windows,
                                 const SegmentBuffers& buffers, const PrunedIndexSets& sets, const MatchConfig& cfg,
                                 MatchStats* stats = nullptr) {
    const detail::SegmentModel model(windows, buffers, sets, cfg);
    return detail::run_chain(model, start, stats);
}

/// Highest log-posterior chain. Chains within 1e-9 of the best are ranked by
/// summed distance to the INS positions, then by lowest start (j, l).
inline const PathEstimate& select_start(std::span<const PathEstimate> chains, const SegmentBuffers& buffers) {
    if (chains.empty()) throw EmptyCandidates("no candidate chains");
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& c : chains) top = std::max(top, c.log_posterior);
    const PathEstimate* best = nullptr;
    double best_dist = 0.0;
    for (const auto& c : chains) {
        if (c.log_posterior < top - detail::kTieTolerance) continue;
        const double d = detail::ins_distance(c.states, buffers);
        if (best == nullptr || d < best_dist ||
            (d == best_dist && std::pair(c.states.front().j, c.states.front().l) <
                                   std::pair(best->states.front().j, best->states.front().l))) {
            best = &c;
            best_dist = d;
        }
    }
    return *best;
}

namespace detail {

inline PathEstimate greedy_match(std::span<const GridWindow> windows, const SegmentBuffers& buffers,
                                 const MatchConfig& cfg, MatchStats* stats) {
    const PrunedIndexSets sets = prune_all(windows, buffers, cfg);
    const SegmentModel model(windows, buffers, sets, cfg);
    std::vector<PathEstimate> chains;
    chains.reserve(model.cells(0).size() * static_cast<std::size_t>(cfg.o * cfg.o));
    for (const auto& cell : model.cells(0))
        for (int l = 1; l <= cfg.o * cfg.o; ++l) chains.push_back(run_chain(model, model.state(0, cell, l), stats));
    return select_start(chains, buffers);
}

}  // namespace detail

/// Greedy chains from every cell of the first window, no pruning, no sub-cells.
inline PathEstimate vbmp(std::span<const GridWindow> windows, const SegmentBuffers& buffers, MatchConfig cfg,
                         MatchStats* stats = nullptr) {
    cfg.alpha = 0.0;
    cfg.o = 1;
    return detail::greedy_match(windows, buffers, cfg, stats);
}

/// Greedy chains restricted to the alpha-pruned cells at every time.
inline PathEstimate rvbmp(std::span<const GridWindow> windows, const SegmentBuffers& buffers, MatchConfig cfg,
                          MatchStats* stats = nullptr) {
    cfg.o = 1;
    return detail::greedy_match(windows, buffers, cfg, stats);
}

/// Pruned greedy chains over (cell, sub-cell) states.
inline PathEstimate rvbmp2(std::span<const GridWindow> windows, const SegmentBuffers& buffers, const MatchConfig& cfg,
                           MatchStats* stats = nullptr) {
    return detail::greedy_match(windows, buffers, cfg, stats);
}

/// Exact MAP path over the same (pruned) state space by trellis dynamic
/// programming. Predecessor ties within 1e-9 prefer the smaller accumulated
/// INS distance, then the lower (j, l).
inline PathEstimate viterbi_exact(std::span<const GridWindow> windows, const SegmentBuffers& buffers,
                                  const MatchConfig& cfg, MatchStats* stats = nullptr) {
    const PrunedIndexSets sets = prune_all(windows, buffers, cfg);
    const detail::SegmentModel model(windows, buffers, sets, cfg);
    const std::size_t T = model.length();
    const int oo = cfg.o * cfg.o;

    std::vector<std::vector<CandidateState>> states(T);
    std::vector<std::vector<double>> meas(T);
    for (std::size_t t = 0; t < T; ++t)
        for (const auto& cell : model.cells(t))
            for (int l = 1; l <= oo; ++l) {
                states[t].push_back(model.state(t, cell, l));
                meas[t].push_back(cell.meas);
            }

    std::vector<std::vector<double>> score(T), dist(T);
    std::vector<std::vector<std::size_t>> back(T);
    score[0] = meas[0];
    for (const auto& s : states[0]) dist[0].push_back(distance_deg(s.position, buffers.S_ins[0]));

    std::vector<LonLat> means;
    std::vector<double> cand;
    for (std::size_t t = 1; t < T; ++t) {
        const auto& prev = states[t - 1];
        means.clear();
        for (const auto& p : prev) means.push_back(model.transition_mean(t, p.position));
        const std::size_t m = states[t].size();
        score[t].resize(m);
        dist[t].resize(m);
        back[t].resize(m);
        cand.resize(prev.size());
        for (std::size_t s = 0; s < m; ++s) {
            const LonLat pos = states[t][s].position;
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < prev.size(); ++q) {
                cand[q] = score[t - 1][q] + (meas[t][s] + model.trans()(pos, means[q]));
                top = std::max(top, cand[q]);
            }
            std::size_t pick = prev.size();
            for (std::size_t q = 0; q < prev.size(); ++q) {
                if (cand[q] < top - detail::kTieTolerance) continue;
                if (pick == prev.size() || dist[t - 1][q] < dist[t - 1][pick]) pick = q;
            }
            score[t][s] = cand[pick];
            back[t][s] = pick;
            dist[t][s] = dist[t - 1][pick] + distance_deg(pos, buffers.S_ins[t]);
        }
        if (stats) stats->transition_evals += m * prev.size();
    }

    const auto& last = score[T - 1];
    const double top = *std::max_element(last.begin(), last.end());
    std::size_t pick = last.size();
    for (std::size_t s = 0; s < last.size(); ++s) {
        if (last[s] < top - detail::kTieTolerance) continue;
        if (pick == last.size() || dist[T - 1][s] < dist[T - 1][pick]) pick = s;
    }

    PathEstimate path;
    path.log_posterior = last[pick];
    path.states.resize(T);
    for (std::size_t t = T; t-- > 0;) {
        path.states[t] = states[t][pick];
        if (t > 0) pick = back[t][pick];
    }
    return path;
}

inline constexpr double kBruteForceLimit = 1e6;

/// Exhaustive MAP search, guarded by (n^2 o^2)^T <= 1e6. Ties within 1e-9
/// go to the smallest summed INS distance, then the lexicographically
/// lowest label sequence.
inline PathEstimate brute_force_map(std::span<const GridWindow> windows, const SegmentBuffers& buffers,
                                    const MatchConfig& cfg, std::size_t* enumerated = nullptr) {
    const double per_step = static_cast<double>(cfg.n) * cfg.n * cfg.o * cfg.o;
    if (std::pow(per_step, static_cast<double>(windows.size())) > kBruteForceLimit)
        throw TooLarge("state space too large for exhaustive search");
    const PrunedIndexSets sets = prune_all(windows, buffers, cfg);
    const detail::SegmentModel model(windows, buffers, sets, cfg);
    const std::size_t T = model.length();
    const int oo = cfg.o * cfg.o;

    std::vector<std::vector<CandidateState>> states(T);
    std::vector<std::vector<double>> meas(T);
    for (std::size_t t = 0; t < T; ++t)
        for (const auto& cell : model.cells(t))
            for (int l = 1; l <= oo; ++l) {
                states[t].push_back(model.state(t, cell, l));
                meas[t].push_back(cell.meas);
            }

    std::vector<std::size_t> idx(T);
    // Visits every sequence in lexicographic label order.
    auto enumerate = [&](auto&& visit) {
        std::function<void(std::size_t, double, double)> rec = [&](std::size_t t, double score, double d) {
            for (std::size_t s = 0; s < states[t].size(); ++s) {
                idx[t] = s;
                const LonLat pos = states[t][s].position;
                double next = meas[t][s];
                if (t > 0) {
                    const LonLat mean = model.transition_mean(t, states[t - 1][idx[t - 1]].position);
                    next = score + (meas[t][s] + model.trans()(pos, mean));
                }
                const double nd = d + distance_deg(pos, buffers.S_ins[t]);
                if (t + 1 == T)
                    visit(next, nd);
                else
                    rec(t + 1, next, nd);
            }
        };
        rec(0, 0.0, 0.0);
    };

    double top = -std::numeric_limits<double>::infinity();
    std::size_t seen = 0;
    enumerate([&](double score, double) {
        top = std::max(top, score);
        ++seen;
    });
    if (enumerated) *enumerated = seen;

    std::vector<std::size_t> best_idx;
    double best_score = 0.0;
    double best_dist = 0.0;
    enumerate([&](double score, double d) {
        if (score < top - detail::kTieTolerance) return;
        if (best_idx.empty() || d < best_dist) {
            best_idx = idx;
            best_score = score;
            best_dist = d;
        }
    });

    PathEstimate path;
    path.log_posterior = best_score;
    for (std::size_t t = 0; t < T; ++t) path.states.push_back(states[t][best_idx[t]]);
    return path;
}

/// Overwrites the navigation log with a matched segment of exactly `T` states.
inline void apply_correction(NavLog& log, const PathEstimate& segment_path, std::size_t T) {
    if (segment_path.states.size() != T)
        throw LengthMismatch("path has " + std::to_string(segment_path.states.size()) + " states, expected " +
                             std::to_string(T));
    const auto positions = segment_path.positions();
    apply_correction(log, std::span<const LonLat>(positions));
}

}  // namespace gravmatch
