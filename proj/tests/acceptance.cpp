// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gravmatch/gravmatch.hpp"

using namespace gravmatch;

namespace {

// Tolerances and sizes.
constexpr int kOracleInstances = 200;
constexpr double kOracleRelTol = 1e-12;
constexpr double kOracleSeconds = 10.0;
constexpr int kIdentityInstances = 50;
constexpr int kPruneRuns = 50;
constexpr double kPruneTimeRatio = 0.5;
constexpr double kPruneErrorRel = 0.10;
constexpr double kPruneSeconds = 300.0;
constexpr int kSubcellRuns = 50;
constexpr double kSubcellWinFraction = 0.70;
constexpr int kRobustRuns = 100;
constexpr double kRobustMargin = 0.2;
constexpr double kRobustFloor = 0.9;
constexpr double kRobustSeconds = 600.0;
constexpr double kDriftFraction = 0.05;
constexpr double kHaversineTol = 1e-3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Instance {
    GravityMap map;
    SegmentBuffers buffers;
    std::vector<GridWindow> windows;
};

// Random 11x11 map, T-step INS track near the centre, measurements near window values.
Instance random_instance(std::mt19937_64& rng, int n, int T) {
    std::uniform_real_distribution<double> val(-30.0, 30.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    constexpr std::size_t size = 11;
    std::vector<double> v(size * size);
    for (double& x : v) x = kGravityOffsetMgal + val(rng);
    GravityMap map(140.0, -38.0, 0.01, 0.01, size, size, std::move(v));
    const LonLat mid = map.center({size / 2, size / 2});
    LonLat p{mid.lon + 0.004 * unit(rng), mid.lat + 0.004 * unit(rng)};
    SegmentBuffers b;
    for (int t = 0; t < T; ++t) {
        const Velocity vel{unit(rng) * 3.0, unit(rng) * 3.0};
        const GridWindow w = build_window(map, p, n);
        std::uniform_int_distribution<int> pick(1, w.size());
        b.push(w.cell(pick(rng)).gravity + noise(rng), vel, p);
        p = p + displacement(vel, 12.0);
        p.lon = std::clamp(p.lon, mid.lon - 0.02, mid.lon + 0.02);
        p.lat = std::clamp(p.lat, mid.lat - 0.02, mid.lat + 0.02);
    }
    std::vector<GridWindow> windows;
    for (std::size_t t = 0; t < b.size(); ++t) windows.push_back(build_window(map, b.S_ins[t], n, t));
    return {std::move(map), std::move(b), std::move(windows)};
}

std::vector<Instance> oracle_instances(int count) {
    std::mt19937_64 rng(20240601);
    std::vector<Instance> out;
    for (int i = 0; i < count; ++i) out.push_back(random_instance(rng, 3, 4));
    return out;
}

MatchConfig oracle_config() {
    MatchConfig c;
    c.n = 3;
    c.o = 1;
    c.T = 4;
    c.alpha = 0.0;
    c.sigma_z = 1.0;
    c.sigma_v = 9e-6;
    c.dt = 12.0;
    return c;
}

bool same_labels(const PathEstimate& a, const PathEstimate& b) {
    if (a.states.size() != b.states.size()) return false;
    for (std::size_t t = 0; t < a.states.size(); ++t)
        if (a.states[t].j != b.states[t].j || a.states[t].l != b.states[t].l) return false;
    return true;
}

Outcome oracle_equivalence() {
    const auto t0 = Clock::now();
    const auto instances = oracle_instances(kOracleInstances);
    const MatchConfig cfg = oracle_config();
    int mismatches = 0;
    double worst = 0.0;
    for (const auto& inst : instances) {
        const PathEstimate v = viterbi_exact(inst.windows, inst.buffers, cfg);
        const PathEstimate b = brute_force_map(inst.windows, inst.buffers, cfg);
        const double rel = std::abs(v.log_posterior - b.log_posterior) / std::max(1.0, std::abs(b.log_posterior));
        worst = std::max(worst, rel);
        if (!same_labels(v, b) || rel > kOracleRelTol) ++mismatches;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < kOracleSeconds,
            fmt("%d instances, %d mismatches, worst rel diff %.2e, %.2f s", kOracleInstances, mismatches, worst, secs)};
}

Outcome greedy_bound() {
    const auto instances = oracle_instances(kOracleInstances);
    const MatchConfig cfg = oracle_config();
    int violations = 0;
    int strict = 0;
    for (const auto& inst : instances) {
        const double g = vbmp(inst.windows, inst.buffers, cfg).log_posterior;
        const double v = viterbi_exact(inst.windows, inst.buffers, cfg).log_posterior;
        if (g > v) ++violations;
        if (g < v) ++strict;
    }
    return {violations == 0,
            fmt("%d instances, %d violations, greedy strictly below exact on %d", kOracleInstances, violations, strict)};
}

Outcome pruning_identity() {
    std::mt19937_64 rng(77);
    int path_diffs = 0;
    int subset_fails = 0;
    int windows = 0;
    for (int i = 0; i < kIdentityInstances; ++i) {
        const Instance inst = random_instance(rng, 5, 6);
        MatchConfig cfg = oracle_config();
        cfg.n = 5;
        cfg.T = 6;
        const PathEstimate a = vbmp(inst.windows, inst.buffers, cfg);
        cfg.alpha = 0.0;
        const PathEstimate b = rvbmp(inst.windows, inst.buffers, cfg);
        if (!same_labels(a, b) || a.log_posterior != b.log_posterior) ++path_diffs;
        for (std::size_t t = 0; t < inst.windows.size(); ++t) {
            ++windows;
            std::vector<std::vector<int>> sets;
            for (double alpha : {0.2, 0.1, 0.05}) {
                cfg.alpha = alpha;
                sets.push_back(prune(inst.windows[t], inst.buffers.Z[t], cfg));
            }
            if (!std::includes(sets[1].begin(), sets[1].end(), sets[0].begin(), sets[0].end()) ||
                !std::includes(sets[2].begin(), sets[2].end(), sets[1].begin(), sets[1].end()))
                ++subset_fails;
        }
    }
    return {path_diffs == 0 && subset_fails == 0,
            fmt("%d instances: %d path differences; %d windows: %d subset failures", kIdentityInstances, path_diffs,
                windows, subset_fails)};
}

double mean_of(const RunReport& r) { return r.mean_km.value_or(std::numeric_limits<double>::infinity()); }

// Mean of a run's per-step errors.
double run_mean(const RunResult& r) {
    double s = 0.0;
    for (double e : r.errors_km) s += e;
    return s / static_cast<double>(r.errors_km.size());
}

Outcome pruning_speedup() {
    const auto t0 = Clock::now();
    Scenario s;
    s.synth.roughness = Roughness::rough;
    s.algorithm = Algorithm::rvbmp;
    s.o = 1;
    s.n_mc = kPruneRuns;
    const GravityMap map = scenario_map(s);
    s.alpha = 0.0;
    const RunReport full = monte_carlo(s, map, true);
    s.alpha = 0.1;
    const RunReport pruned = monte_carlo(s, map, true);
    const double ratio = *pruned.matcher_seconds / *full.matcher_seconds;
    const double rel = std::abs(mean_of(pruned) - mean_of(full)) / mean_of(full);
    const double secs = seconds_since(t0);
    return {ratio <= kPruneTimeRatio && rel <= kPruneErrorRel && secs < kPruneSeconds,
            fmt("time ratio %.3f, mean %.3f km (alpha 0.1) vs %.3f km (alpha 0), rel diff %.3f, %.1f s", ratio,
                mean_of(pruned), mean_of(full), rel, secs)};
}

Outcome subcell_trend() {
    Scenario s;
    s.synth.roughness = Roughness::smooth;
    s.synth.resolution_deg = 0.01;
    s.algorithm = Algorithm::rvbmp2;
    s.n_mc = kSubcellRuns;
    const GravityMap map = scenario_map(s);
    s.o = 1;
    const RunReport coarse = monte_carlo(s, map);
    s.o = 7;
    const RunReport fine = monte_carlo(s, map);
    double m1 = 0.0, m7 = 0.0;
    int wins = 0;
    for (std::size_t i = 0; i < coarse.runs.size(); ++i) {
        const double a = run_mean(coarse.runs[i]);
        const double b = run_mean(fine.runs[i]);
        m1 += a;
        m7 += b;
        if (b < a) ++wins;
    }
    m1 /= kSubcellRuns;
    m7 /= kSubcellRuns;
    const double frac = static_cast<double>(wins) / kSubcellRuns;
    return {m7 <= m1 && frac >= kSubcellWinFraction,
            fmt("mean %.3f km (o=7) vs %.3f km (o=1); o=7 better on %d/%d seeds (%.2f); success %.2f vs %.2f", m7,
                m1, wins, kSubcellRuns, frac, fine.success_rate, coarse.success_rate)};
}

Outcome robustness() {
    const auto t0 = Clock::now();
    Scenario s;
    s.synth.roughness = Roughness::rough;
    s.sigma_z_mgal = 2.0;
    s.T = 6;
    s.n_mc = kRobustRuns;
    const GravityMap map = scenario_map(s);
    s.algorithm = Algorithm::rvbmp2;
    const RunReport hmm = monte_carlo(s, map);
    s.algorithm = Algorithm::iccp;
    const RunReport iccp = monte_carlo(s, map);
    const double secs = seconds_since(t0);
    return {hmm.success_rate >= iccp.success_rate + kRobustMargin && hmm.success_rate >= kRobustFloor &&
                secs < kRobustSeconds,
            fmt("success rvbmp2(o=%d) %.2f vs iccp %.2f, %.1f s", s.o, hmm.success_rate, iccp.success_rate, secs)};
}

Outcome noise_free_recovery() {
    // Perfect sensors on a track that moves a whole number of sub-cells per step.
    Scenario s;
    s.synth.height_deg = 0.64;
    s.waypoints = {{140.1, -37.7}, {141.1, -37.7}};
    s.speed_deg_per_hr = 7.2;
    s.o = 5;
    s.alpha = 0.0;
    s.sigma_z_mgal = 0.0;
    s.sigma_v_deg_per_s = 0.0;
    s.bias_deg_per_hr = {0.0, 0.0};
    const GravityMap map = scenario_map(s);
    const RunResult exact = run_once(s, map, 1);
    const double half_diag = 0.5 * std::hypot(map.res_lon() / s.o, map.res_lat() / s.o) * kKmPerDegree;
    double worst = 0.0;
    for (std::size_t k = 0; k < exact.errors_km.size(); ++k)
        if (exact.corrected[k]) worst = std::max(worst, exact.errors_km[k]);
    const bool part1 = exact.corrections > 0 && worst <= half_diag;

    // One hour of flight with a 1 deg/h bias, with and without corrections.
    Scenario b = s;
    b.synth.width_deg = 7.4;
    b.waypoints = {{140.1, -37.7}, {147.3, -37.7}};
    b.bias_deg_per_hr = {1.0, 0.0};
    const RunResult drift = [&] {
        Scenario none = b;
        none.algorithm = Algorithm::none;
        return run_once(none, scenario_map(none), 1);
    }();
    const RunResult fixed = run_once(b, scenario_map(b), 1);
    const double limit = kDriftFraction * drift.errors_km.back();
    const bool part2 = fixed.success && fixed.errors_km.back() <= limit;
    return {part1 && part2,
            fmt("noise-free worst %.4f km (limit %.4f, %zu corrections); bias terminal %.3f km vs drift %.2f km "
                "(limit %.3f)",
                worst, half_diag, exact.corrections, fixed.errors_km.back(), drift.errors_km.back(), limit)};
}

Outcome metrics() {
    const double h = haversine_km({0.0, 0.0}, {0.0, 1.0});
    const std::vector<std::vector<double>> runs{{1.0}, {3.0}};
    const double e = mean_error_k(runs)[0];
    return {std::abs(h - 111.195) <= kHaversineTol && e == 2.0, fmt("haversine %.4f km, Error_k %.17g km", h, e)};
}

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto dir = std::filesystem::temp_directory_path() / "gravmatch_acceptance";
    std::filesystem::create_directories(dir);
    bool same = true;
    int files = 0;
    for (Algorithm a : {Algorithm::rvbmp2, Algorithm::iccp}) {
        Scenario s;
        s.algorithm = a;
        s.n_mc = 4;
        s.seed = 99;
        s.threads = 2;
        const GravityMap map = scenario_map(s);
        for (ReportFormat f : {ReportFormat::json, ReportFormat::csv}) {
            const auto p1 = dir / "first.out";
            const auto p2 = dir / "second.out";
            emit_report(monte_carlo(s, map), p1.string(), f);
            emit_report(monte_carlo(s, map), p2.string(), f);
            same = same && read_bytes(p1) == read_bytes(p2) && !read_bytes(p1).empty();
            files += 2;
        }
    }
    std::filesystem::remove_all(dir);
    return {same, fmt("%d report files, byte-identical pairs: %s", files, same ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 oracle equivalence", oracle_equivalence},
        {"2 greedy bound", greedy_bound},
        {"3 pruning identity and monotonicity", pruning_identity},
        {"4 pruning speedup", pruning_speedup},
        {"5 sub-cell improvement", subcell_trend},
        {"6 robustness ordering", robustness},
        {"7 noise-free recovery", noise_free_recovery},
        {"8 metric correctness", metrics},
        {"9 determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o{false, ""};
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s  criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return failed == 0 ? 0 : 1;
}
