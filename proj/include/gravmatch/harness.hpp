#pragma once

// Scenario configuration, single runs, Monte Carlo batches, metrics and
// report emission.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gravmatch/error.hpp"
#include "gravmatch/geo.hpp"
#include "gravmatch/iccp.hpp"
#include "gravmatch/insmodel.hpp"
#include "gravmatch/mapgrid.hpp"
#include "gravmatch/matcher.hpp"

namespace gravmatch {

/// Equatorial arc length of one degree.
inline constexpr double kKmPerDegree = std::numbers::pi * kEarthRadiusKm / 180.0;

enum class Algorithm { none, vbmp, rvbmp, rvbmp2, viterbi_exact, iccp };

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::none: return "none";
        case Algorithm::vbmp: return "vbmp";
        case Algorithm::rvbmp: return "rvbmp";
        case Algorithm::rvbmp2: return "rvbmp2";
        case Algorithm::viterbi_exact: return "viterbi_exact";
        case Algorithm::iccp: return "iccp";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
    for (Algorithm a : {Algorithm::none, Algorithm::vbmp, Algorithm::rvbmp, Algorithm::rvbmp2,
                        Algorithm::viterbi_exact, Algorithm::iccp})
        if (to_string(a) == s) return a;
    throw InvalidArgument("unknown algorithm '" + s + "'");
}

// ---------------------------------------------------------------------------
// Scenario

using KeyValues = std::map<std::string, std::string>;

struct Scenario {
    std::string map_path;  // empty: synthesise from `synth`
    SynthMapParams synth;
    std::size_t map_downsample = 1;

    std::vector<LonLat> waypoints{{140.15, -37.85}, {141.13, -36.87}};
    double speed_deg_per_hr = 7.54;
    double dt_s = 12.0;

    int T = 6;
    int n = 13;
    int o = 7;
    double alpha = 0.1;

    double sigma_z_mgal = 1.0;
    double sigma_v_deg_per_s = 9e-6;
    Velocity bias_deg_per_hr{1.0, 0.0};

    // Matcher noise model; defaults to the sensor values, floored when a
    // sensor is simulated noise-free.
    std::optional<double> matcher_sigma_z_mgal;
    std::optional<double> matcher_sigma_v_deg_per_s;

    int n_mc = 1;
    std::uint64_t seed = 1;
    Algorithm algorithm = Algorithm::rvbmp2;
    std::optional<double> threshold_km;

    int iccp_max_iter = 50;
    double iccp_tol_deg = 1e-6;
    int threads = 1;

    MatchConfig match_config() const {
        MatchConfig c;
        c.T = T;
        c.n = n;
        c.o = o;
        c.alpha = alpha;
        c.sigma_z = matcher_sigma_z_mgal.value_or(sigma_z_mgal > 0.0 ? sigma_z_mgal : 0.1);
        c.sigma_v = matcher_sigma_v_deg_per_s.value_or(sigma_v_deg_per_s > 0.0 ? sigma_v_deg_per_s : 9e-7);
        c.dt = dt_s;
        return c;
    }

    SensorConfig sensor_config(std::uint64_t run_seed) const {
        return {bias_deg_per_hr, sigma_v_deg_per_s, sigma_z_mgal, dt_s, run_seed};
    }

    /// Default: half the window extent, (n / 2) * max(Rx, Ry) in km.
    double divergence_threshold_km(const GravityMap& map) const {
        if (threshold_km) return *threshold_km;
        return (n / 2.0) * std::max(map.res_lon(), map.res_lat()) * kKmPerDegree;
    }

    void validate() const {
        if (T < 1) throw InvalidArgument("T must be positive");
        if (n_mc < 1) throw InvalidArgument("n_mc must be >= 1");
        if (threads < 1) throw InvalidArgument("threads must be >= 1");
        if (map_downsample < 1) throw InvalidArgument("map_downsample must be >= 1");
        sensor_config(seed).validate();
        if (algorithm != Algorithm::none) match_config().validate();
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double to_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw InvalidArgument(key + ": expected a number, got '" + s + "'");
    return v;
}

template <class Int>
Int to_int(const std::string& key, const std::string& s) {
    Int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InvalidArgument(key + ": expected an integer, got '" + s + "'");
    return v;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(s);
    while (std::getline(ss, field, sep)) out.push_back(trim(field));
    return out;
}

inline LonLat to_pair(const std::string& key, const std::string& s) {
    const auto f = split(s, ',');
    if (f.size() != 2) throw InvalidArgument(key + ": expected 'lon,lat', got '" + s + "'");
    return {to_double(key, f[0]), to_double(key, f[1])};
}

}  // namespace detail

/// key=value lines; '#' starts a comment.
inline KeyValues parse_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(lineno) + " has no '='");
        kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    return kv;
}

inline KeyValues load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config " + path);
    return parse_key_values(in);
}

inline void apply_key_values(Scenario& s, const KeyValues& kv) {
    using detail::to_double;
    for (const auto& [key, value] : kv) {
        if (key == "map") s.map_path = value;
        else if (key == "map_origin_lon") s.synth.origin.lon = to_double(key, value);
        else if (key == "map_origin_lat") s.synth.origin.lat = to_double(key, value);
        else if (key == "map_width_deg") s.synth.width_deg = to_double(key, value);
        else if (key == "map_height_deg") s.synth.height_deg = to_double(key, value);
        else if (key == "map_res_deg") s.synth.resolution_deg = to_double(key, value);
        else if (key == "map_roughness") {
            if (value == "rough") s.synth.roughness = Roughness::rough;
            else if (value == "smooth") s.synth.roughness = Roughness::smooth;
            else throw InvalidArgument("map_roughness must be rough or smooth");
        } else if (key == "map_seed") s.synth.seed = detail::to_int<std::uint64_t>(key, value);
        else if (key == "map_downsample") s.map_downsample = detail::to_int<std::size_t>(key, value);
        else if (key == "waypoints") {
            s.waypoints.clear();
            for (const auto& wp : detail::split(value, ';'))
                if (!wp.empty()) s.waypoints.push_back(detail::to_pair(key, wp));
        } else if (key == "speed_deg_per_hr") s.speed_deg_per_hr = to_double(key, value);
        else if (key == "dt_s") s.dt_s = to_double(key, value);
        else if (key == "T") s.T = detail::to_int<int>(key, value);
        else if (key == "n") s.n = detail::to_int<int>(key, value);
        else if (key == "o") s.o = detail::to_int<int>(key, value);
        else if (key == "alpha") s.alpha = to_double(key, value);
        else if (key == "sigma_z_mgal") s.sigma_z_mgal = to_double(key, value);
        else if (key == "sigma_v_deg_per_s") s.sigma_v_deg_per_s = to_double(key, value);
        else if (key == "bias_deg_per_hr") {
            if (value.find(',') == std::string::npos) {
                s.bias_deg_per_hr = {to_double(key, value), 0.0};
            } else {
                const LonLat b = detail::to_pair(key, value);
                s.bias_deg_per_hr = {b.lon, b.lat};
            }
        } else if (key == "matcher_sigma_z_mgal") s.matcher_sigma_z_mgal = to_double(key, value);
        else if (key == "matcher_sigma_v_deg_per_s") s.matcher_sigma_v_deg_per_s = to_double(key, value);
        else if (key == "n_mc") s.n_mc = detail::to_int<int>(key, value);
        else if (key == "seed") s.seed = detail::to_int<std::uint64_t>(key, value);
        else if (key == "algorithm") s.algorithm = parse_algorithm(value);
        else if (key == "threshold_km") s.threshold_km = to_double(key, value);
        else if (key == "iccp_max_iter") s.iccp_max_iter = detail::to_int<int>(key, value);
        else if (key == "iccp_tol_deg") s.iccp_tol_deg = to_double(key, value);
        else if (key == "threads") s.threads = detail::to_int<int>(key, value);
        else throw InvalidArgument("unknown config key '" + key + "'");
    }
}

inline Scenario scenario_from(const KeyValues& kv) {
    Scenario s;
    apply_key_values(s, kv);
    return s;
}

/// Canonical key=value echo of a scenario (no threads: it never changes results).
inline KeyValues to_key_values(const Scenario& s) {
    using detail::format_double;
    KeyValues kv;
    if (!s.map_path.empty()) {
        kv["map"] = s.map_path;
    } else {
        kv["map_origin_lon"] = format_double(s.synth.origin.lon);
        kv["map_origin_lat"] = format_double(s.synth.origin.lat);
        kv["map_width_deg"] = format_double(s.synth.width_deg);
        kv["map_height_deg"] = format_double(s.synth.height_deg);
        kv["map_res_deg"] = format_double(s.synth.resolution_deg);
        kv["map_roughness"] = s.synth.roughness == Roughness::rough ? "rough" : "smooth";
        kv["map_seed"] = std::to_string(s.synth.seed);
    }
    kv["map_downsample"] = std::to_string(s.map_downsample);
    std::string wps;
    for (const auto& w : s.waypoints) {
        if (!wps.empty()) wps += ';';
        wps += format_double(w.lon) + ',' + format_double(w.lat);
    }
    kv["waypoints"] = wps;
    kv["speed_deg_per_hr"] = format_double(s.speed_deg_per_hr);
    kv["dt_s"] = format_double(s.dt_s);
    kv["T"] = std::to_string(s.T);
    kv["n"] = std::to_string(s.n);
    kv["o"] = std::to_string(s.o);
    kv["alpha"] = format_double(s.alpha);
    kv["sigma_z_mgal"] = format_double(s.sigma_z_mgal);
    kv["sigma_v_deg_per_s"] = format_double(s.sigma_v_deg_per_s);
    kv["bias_deg_per_hr"] = format_double(s.bias_deg_per_hr.lon) + ',' + format_double(s.bias_deg_per_hr.lat);
    if (s.matcher_sigma_z_mgal) kv["matcher_sigma_z_mgal"] = format_double(*s.matcher_sigma_z_mgal);
    if (s.matcher_sigma_v_deg_per_s) kv["matcher_sigma_v_deg_per_s"] = format_double(*s.matcher_sigma_v_deg_per_s);
    kv["n_mc"] = std::to_string(s.n_mc);
    kv["seed"] = std::to_string(s.seed);
    kv["algorithm"] = to_string(s.algorithm);
    if (s.threshold_km) kv["threshold_km"] = format_double(*s.threshold_km);
    kv["iccp_max_iter"] = std::to_string(s.iccp_max_iter);
    kv["iccp_tol_deg"] = format_double(s.iccp_tol_deg);
    return kv;
}

inline GravityMap scenario_map(const Scenario& s) {
    GravityMap m = s.map_path.empty() ? synth_map(s.synth) : load_any_map(s.map_path);
    return downsample(m, s.map_downsample);
}

// ---------------------------------------------------------------------------
// Metrics

/// Per-step Haversine distance in km.
inline std::vector<double> error_k(std::span<const LonLat> truth, std::span<const LonLat> estimate) {
    if (truth.size() != estimate.size()) throw LengthMismatch("trajectories differ in length");
    std::vector<double> out;
    out.reserve(truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k) out.push_back(haversine_km(truth[k], estimate[k]));
    return out;
}

/// Error_k across runs: the arithmetic mean of the runs' step-k distances.
inline std::vector<double> mean_error_k(std::span<const std::vector<double>> runs) {
    if (runs.empty()) return {};
    std::vector<double> out(runs.front().size(), 0.0);
    for (const auto& r : runs) {
        if (r.size() != out.size()) throw LengthMismatch("runs differ in length");
        for (std::size_t k = 0; k < r.size(); ++k) out[k] += r[k];
    }
    for (double& v : out) v /= static_cast<double>(runs.size());
    return out;
}

struct SeriesSummary {
    double mean = 0.0;
    double std_dev = 0.0;  // sample (L - 1) standard deviation
};

inline SeriesSummary summarize(std::span<const double> xs) {
    SeriesSummary s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return s;
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std_dev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return s;
}

// ---------------------------------------------------------------------------
// Runs

struct RunResult {
    std::uint64_t seed = 0;
    bool success = true;
    std::vector<double> errors_km;  // one per step
    std::vector<bool> corrected;    // step covered by a completed segment
    double matcher_seconds = 0.0;
    std::size_t corrections = 0;
    std::string failure;  // why the matcher gave up, empty otherwise

    friend bool operator==(const RunResult&, const RunResult&) = default;
};

/// Success iff every post-correction step error is strictly below the threshold.
inline bool divergence_check(const RunResult& result, double threshold_km) {
    for (std::size_t k = 0; k < result.errors_km.size(); ++k)
        if (result.corrected[k] && !(result.errors_km[k] < threshold_km)) return false;
    return true;
}

struct RunTrace {
    NavLog log;
    std::vector<std::vector<GridWindow>> windows;  // per correction
};

/// Runs the configured matcher on one full segment.
inline PathEstimate match_segment(const Scenario& s, const GravityMap& map, const SegmentBuffers& buffers,
                                  std::vector<GridWindow>* windows_out = nullptr) {
    const MatchConfig cfg = s.match_config();
    if (s.algorithm == Algorithm::iccp)
        return iccp_match(buffers, map, cfg, IccpOptions{s.iccp_max_iter, s.iccp_tol_deg});
    std::vector<GridWindow> windows;
    windows.reserve(buffers.size());
    for (std::size_t t = 0; t < buffers.size(); ++t) windows.push_back(build_window(map, buffers.S_ins[t], cfg.n, t));
    PathEstimate path;
    switch (s.algorithm) {
        case Algorithm::vbmp: path = vbmp(windows, buffers, cfg); break;
        case Algorithm::rvbmp: path = rvbmp(windows, buffers, cfg); break;
        case Algorithm::rvbmp2: path = rvbmp2(windows, buffers, cfg); break;
        case Algorithm::viterbi_exact: path = viterbi_exact(windows, buffers, cfg); break;
        default: throw InvalidArgument("no matcher for algorithm " + to_string(s.algorithm));
    }
    if (windows_out) *windows_out = std::move(windows);
    return path;
}

/// Simulates truth and INS, corrects every T steps with the configured
/// matcher and records the per-step error of the navigation output. A
/// matcher failure (window off the map, no contour) marks the run divergent
/// and the remaining steps are dead-reckoned.
inline RunResult run_once(const Scenario& s, const GravityMap& map, std::uint64_t seed, RunTrace* trace = nullptr) {
    s.validate();
    const auto truth = simulate_truth(s.waypoints, s.speed_deg_per_hr, s.dt_s);
    const SensorConfig sensors = s.sensor_config(seed);
    Rng rng(seed);

    RunResult result;
    result.seed = seed;
    NavLog log(truth.front().position);
    SegmentBuffers buffers;
    bool matching = s.algorithm != Algorithm::none;
    const auto T = static_cast<std::size_t>(s.T);

    for (const TruthState& state : truth) {
        const Velocity v = measure_velocity(state, sensors, rng);
        const double z = measure_gravity(map, state.position, sensors.sigma_z, rng);
        const NavRecord& rec = log.advance(state.position, v, z, s.dt_s);
        if (!matching) continue;
        buffers.push(z, v, rec.ins);
        if (buffers.size() < T) continue;

        std::vector<GridWindow> windows;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const PathEstimate path = match_segment(s, map, buffers, trace ? &windows : nullptr);
            result.matcher_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            apply_correction(log, path, T);
            ++result.corrections;
            if (trace) trace->windows.push_back(std::move(windows));
        } catch (const WindowClipped& e) {
            result.failure = e.what();
        } catch (const NoContour& e) {
            result.failure = e.what();
        } catch (const OutOfBounds& e) {
            result.failure = e.what();
        }
        if (!result.failure.empty()) {
            result.matcher_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.success = false;
            matching = false;
        }
        buffers.clear();
    }

    std::vector<LonLat> truth_pos, est;
    for (const auto& r : log.records) {
        truth_pos.push_back(r.truth);
        est.push_back(r.estimate);
        result.corrected.push_back(r.corrected);
    }
    result.errors_km = error_k(truth_pos, est);
    result.success = result.success && divergence_check(result, s.divergence_threshold_km(map));
    if (trace) trace->log = std::move(log);
    return result;
}

// ---------------------------------------------------------------------------
// Reports

struct RunReport {
    std::string algorithm;
    double dt_s = 0.0;
    std::size_t n_runs = 0;
    std::size_t n_success = 0;
    double success_rate = 0.0;
    std::vector<double> error_k_km;      // mean over successful runs
    std::vector<double> error_k_std_km;  // sample spread over successful runs
    std::optional<double> mean_km;
    std::optional<double> std_km;
    std::optional<double> matcher_seconds;  // only when timing is requested
    std::optional<double> tcr;
    std::string tcr_reference;
    std::vector<RunResult> runs;
    KeyValues config;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

/// Aggregates runs; Error_k, Mean and StdDev use successful runs only.
inline RunReport aggregate(const Scenario& s, std::vector<RunResult> runs, bool with_timing) {
    RunReport rep;
    rep.algorithm = to_string(s.algorithm);
    rep.dt_s = s.dt_s;
    rep.n_runs = runs.size();
    std::vector<std::vector<double>> ok;
    double seconds = 0.0;
    for (const auto& r : runs) {
        seconds += r.matcher_seconds;
        if (r.success) ok.push_back(r.errors_km);
    }
    rep.n_success = ok.size();
    rep.success_rate = runs.empty() ? 0.0 : static_cast<double>(ok.size()) / static_cast<double>(runs.size());
    rep.error_k_km = mean_error_k(ok);
    rep.error_k_std_km.assign(rep.error_k_km.size(), 0.0);
    if (ok.size() > 1) {
        for (std::size_t k = 0; k < rep.error_k_km.size(); ++k) {
            double ss = 0.0;
            for (const auto& e : ok) ss += (e[k] - rep.error_k_km[k]) * (e[k] - rep.error_k_km[k]);
            rep.error_k_std_km[k] = std::sqrt(ss / static_cast<double>(ok.size() - 1));
        }
    }
    if (!rep.error_k_km.empty()) {
        const SeriesSummary sum = summarize(rep.error_k_km);
        rep.mean_km = sum.mean;
        rep.std_km = sum.std_dev;
    }
    if (with_timing) rep.matcher_seconds = seconds;
    for (auto& r : runs) r.matcher_seconds = with_timing ? r.matcher_seconds : 0.0;
    rep.runs = std::move(runs);
    rep.config = to_key_values(s);
    return rep;
}

/// n_mc runs with seeds seed, seed + 1, ... Runs are independent, so they
/// may execute on several threads; results are kept in seed order.
inline std::vector<RunResult> run_batch(const Scenario& s, const GravityMap& map) {
    s.validate();
    std::vector<RunResult> runs(static_cast<std::size_t>(s.n_mc));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < runs.size(); i = next++) runs[i] = run_once(s, map, s.seed + i);
    };
    const int workers = std::min(s.threads, s.n_mc);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    return runs;
}

inline RunReport monte_carlo(const Scenario& s, const GravityMap& map, bool with_timing = false) {
    return aggregate(s, run_batch(s, map), with_timing);
}

/// Sets report.tcr = report time / reference time.
inline void attach_tcr(RunReport& report, const RunReport& reference, const std::string& reference_name) {
    if (!report.matcher_seconds || !reference.matcher_seconds)
        throw InvalidArgument("TCR needs timed reports");
    report.tcr = *report.matcher_seconds / *reference.matcher_seconds;
    report.tcr_reference = reference_name;
}

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> json_opt(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const RunReport& r) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : r.runs) {
        runs.push_back({{"seed", run.seed},
                        {"success", run.success},
                        {"corrections", run.corrections},
                        {"failure", run.failure},
                        {"matcher_seconds", run.matcher_seconds},
                        {"corrected", run.corrected},
                        {"errors_km", run.errors_km}});
    }
    return {{"algorithm", r.algorithm},
            {"dt_s", r.dt_s},
            {"n_runs", r.n_runs},
            {"n_success", r.n_success},
            {"success_rate", r.success_rate},
            {"mean_km", detail::opt_json(r.mean_km)},
            {"std_km", detail::opt_json(r.std_km)},
            {"matcher_seconds", detail::opt_json(r.matcher_seconds)},
            {"tcr", detail::opt_json(r.tcr)},
            {"tcr_reference", r.tcr_reference},
            {"error_k_km", r.error_k_km},
            {"error_k_std_km", r.error_k_std_km},
            {"runs", runs},
            {"config", r.config}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.algorithm = j.at("algorithm").get<std::string>();
    r.dt_s = j.at("dt_s").get<double>();
    r.n_runs = j.at("n_runs").get<std::size_t>();
    r.n_success = j.at("n_success").get<std::size_t>();
    r.success_rate = j.at("success_rate").get<double>();
    r.mean_km = detail::json_opt(j.at("mean_km"));
    r.std_km = detail::json_opt(j.at("std_km"));
    r.matcher_seconds = detail::json_opt(j.at("matcher_seconds"));
    r.tcr = detail::json_opt(j.at("tcr"));
    r.tcr_reference = j.at("tcr_reference").get<std::string>();
    r.error_k_km = j.at("error_k_km").get<std::vector<double>>();
    r.error_k_std_km = j.at("error_k_std_km").get<std::vector<double>>();
    for (const auto& jr : j.at("runs")) {
        RunResult run;
        run.seed = jr.at("seed").get<std::uint64_t>();
        run.success = jr.at("success").get<bool>();
        run.corrections = jr.at("corrections").get<std::size_t>();
        run.failure = jr.at("failure").get<std::string>();
        run.matcher_seconds = jr.at("matcher_seconds").get<double>();
        run.corrected = jr.at("corrected").get<std::vector<bool>>();
        run.errors_km = jr.at("errors_km").get<std::vector<double>>();
        r.runs.push_back(std::move(run));
    }
    r.config = j.at("config").get<KeyValues>();
    return r;
}

enum class ReportFormat { csv, json };

/// CSV: step, time_s, error_km_mean, error_km_std. JSON: the full report.
inline std::string render_report(const RunReport& r, ReportFormat format) {
    if (format == ReportFormat::json) return to_json(r).dump(2) + "\n";
    std::string out = "step,time_s,error_km_mean,error_km_std\n";
    for (std::size_t k = 0; k < r.error_k_km.size(); ++k) {
        out += std::to_string(k) + ',' + detail::format_double(static_cast<double>(k) * r.dt_s) + ',' +
               detail::format_double(r.error_k_km[k]) + ',' + detail::format_double(r.error_k_std_km[k]) + '\n';
    }
    return out;
}

inline void emit_report(const RunReport& r, const std::string& path, ReportFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path);
    const std::string text = render_report(r, format);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

/// Per-step CSV of a single run: step, time_s, error_km, corrected.
inline std::string render_run_csv(const RunResult& r, double dt_s) {
    std::string out = "step,time_s,error_km,corrected\n";
    for (std::size_t k = 0; k < r.errors_km.size(); ++k)
        out += std::to_string(k) + ',' + detail::format_double(static_cast<double>(k) * dt_s) + ',' +
               detail::format_double(r.errors_km[k]) + ',' + (r.corrected[k] ? "1" : "0") + '\n';
    return out;
}

struct Comparison {
    RunReport reference;
    RunReport candidate;
};

/// Two configurations on the same seeds; candidate.tcr is relative to the reference.
inline Comparison compare(const Scenario& reference, const Scenario& candidate, const GravityMap& map) {
    Comparison c{monte_carlo(reference, map, true), monte_carlo(candidate, map, true)};
    c.reference.tcr = 1.0;
    c.reference.tcr_reference = "reference";
    attach_tcr(c.candidate, c.reference, "reference");
    return c;
}

inline nlohmann::json to_json(const Comparison& c) {
    auto row = [](const RunReport& r) {
        return nlohmann::json{{"algorithm", r.algorithm},
                              {"success_rate", r.success_rate},
                              {"mean_km", detail::opt_json(r.mean_km)},
                              {"std_km", detail::opt_json(r.std_km)},
                              {"matcher_seconds", detail::opt_json(r.matcher_seconds)},
                              {"tcr", detail::opt_json(r.tcr)}};
    };
    return {{"summary", {row(c.reference), row(c.candidate)}},
            {"reference", to_json(c.reference)},
            {"candidate", to_json(c.candidate)}};
}

}  // namespace gravmatch
