#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "gravmatch/gravmatch.hpp"

namespace {

using namespace gravmatch;

const std::vector<std::string> kScenarioKeys = {
    "map",           "map_origin_lon",   "map_origin_lat",       "map_width_deg",       "map_height_deg",
    "map_res_deg",   "map_roughness",    "map_seed",             "map_downsample",      "waypoints",
    "speed_deg_per_hr", "dt_s",          "T",                    "n",                   "o",
    "alpha",         "sigma_z_mgal",     "sigma_v_deg_per_s",    "bias_deg_per_hr",     "matcher_sigma_z_mgal",
    "matcher_sigma_v_deg_per_s", "n_mc", "seed",                 "algorithm",           "threshold_km",
    "iccp_max_iter", "iccp_tol_deg",     "threads"};

// Config file plus per-key flag overrides shared by every subcommand.
struct ScenarioArgs {
    std::string config;
    std::map<std::string, std::string> flags;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "key=value scenario file")->check(CLI::ExistingFile);
        for (const auto& key : kScenarioKeys) app->add_option("--" + key, flags[key], "override '" + key + "'");
    }

    KeyValues values() const {
        KeyValues kv = config.empty() ? KeyValues{} : load_key_values(config);
        for (const auto& [k, v] : flags)
            if (!v.empty()) kv[k] = v;
        return kv;
    }

    Scenario scenario() const {
        Scenario s = scenario_from(values());
        s.validate();
        return s;
    }
};

KeyValues parse_assignments(const std::vector<std::string>& items) {
    KeyValues kv;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw InvalidArgument("expected key=value, got '" + item + "'");
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return kv;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

ReportFormat parse_format(const std::string& f) { return f == "csv" ? ReportFormat::csv : ReportFormat::json; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gravity map matching simulator"};
    app.require_subcommand(1);

    ScenarioArgs synth_args;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth-map", "write the scenario's map as a GMAP file");
    synth_args.attach(synth_cmd);
    synth_cmd->add_option("--out", synth_out, "output GMAP path")->required();

    ScenarioArgs run_args;
    std::string run_out;
    auto* run_cmd = app.add_subcommand("run", "single run; per-step CSV");
    run_args.attach(run_cmd);
    run_cmd->add_option("--out", run_out, "output CSV path (default stdout)");

    ScenarioArgs mc_args;
    std::string mc_out;
    std::string mc_format = "json";
    bool mc_timing = false;
    auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo batch report");
    mc_args.attach(mc_cmd);
    mc_cmd->add_option("--out", mc_out, "report path (default stdout)");
    mc_cmd->add_option("--format", mc_format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    mc_cmd->add_flag("--timing", mc_timing, "include matcher wall time in the report");

    ScenarioArgs cmp_args;
    std::string cmp_out;
    std::vector<std::string> set_a;
    std::vector<std::string> set_b;
    auto* cmp_cmd = app.add_subcommand("compare", "reference (A) vs candidate (B) on shared seeds");
    cmp_args.attach(cmp_cmd);
    cmp_cmd->add_option("--a", set_a, "key=value applied to the reference only");
    cmp_cmd->add_option("--b", set_b, "key=value applied to the candidate only");
    cmp_cmd->add_option("--out", cmp_out, "JSON path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) {
            const Scenario s = synth_args.scenario();
            save_map(scenario_map(s), synth_out);
        } else if (*run_cmd) {
            const Scenario s = run_args.scenario();
            const GravityMap map = scenario_map(s);
            write_text(run_out, render_run_csv(run_once(s, map, s.seed), s.dt_s));
        } else if (*mc_cmd) {
            const Scenario s = mc_args.scenario();
            const GravityMap map = scenario_map(s);
            write_text(mc_out, render_report(monte_carlo(s, map, mc_timing), parse_format(mc_format)));
        } else if (*cmp_cmd) {
            const KeyValues base = cmp_args.values();
            KeyValues a = base;
            KeyValues b = base;
            for (const auto& [k, v] : parse_assignments(set_a)) a[k] = v;
            for (const auto& [k, v] : parse_assignments(set_b)) b[k] = v;
            const Scenario ref = scenario_from(a);
            const Scenario cand = scenario_from(b);
            ref.validate();
            cand.validate();
            if (ref.seed != cand.seed || ref.n_mc != cand.n_mc)
                throw InvalidArgument("compare needs the same seed and n_mc on both sides");
            const GravityMap map = scenario_map(ref);
            if (!(scenario_map(cand) == map)) throw InvalidArgument("compare needs the same map on both sides");
            write_text(cmp_out, to_json(compare(ref, cand, map)).dump(2) + "\n");
        }
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
    return 0;
}
