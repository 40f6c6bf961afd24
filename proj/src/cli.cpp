#include "lobsim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lobsim/bundle.hpp"
#include "lobsim/distributions.hpp"
#include "lobsim/flow.hpp"
#include "lobsim/replay.hpp"
#include "lobsim/simulator.hpp"

namespace lobsim {

namespace {

using Json = nlohmann::ordered_json;

struct FitArgs {
    std::vector<std::string> flows;
    std::string out;
    double ticksize = 0.01;
    bool ticksize_given = false;
    double median = 0.0;
    bool no_window = false;
    std::string cancel_estimator = "selection_interval";
};

struct SimulateArgs {
    std::string bundle;
    double seconds = 30'000.0;
    std::uint64_t seed = 1;
    std::string out;
    bool poisson = false;
    bool with_state = false;
    std::string states;
};

struct ValidateArgs {
    std::vector<std::string> empirical;
    std::string simulated;
    std::string out;
    double ticksize = 0.01;
    bool ticksize_given = false;
    double median = 0.0;
    std::size_t shape_ticks = kDefaultShapeTicks;
};

struct ReportArgs {
    std::string in;
    std::string plots_dir;
    double q1_quantile = 1.0;
    double q10_quantile = 1.0;
};

bool same_ticksize(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

Json distribution_json(const Distribution& d) {
    auto out = Json::array();
    for (const auto& [k, p] : d) out.push_back(Json::array({k, p}));
    return out;
}

Distribution distribution_from(const nlohmann::json& j) {
    Distribution d;
    for (const auto& e : j) d[e.at(0).get<Tick>()] = e.at(1).get<double>();
    return d;
}

Json report_json(const DistributionReport& r) {
    Json j;
    j["duration_s"] = r.duration;
    j["mean_side_volume"] = r.mean_side_volume;
    j["spread"] = distribution_json(r.spread);
    j["q1"] = distribution_json(r.q1);
    j["q10"] = distribution_json(r.q10);
    j["shape"] = r.shape;
    return j;
}

ReplayResult replay_files(const std::vector<std::string>& paths, double ticksize, double median, bool filter,
                          std::size_t shape_ticks, double& median_out) {
    SessionSpec spec;
    spec.ticksize = ticksize;
    spec.median_trade_size = median;
    spec.filter_window = filter;
    const OrderFlow flow = load_order_flow(paths, spec);
    median_out = flow.median_trade_size;
    return replay_order_flow(flow.records, ReplayOptions{.shape_ticks = shape_ticks});
}

/// Ticksize of a flow: its sidecar's when present, else the command line's.
/// An explicit --ticksize contradicting the sidecar is an error.
double flow_ticksize(const std::string& path, double given, bool explicit_given) {
    const auto meta = read_sidecar(path);
    if (!meta) return given;
    if (explicit_given && !same_ticksize(meta->ticksize, given))
        throw Error("tick conventions differ: " + path + " was produced with ticksize " +
                    std::to_string(meta->ticksize) + ", not " + std::to_string(given));
    return meta->ticksize;
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
    std::optional<double> ticksize;
    for (const std::string& p : a.flows) {
        const double t = flow_ticksize(p, a.ticksize, a.ticksize_given);
        if (ticksize && !same_ticksize(*ticksize, t))
            throw Error("tick conventions differ between the input flows (" + p + ")");
        ticksize = t;
    }
    double median = 0.0;
    const ReplayResult replay = replay_files(a.flows, *ticksize, a.median, !a.no_window, 0, median);
    const BundleFit fit = fit_bundle(replay, *ticksize, median, cancel_estimator_from_string(a.cancel_estimator));
    write_file_atomic(a.out, to_json(fit).dump(2) + "\n");
    out << "fitted " << replay.records << " records over " << fit.duration << " s -> " << a.out << '\n';
    return 0;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    SimConfig config;
    config.bundle = load_bundle(a.bundle);
    config.session_seconds = a.seconds;
    config.seed = a.seed;
    config.mode = a.poisson ? SimMode::poisson_reference : SimMode::state_dependent;
    const SessionResult result = run_session(config);
    write_file_atomic(a.out, format_order_flow_csv(to_flow_records(result.events, a.with_state), a.with_state));
    FlowMetadata meta;
    meta.ticksize = config.bundle.ticksize;
    meta.normalized = true;
    meta.median_trade_size = config.bundle.median_trade_size;
    meta.seed = a.seed;
    meta.mode = to_string(config.mode);
    meta.session_start_ms = config.session_start_ms;
    meta.seconds = config.session_seconds;
    write_sidecar(a.out, meta);
    if (!a.states.empty()) write_file_atomic(a.states, format_state_samples_csv(result.samples));
    out << "simulated " << result.events.size() << " events (" << result.stats.discarded_market
        << " market orders on an empty side discarded) -> " << a.out << '\n';
    return 0;
}

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
    const auto sim_meta = read_sidecar(a.simulated);
    const double sim_tick = sim_meta ? sim_meta->ticksize : a.ticksize;
    for (const std::string& p : a.empirical) {
        const double t = flow_ticksize(p, a.ticksize, a.ticksize_given);
        if (!same_ticksize(t, sim_tick))
            throw Error("tick conventions differ: " + p + " uses ticksize " + std::to_string(t) + " but " +
                        a.simulated + " uses " + std::to_string(sim_tick));
    }
    double median = 0.0;
    const ReplayResult emp = replay_files(a.empirical, a.ticksize, a.median, true, a.shape_ticks, median);
    const ReplayResult sim = replay_files({a.simulated}, sim_tick, 0.0, true, a.shape_ticks, median);
    const auto metrics = compare_distributions(emp.distributions, sim.distributions);

    Json j;
    j["ticksize"] = sim_tick;
    j["empirical"] = report_json(emp.distributions);
    j["simulated"] = report_json(sim.distributions);
    Json m;
    for (const auto& [name, d] : metrics) m[name] = {{"total_variation", d.total_variation}, {"ks", d.ks}};
    j["metrics"] = m;
    write_file_atomic(a.out, j.dump(2) + "\n");
    for (const auto& [name, d] : metrics) out << name << ": TV " << d.total_variation << ", KS " << d.ks << '\n';
    return 0;
}

std::string pair_csv(const std::string& label, const Distribution& e, const Distribution& s) {
    std::ostringstream o;
    o << label << ",empirical,simulated\n";
    std::map<Tick, std::pair<double, double>> rows;
    for (const auto& [k, p] : e) rows[k].first = p;
    for (const auto& [k, p] : s) rows[k].second = p;
    for (const auto& [k, v] : rows) o << k << ',' << v.first << ',' << v.second << '\n';
    return o.str();
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(a.in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(a.in + ": " + e.what());
    }
    const std::filesystem::path dir(a.plots_dir);
    try {
        const auto& e = j.at("empirical");
        const auto& s = j.at("simulated");
        write_file_atomic((dir / "spread.csv").string(),
                          pair_csv("spread_ticks", distribution_from(e.at("spread")), distribution_from(s.at("spread"))));
        write_file_atomic((dir / "q1.csv").string(),
                          pair_csv("q1", truncate_at_quantile(distribution_from(e.at("q1")), a.q1_quantile),
                                   truncate_at_quantile(distribution_from(s.at("q1")), a.q1_quantile)));
        write_file_atomic((dir / "q10.csv").string(),
                          pair_csv("q10", truncate_at_quantile(distribution_from(e.at("q10")), a.q10_quantile),
                                   truncate_at_quantile(distribution_from(s.at("q10")), a.q10_quantile)));
        const auto es = e.at("shape").get<std::vector<double>>();
        const auto ss = s.at("shape").get<std::vector<double>>();
        std::ostringstream shape;
        shape << "distance_ticks,empirical,simulated\n";
        for (std::size_t k = 0; k < std::max(es.size(), ss.size()); ++k)
            shape << k << ',' << (k < es.size() ? es[k] : 0.0) << ',' << (k < ss.size() ? ss[k] : 0.0) << '\n';
        write_file_atomic((dir / "shape.csv").string(), shape.str());
        std::ostringstream metrics;
        metrics << "distribution,total_variation,ks\n";
        for (const auto& [name, m] : j.at("metrics").items())
            metrics << name << ',' << m.at("total_variation").get<double>() << ',' << m.at("ks").get<double>() << '\n';
        write_file_atomic((dir / "metrics.csv").string(), metrics.str());
    } catch (const nlohmann::json::exception& e) {
        throw Error(a.in + " is not a validation report: " + e.what());
    }
    out << "plot data written to " << a.plots_dir << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Order book model workbench: fit, simulate, validate, report", "lobsim"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "Calibrate every model on order-flow files (one file per day)");
    f->add_option("flows", fit.flows, "Order-flow CSV files")->required()->check(CLI::ExistingFile);
    f->add_option("--out", fit.out, "Model bundle JSON to write")->required();
    auto* fit_tick = f->add_option("--ticksize", fit.ticksize, "Tick size in currency units")->check(CLI::PositiveNumber);
    f->add_option("--median-trade-size", fit.median, "Shares per volume unit (default: median market order size)")
        ->check(CLI::NonNegativeNumber);
    f->add_flag("--no-window", fit.no_window, "Keep rows outside 09:05-17:25");
    f->add_option("--cancel-estimator", fit.cancel_estimator, "Priority law estimator used in the bundle")
        ->check(CLI::IsMember({"selection_interval", "half_queue"}));

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Simulate one session from a model bundle");
    s->add_option("--bundle", sim.bundle, "Model bundle JSON")->required()->check(CLI::ExistingFile);
    s->add_option("--seconds", sim.seconds, "Session length in seconds")->check(CLI::PositiveNumber);
    s->add_option("--seed", sim.seed, "Random seed");
    s->add_option("--out", sim.out, "Event CSV to write")->required();
    s->add_flag("--poisson", sim.poisson, "Constant-rate reference model");
    s->add_flag("--with-state", sim.with_state, "Append the pre-event book-state columns");
    s->add_option("--states", sim.states, "Also write book-state samples (one per second)");

    ValidateArgs val;
    auto* v = app.add_subcommand("validate", "Compare book-state distributions of two flows");
    v->add_option("--empirical", val.empirical, "Empirical order-flow CSV files")->required()->check(CLI::ExistingFile);
    v->add_option("--simulated", val.simulated, "Simulated event CSV")->required()->check(CLI::ExistingFile);
    v->add_option("--out", val.out, "Report JSON to write")->required();
    auto* val_tick =
        v->add_option("--ticksize", val.ticksize, "Tick size of the empirical flow")->check(CLI::PositiveNumber);
    v->add_option("--median-trade-size", val.median, "Shares per volume unit of the empirical flow")
        ->check(CLI::NonNegativeNumber);
    v->add_option("--shape-ticks", val.shape_ticks, "Depth profile length in ticks")->check(CLI::PositiveNumber);

    ReportArgs rep;
    auto* r = app.add_subcommand("report", "Write plot-ready CSVs from a validation report");
    r->add_option("--in", rep.in, "Report JSON")->required()->check(CLI::ExistingFile);
    r->add_option("--plots-dir", rep.plots_dir, "Output directory")->required();
    r->add_option("--q1-quantile", rep.q1_quantile, "Upper quantile kept on the q1 axis")->check(CLI::Range(0.0, 1.0));
    r->add_option("--q10-quantile", rep.q10_quantile, "Upper quantile kept on the Q10 axis")->check(CLI::Range(0.0, 1.0));

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        fit.ticksize_given = fit_tick->count() > 0;
        val.ticksize_given = val_tick->count() > 0;
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (f->parsed()) return cmd_fit(fit, out);
        if (s->parsed()) return cmd_simulate(sim, out);
        if (v->parsed()) return cmd_validate(val, out);
        return cmd_report(rep, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace lobsim
