#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "checks.hpp"
#include "isched/energy_model.hpp"
#include "isched/generators.hpp"
#include "isched/io.hpp"
#include "isched/sim.hpp"

namespace {

using nlohmann::json;
using namespace isched;

constexpr int exit_ok = 0;
constexpr int exit_internal = 1;
constexpr int exit_validation = 2;

/// Config files: JSON when the first non-blank character is '{', TOML otherwise.
/// Keys outside a section belong to the subcommand being run.
class TomlOrJson : public CLI::Config {
public:
    explicit TomlOrJson(const CLI::App* root) : root_(root) {}

    std::string to_config(const CLI::App* app, bool defaults, bool descriptions, std::string prefix) const override {
        return CLI::ConfigTOML().to_config(app, defaults, descriptions, std::move(prefix));
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        auto items = parse(in);
        const auto active = root_->get_subcommands();
        if (!active.empty()) {
            for (auto& item : items) {
                if (item.parents.empty()) item.parents.push_back(active.front()->get_name());
            }
        }
        return items;
    }

private:
    const CLI::App* root_;

    static std::vector<CLI::ConfigItem> parse(std::istream& in) {
        std::stringstream buffer;
        buffer << in.rdbuf();
        const std::string text = buffer.str();
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || text[first] != '{') {
            std::istringstream toml(text);
            return CLI::ConfigTOML().from_config(toml);
        }
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw CLI::ConversionError("config is not valid JSON: " + std::string(e.what()));
        }
        std::vector<CLI::ConfigItem> items;
        flatten(j, {}, items);
        return items;
    }

    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    static void flatten(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                auto next = parents;
                next.push_back(key);
                flatten(value, next, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(value));
            }
            out.push_back(std::move(item));
        }
    }
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    auto out = io::detail::open_out(path);
    out << text;
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOpts {
    std::string trace;
    double k = 1.0;
    std::size_t t = 1;
    int nmax = 20;
    std::size_t min_support = 100;
    double slot_duration = 1.0;
    bool json_out = false;
    std::string out;
};

void setup_analyze(CLI::App& app, AnalyzeOpts& o) {
    auto* sub = app.add_subcommand("analyze", "Energy-event statistics and the eta-factor of a harvest trace");
    sub->add_option("--trace", o.trace, "Trace CSV (slot,joules)")->required();
    sub->add_option("--k", o.k, "Joules that make an energy event")->capture_default_str();
    sub->add_option("--t", o.t, "Event window in slots")->capture_default_str();
    sub->add_option("--nmax", o.nmax, "Largest run length N in the CEE curve")->capture_default_str();
    sub->add_option("--min-support", o.min_support,
                    "Minimum observations for a CEE entry to enter the KW distance")->capture_default_str();
    sub->add_option("--slot-duration", o.slot_duration, "Seconds per slot")->capture_default_str();
    sub->add_flag("--json", o.json_out, "Print the profile as JSON");
    sub->add_option("--out", o.out, "Also write the profile JSON to this file");
}

int run_analyze(const AnalyzeOpts& o) {
    const EnergyTrace trace = io::read_trace_csv(o.trace, o.slot_duration);
    const auto profile = analyze_trace(trace, EventParams{o.k, o.t}, AnalysisOptions{o.nmax, o.min_support});
    const json j = io::profile_to_json(profile);
    if (!o.out.empty()) {
        write_text(o.out, j.dump(2) + "\n");
    }
    if (o.json_out) {
        std::cout << j.dump(2) << "\n";
        return exit_ok;
    }
    std::cout << "slots        " << trace.size() << "\n"
              << "event rate   " << fixed(profile.event_rate) << "\n"
              << "kw_h         " << fixed(profile.kw_h) << "\n"
              << "kw_r         " << fixed(profile.kw_r) << "\n"
              << "eta          " << fixed(profile.eta.value)
              << (profile.eta.by_convention ? "  (random reference coincides with the ideal; defined as 1)" : "")
              << "\n"
              << "entries used " << profile.compared.size() << " of " << 2 * o.nmax << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// gen-trace

struct GenTraceOpts {
    std::string model;
    double p = 0.5;
    double stay_on = 0.9;
    double stay_off = 0.9;
    std::int64_t period = 2;
    std::int64_t on_length = 1;
    double joules = 1.0;
    std::size_t slots = 0;
    std::uint64_t seed = 0;
    std::string out;
};

void setup_gen_trace(CLI::App& app, GenTraceOpts& o) {
    auto* sub = app.add_subcommand("gen-trace", "Generate a synthetic harvest trace");
    sub->add_option("--model", o.model, "bernoulli, markov, periodic or constant")
        ->required()
        ->check(CLI::IsMember({"bernoulli", "markov", "periodic", "constant"}));
    sub->add_option("--p", o.p, "bernoulli: probability of an on-slot")->capture_default_str();
    sub->add_option("--stay-on", o.stay_on, "markov: P(on -> on)")->capture_default_str();
    sub->add_option("--stay-off", o.stay_off, "markov: P(off -> off)")->capture_default_str();
    sub->add_option("--period", o.period, "periodic: cycle length in slots")->capture_default_str();
    sub->add_option("--on-length", o.on_length, "periodic: harvesting slots per cycle")->capture_default_str();
    sub->add_option("--joules", o.joules, "Joules per on-slot (constant: per slot)")->capture_default_str();
    sub->add_option("--slots", o.slots, "Trace length")->required();
    sub->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
    sub->add_option("--out", o.out, "Output CSV (default stdout)");
}

int run_gen_trace(const GenTraceOpts& o) {
    TraceModel model;
    if (o.model == "bernoulli") {
        model = trace_model::Bernoulli{o.p};
    } else if (o.model == "markov") {
        model = trace_model::Markov{o.stay_on, o.stay_off};
    } else if (o.model == "periodic") {
        model = trace_model::Periodic{o.period, o.on_length};
    } else {
        model = trace_model::Constant{o.joules};
    }
    const EnergyTrace trace = gen_trace(model, o.slots, o.seed, o.joules);
    std::ostringstream os;
    io::write_trace_csv(os, trace);
    write_text(o.out, os.str());
    return exit_ok;
}

// ---------------------------------------------------------------------------
// gen-workload

struct GenWorkloadOpts {
    WorkloadParams params;
    std::string utility_model = "random";
    std::string out;
};

void setup_gen_workload(CLI::App& app, GenWorkloadOpts& o) {
    auto* sub = app.add_subcommand("gen-workload", "Generate a sporadic workload with scripted utilities");
    auto& p = o.params;
    sub->add_option("--n-tasks", p.n_tasks, "Number of tasks")->capture_default_str();
    sub->add_option("--period", p.period_slots, "Minimum inter-arrival in slots")->capture_default_str();
    sub->add_option("--deadline-factor", p.deadline_factor, "Relative deadline as a multiple of the period")
        ->capture_default_str();
    sub->add_option("--layers", p.layers, "Subtasks per task")->capture_default_str();
    sub->add_option("--units-per-layer", p.units_per_layer, "Units per subtask")->capture_default_str();
    sub->add_option("--unit-cost", p.unit_cost, "Slots per unit")->capture_default_str();
    sub->add_option("--unit-energy", p.unit_energy, "Joules per unit slot")->capture_default_str();
    sub->add_option("--ut", p.u_t, "Utility threshold")->capture_default_str();
    sub->add_option("--utility-model", o.utility_model, "random or linear")
        ->check(CLI::IsMember({"random", "linear"}))
        ->capture_default_str();
    sub->add_option("--seed", p.seed, "RNG seed")->capture_default_str();
    sub->add_option("--out", o.out, "Output JSON (default stdout)");
}

int run_gen_workload(GenWorkloadOpts o) {
    o.params.utility_model = o.utility_model == "linear" ? UtilityModel::linear : UtilityModel::random;
    const Workload w = gen_workload(o.params);
    write_text(o.out, io::workload_to_json(w).dump(2) + "\n");
    return exit_ok;
}

// ---------------------------------------------------------------------------
// simulate / compare

struct SimOpts {
    std::string trace;
    std::string workload;
    std::string policy = "zeta-i";
    std::vector<std::string> policies;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<double> ut;
    double capacity = 10.0;
    double initial_charge = 0.0;
    double eman = 0.0;
    double eopt = 0.0;
    std::string eta = "1";
    double k = 1.0;
    std::size_t t = 1;
    int nmax = 20;
    double idle_power = 0.0;
    Slot horizon = 0;
    bool cycle_trace = false;
    std::string signal = "charge";
    Slot harvest_window = 1;
    std::optional<Slot> energy_period;
    Slot energy_off = 1;
    Slot energy_offset = 0;
    double slot_duration = 1.0;
    std::size_t threads = 0;
    std::string out;
    std::string log;
    std::string table;
};

void add_sim_options(CLI::App* sub, SimOpts& o) {
    sub->add_option("--trace", o.trace, "Trace CSV (slot,joules)")->required();
    sub->add_option("--workload", o.workload, "Workload JSON")->required();
    sub->add_option("--alpha", o.alpha, "Slack weight (default 1 / largest relative deadline)");
    sub->add_option("--beta", o.beta, "Utility weight (default 1 / largest threshold)");
    sub->add_option("--ut", o.ut, "Override every task's utility threshold");
    sub->add_option("--capacity", o.capacity, "Capacitor size in joules")->capture_default_str();
    sub->add_option("--initial-charge", o.initial_charge, "Charge at slot 0")->capture_default_str();
    sub->add_option("--eman", o.eman, "E_man: brown-out threshold")->capture_default_str();
    sub->add_option("--eopt", o.eopt, "E_opt: optional-work threshold")->capture_default_str();
    sub->add_option("--eta", o.eta, "eta-factor, or 'auto' to derive it from the trace")->capture_default_str();
    sub->add_option("--k", o.k, "eta auto: joules that make an energy event")->capture_default_str();
    sub->add_option("--t", o.t, "eta auto: event window in slots")->capture_default_str();
    sub->add_option("--nmax", o.nmax, "eta auto: CEE run length")->capture_default_str();
    sub->add_option("--idle-power", o.idle_power, "Joules drawn per powered slot")->capture_default_str();
    sub->add_option("--horizon", o.horizon, "Slots to simulate (default: trace length)");
    sub->add_flag("--cycle-trace", o.cycle_trace, "Repeat the trace when the horizon is longer");
    sub->add_option("--signal", o.signal, "E_curr for the optional-work gate: charge or harvest-rate")
        ->check(CLI::IsMember({"charge", "harvest-rate"}))
        ->capture_default_str();
    sub->add_option("--harvest-window", o.harvest_window, "harvest-rate: averaging window in slots")
        ->capture_default_str();
    sub->add_option("--energy-period", o.energy_period, "Energy task: period of the off-windows");
    sub->add_option("--energy-off", o.energy_off, "Energy task: off-window length")->capture_default_str();
    sub->add_option("--energy-offset", o.energy_offset, "Energy task: start of the first off-window")
        ->capture_default_str();
    sub->add_option("--slot-duration", o.slot_duration, "Seconds per slot")->capture_default_str();
}

const char* policy_names = "edf, edf-m, zeta, zeta-i, energy-edf or energy-zeta";

void setup_simulate(CLI::App& app, SimOpts& o) {
    auto* sub = app.add_subcommand("simulate", "Run one policy over a trace and workload");
    add_sim_options(sub, o);
    sub->add_option("--policy", o.policy, policy_names)->capture_default_str();
    sub->add_option("--out", o.out, "Report JSON");
    sub->add_option("--log", o.log, "Schedule log CSV");
}

void setup_compare(CLI::App& app, SimOpts& o) {
    auto* sub = app.add_subcommand("compare", "Run several policies on identical inputs");
    add_sim_options(sub, o);
    sub->add_option("--policies", o.policies, std::string("Comma-separated: ") + policy_names)
        ->delimiter(',')
        ->required();
    sub->add_option("--threads", o.threads, "Worker threads (default: one per policy)");
    sub->add_option("--out", o.out, "Comparison JSON");
    sub->add_option("--table", o.table, "Comparison CSV");
}

struct Prepared {
    EnergyTrace trace;
    Workload workload;
    SimConfig config;
};

Prepared prepare(const SimOpts& o) {
    Prepared p;
    p.trace = io::read_trace_csv(o.trace, o.slot_duration);
    p.workload = io::workload_from_json(io::read_json_file(o.workload));
    if (o.ut) {
        for (auto& task : p.workload.tasks) task.u_t = {*o.ut};
    }
    p.workload.validate();

    auto& c = p.config;
    c.capacitor = Capacitor{o.capacity, o.initial_charge, o.eman, o.eopt};
    c.idle_power = o.idle_power;
    c.horizon = o.horizon > 0 ? o.horizon : static_cast<Slot>(p.trace.size());
    c.cycle_trace = o.cycle_trace;
    c.signal = o.signal == "harvest-rate" ? EnergySignal::harvest_rate : EnergySignal::charge;
    c.harvest_window = o.harvest_window;
    if (o.eta == "auto") {
        c.eta = analyze_trace(p.trace, EventParams{o.k, o.t}, AnalysisOptions{o.nmax}).eta.value;
    } else {
        try {
            std::size_t used = 0;
            c.eta = std::stod(o.eta, &used);
            detail::require(used == o.eta.size(), "");
        } catch (const std::exception&) {
            throw InvalidInput("--eta must be a number or 'auto', got '" + o.eta + "'");
        }
    }
    c.policy.params = default_priority_params(p.workload.tasks);
    if (o.alpha) c.policy.params.alpha = *o.alpha;
    if (o.beta) c.policy.params.beta = *o.beta;
    if (o.energy_period) {
        c.policy.energy_task = EnergyTaskSpec{*o.energy_period, o.energy_off, o.energy_offset};
    }
    return p;
}

SimResult simulate_policy(const Prepared& p, PolicyKind kind) {
    SimConfig c = p.config;
    c.policy.kind = kind;
    return run_sim(c, p.trace, p.workload);
}

std::string report_row(const std::string& name, const SimReport& r) {
    std::ostringstream os;
    os << std::left << std::setw(12) << name << std::right << std::setw(9) << r.tasks_released << std::setw(9)
       << r.tasks_schedulable_success << std::setw(7) << r.tasks_full_complete << std::setw(8) << r.deadline_misses
       << std::setw(11) << fixed(r.accumulated_utility, 3) << std::setw(12) << fixed(r.energy_waste_unnecessary, 3)
       << std::setw(12) << fixed(r.energy_waste_overflow, 3) << std::setw(7) << r.busy_slots << std::setw(6)
       << r.off_slots << "\n";
    return os.str();
}

std::string report_header() {
    std::ostringstream os;
    os << std::left << std::setw(12) << "policy" << std::right << std::setw(9) << "released" << std::setw(9)
       << "success" << std::setw(7) << "full" << std::setw(8) << "missed" << std::setw(11) << "utility"
       << std::setw(12) << "waste_run" << std::setw(12) << "waste_full" << std::setw(7) << "busy" << std::setw(6)
       << "off" << "\n";
    return os.str();
}

int run_simulate(const SimOpts& o) {
    const PolicyKind kind = parse_policy(o.policy);
    const Prepared p = prepare(o);
    const SimResult res = simulate_policy(p, kind);
    if (!o.log.empty()) {
        write_text(o.log, io::log_to_csv(res.log));
    }
    json report = io::report_to_json(res.report);
    report["policy"] = std::string(to_string(kind));
    report["eta"] = p.config.eta;
    if (!o.out.empty()) {
        write_text(o.out, report.dump(2) + "\n");
    }
    std::cout << report_header() << report_row(std::string(to_string(kind)), res.report);
    if (res.report.trace_cycled) {
        std::cout << "note: trace shorter than the horizon, cycled\n";
    }
    return exit_ok;
}

int run_compare(const SimOpts& o) {
    std::vector<PolicyKind> kinds;
    for (const auto& name : o.policies) kinds.push_back(parse_policy(name));
    const Prepared p = prepare(o);
    // Validate every policy up front so a bad combination fails before any work starts.
    for (auto kind : kinds) {
        SimConfig c = p.config;
        c.policy.kind = kind;
        c.validate();
    }

    const std::size_t threads = o.threads > 0 ? o.threads : std::max<std::size_t>(kinds.size(), 1);
    std::vector<SimReport> reports(kinds.size());
    for (std::size_t begin = 0; begin < kinds.size(); begin += threads) {
        const std::size_t end = std::min(kinds.size(), begin + threads);
        std::vector<std::future<SimReport>> jobs;
        for (std::size_t i = begin; i < end; ++i) {
            jobs.push_back(std::async(std::launch::async, [&p, kind = kinds[i]] {
                return simulate_policy(p, kind).report;
            }));
        }
        for (std::size_t i = begin; i < end; ++i) reports[i] = jobs[i - begin].get();
    }

    std::cout << report_header();
    json rows = json::array();
    std::ostringstream csv;
    csv << "policy,released,schedulable_success,full_complete,deadline_misses,accumulated_utility,"
           "waste_unnecessary,waste_overflow,busy_slots,off_slots\n";
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        const std::string name(to_string(kinds[i]));
        const auto& r = reports[i];
        std::cout << report_row(name, r);
        json row = io::report_to_json(r);
        row.erase("tasks");
        row["policy"] = name;
        rows.push_back(row);
        csv << name << ',' << r.tasks_released << ',' << r.tasks_schedulable_success << ',' << r.tasks_full_complete
            << ',' << r.deadline_misses << ',' << io::detail::format_double(r.accumulated_utility) << ','
            << io::detail::format_double(r.energy_waste_unnecessary) << ','
            << io::detail::format_double(r.energy_waste_overflow) << ',' << r.busy_slots << ',' << r.off_slots
            << "\n";
    }
    if (!o.out.empty()) write_text(o.out, json{{"eta", p.config.eta}, {"rows", rows}}.dump(2) + "\n");
    if (!o.table.empty()) write_text(o.table, csv.str());
    return exit_ok;
}

// ---------------------------------------------------------------------------
// loss-check / cluster-check

struct CheckOpts {
    std::size_t count = 0;
    std::uint64_t seed = 0;
    double tolerance = 1e-4;
};

void setup_loss_check(CLI::App& app, CheckOpts& o) {
    auto* sub = app.add_subcommand("loss-check", "Compare the analytic loss gradient with central differences");
    o.count = 100;
    sub->add_option("--batches", o.count, "Random batches")->capture_default_str();
    sub->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
    sub->add_option("--tolerance", o.tolerance, "Largest acceptable relative error")->capture_default_str();
}

int run_loss_check(const CheckOpts& o) {
    const auto res = checks::run_loss_check(o.seed, o.count);
    std::cout << "batches             " << res.batches << "\n"
              << "max relative error  " << std::scientific << std::setprecision(3) << res.max_relative_error << "\n";
    if (res.max_relative_error > o.tolerance) {
        std::cerr << "loss-check: error above tolerance " << o.tolerance << "\n";
        return exit_internal;
    }
    return exit_ok;
}

void setup_cluster_check(CLI::App& app, CheckOpts& o) {
    auto* sub = app.add_subcommand("cluster-check", "Compare assignment, utility and update with brute force");
    o.count = 500;
    sub->add_option("--instances", o.count, "Random instances")->capture_default_str();
    sub->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
}

int run_cluster_check(const CheckOpts& o) {
    const auto res = checks::run_cluster_check(o.seed, o.count);
    std::cout << "instances   " << res.instances << "\n"
              << "mismatches  " << res.mismatches << "\n";
    if (res.mismatches > 0) {
        std::cerr << "cluster-check: " << res.first_mismatch << "\n";
        return exit_internal;
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Imprecise-task scheduling on intermittently powered devices"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_config("--config", "", "TOML or JSON file supplying any subcommand flag; command-line flags win");
    app.config_formatter(std::make_shared<TomlOrJson>(&app));
    app.allow_config_extras(CLI::config_extras_mode::error);

    AnalyzeOpts analyze;
    GenTraceOpts gen_trace_opts;
    GenWorkloadOpts gen_workload_opts;
    SimOpts simulate;
    SimOpts compare;
    CheckOpts loss;
    CheckOpts cluster;
    setup_analyze(app, analyze);
    setup_gen_trace(app, gen_trace_opts);
    setup_gen_workload(app, gen_workload_opts);
    setup_simulate(app, simulate);
    setup_compare(app, compare);
    setup_loss_check(app, loss);
    setup_cluster_check(app, cluster);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_validation;
    }

    try {
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "analyze") return run_analyze(analyze);
        if (cmd == "gen-trace") return run_gen_trace(gen_trace_opts);
        if (cmd == "gen-workload") return run_gen_workload(gen_workload_opts);
        if (cmd == "simulate") return run_simulate(simulate);
        if (cmd == "compare") return run_compare(compare);
        if (cmd == "loss-check") return run_loss_check(loss);
        if (cmd == "cluster-check") return run_cluster_check(cluster);
        return exit_internal;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return exit_internal;
    }
}
