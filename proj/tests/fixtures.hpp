#ifndef ISCHED_TESTS_FIXTURES_HPP
#define ISCHED_TESTS_FIXTURES_HPP

#include <optional>
#include <vector>

#include "isched/sim.hpp"

namespace fixtures {

using namespace isched;

/// Task whose subtasks are single units of `cost` slots each, with scripted utilities.
inline ImpreciseTask scripted_task(TaskId id, Slot release, Slot deadline, std::vector<double> utilities,
                                   double u_t, Slot cost = 1, Joules energy = 1.0) {
    ImpreciseTask t;
    t.id = id;
    t.release = release;
    t.deadline = deadline;
    t.u_t = {u_t};
    for (double u : utilities) {
        Subtask s;
        s.units = {Unit{cost, energy}};
        s.payload = u;
        t.subtasks.push_back(std::move(s));
    }
    return t;
}

/// Subtasks made of `units` single-slot units.
inline ImpreciseTask layered_task(TaskId id, Slot release, Slot deadline, std::vector<double> utilities,
                                  double u_t, std::size_t units, Joules energy = 1.0) {
    ImpreciseTask t = scripted_task(id, release, deadline, std::move(utilities), u_t, 1, energy);
    for (auto& s : t.subtasks) {
        s.units.assign(units, Unit{1, energy});
    }
    return t;
}

/// Builds expected schedule logs row by row.
class Golden {
public:
    Golden& run(Slot t, TaskId task, std::size_t subtask, std::size_t unit) {
        rows_.push_back({t, task, subtask, unit, Action::run});
        return *this;
    }
    Golden& restart(Slot t, TaskId task, std::size_t subtask, std::size_t unit) {
        rows_.push_back({t, task, subtask, unit, Action::restart_after_failure});
        return *this;
    }
    Golden& idle(Slot t, Action a) {
        rows_.push_back({t, std::nullopt, std::nullopt, std::nullopt, a});
        return *this;
    }
    Golden& event(Slot t, TaskId task, Action a) {
        rows_.push_back({t, task, std::nullopt, std::nullopt, a});
        return *this;
    }
    ScheduleLog log() const { return rows_; }

private:
    ScheduleLog rows_;
};

struct Scenario {
    SimConfig config;
    EnergyTrace trace;
    Workload workload;

    SimResult run() const { return run_sim(config, trace, workload); }
};

// ---------------------------------------------------------------------------
// Two-task intermittent walkthrough: unit-time layers, tau1 needs one layer,
// tau2 two. The trace puts charge below E_opt at t2, below E_man at t4 and
// above E_opt at t6.

inline Scenario walkthrough(Joules e_opt = 4.0) {
    Scenario s;
    s.config.capacitor = Capacitor{10.0, 0.0, 1.0, e_opt};
    s.config.idle_power = 0.5;
    s.config.policy.kind = PolicyKind::zeta_i;
    s.config.eta = 1.0;
    s.config.horizon = 9;
    s.trace.harvest = {3.0, 0.0, 1.0, 0.5, 0.0, 1.5, 6.0, 0.0, 1.0};
    s.workload.tasks = {scripted_task(1, 1, 7, {1.2, 1.5, 1.8, 2.0}, 1.0),
                        scripted_task(2, 3, 9, {0.4, 1.1, 1.5, 1.9}, 1.0)};
    s.config.policy.params = default_priority_params(s.workload.tasks);
    return s;
}

inline ScheduleLog walkthrough_golden() {
    return Golden()
        .idle(0, Action::idle_no_task)
        .run(1, 1, 0, 0)
        .event(1, 1, Action::complete_mandatory)
        .idle(2, Action::conservative_skip)
        .run(3, 2, 0, 0)
        .idle(4, Action::idle_no_energy)
        .run(5, 2, 1, 0)
        .event(5, 2, Action::complete_mandatory)
        .run(6, 1, 1, 0)
        .event(7, 1, Action::terminate_early)
        .run(7, 2, 2, 0)
        .run(8, 2, 3, 0)
        .event(8, 2, Action::complete_full)
        .log();
}

// ---------------------------------------------------------------------------
// Two 28-slot tasks (4 layers of 7 single-slot units). Scenario a: constant
// power; b: no harvest in slots 30..40; c: same outage, utility crosses the
// threshold after two layers.

enum class MotivatingCase { constant_power, outage, imprecise };

inline Scenario motivating(MotivatingCase which) {
    Scenario s;
    s.config.capacitor = Capacitor{1.0, 0.0, 0.0, 0.0};
    s.config.horizon = 60;
    s.config.policy.kind = which == MotivatingCase::imprecise ? PolicyKind::edf_m : PolicyKind::edf;
    s.trace.harvest.assign(60, 1.0);
    if (which != MotivatingCase::constant_power) {
        for (Slot t = 30; t <= 40; ++t) {
            s.trace.harvest[static_cast<std::size_t>(t)] = 0.0;
        }
    }
    const std::vector<double> utilities = which == MotivatingCase::imprecise
                                              ? std::vector<double>{0.3, 1.0, 1.5, 2.0}
                                              : std::vector<double>{0.1, 0.2, 0.3, 0.4};
    s.workload.tasks = {layered_task(1, 0, 45, utilities, 1.0, 7), layered_task(2, 25, 56, utilities, 1.0, 7)};
    s.config.policy.params = default_priority_params(s.workload.tasks);
    return s;
}

/// Run slots of `task` for the given list of (slot) values, layer/unit derived from work done.
inline void run_span(Golden& g, TaskId task, std::size_t& done, Slot from, Slot to, std::size_t units) {
    for (Slot t = from; t < to; ++t, ++done) {
        g.run(t, task, done / units, done % units);
    }
}

inline ScheduleLog motivating_golden(MotivatingCase which) {
    Golden g;
    std::size_t d1 = 0;
    std::size_t d2 = 0;
    if (which == MotivatingCase::constant_power) {
        run_span(g, 1, d1, 0, 28, 7);
        g.event(27, 1, Action::complete_full);
        run_span(g, 2, d2, 28, 56, 7);
        g.event(55, 2, Action::complete_full);
        for (Slot t = 56; t < 60; ++t) g.idle(t, Action::idle_no_task);
    } else if (which == MotivatingCase::outage) {
        run_span(g, 1, d1, 0, 28, 7);
        g.event(27, 1, Action::complete_full);
        run_span(g, 2, d2, 28, 30, 7);
        for (Slot t = 30; t <= 40; ++t) g.idle(t, Action::idle_no_energy);
        run_span(g, 2, d2, 41, 56, 7);
        g.event(56, 2, Action::deadline_miss);
        for (Slot t = 56; t < 60; ++t) g.idle(t, Action::idle_no_task);
    } else {
        // tau1 is dropped once two layers are done; tau2 rides out the outage.
        run_span(g, 1, d1, 0, 14, 7);
        g.event(13, 1, Action::complete_mandatory).event(13, 1, Action::terminate_early);
        for (Slot t = 14; t < 25; ++t) g.idle(t, Action::idle_no_task);
        run_span(g, 2, d2, 25, 30, 7);
        for (Slot t = 30; t <= 40; ++t) g.idle(t, Action::idle_no_energy);
        run_span(g, 2, d2, 41, 50, 7);
        g.event(49, 2, Action::complete_mandatory).event(49, 2, Action::terminate_early);
        for (Slot t = 50; t < 60; ++t) g.idle(t, Action::idle_no_task);
    }
    return g.log();
}

// ---------------------------------------------------------------------------
// Scheduler separation under persistent power.

inline Scenario persistent(std::vector<ImpreciseTask> tasks, PolicyKind kind, Slot horizon) {
    Scenario s;
    s.config.capacitor = Capacitor{1.0, 0.0, 0.0, 0.0};
    s.config.horizon = horizon;
    s.config.policy.kind = kind;
    s.trace.harvest.assign(static_cast<std::size_t>(horizon), 1.0);
    s.workload.tasks = std::move(tasks);
    s.config.policy.params = default_priority_params(s.workload.tasks);
    return s;
}

/// tau1 meets its threshold after one layer, tau2 needs four of six.
/// EDF spends the shared window on tau1's optional layers and tau2 misses.
inline std::vector<ImpreciseTask> separation_tasks() {
    return {scripted_task(1, 0, 8, {1.0, 1.1, 1.2, 1.3, 1.4, 1.5}, 1.0),
            scripted_task(2, 1, 9, {0.1, 0.2, 0.3, 1.0, 1.1, 1.2}, 1.0)};
}

/// Both tasks succeed under either policy; zeta interleaves for higher total utility.
inline std::vector<ImpreciseTask> utility_tasks() {
    return {scripted_task(1, 0, 6, {3.0, 3.1, 3.2, 3.3, 3.4}, 3.0),
            scripted_task(2, 0, 7, {1.0, 2.0, 3.0, 4.0, 5.0}, 1.0)};
}

// ---------------------------------------------------------------------------
// Deterministic harvester with off-windows [6,8), [14,16), ... (period 8).

inline EnergyTaskSpec window_spec() { return EnergyTaskSpec{8, 2, 6}; }

inline Scenario windowed(PolicyKind kind) {
    Scenario s;
    s.config.capacitor = Capacitor{1.0, 0.0, 0.0, 0.0};
    s.config.horizon = 16;
    s.config.policy.kind = kind;
    s.config.policy.energy_task = window_spec();
    for (Slot t = 0; t < 16; ++t) {
        s.trace.harvest.push_back(window_spec().in_window(t) ? 0.0 : 1.0);
    }
    s.workload.tasks = {scripted_task(1, 4, 11, {1.0}, 1.0, 3),
                        scripted_task(2, 4, 12, {0.5, 1.0, 2.0}, 1.0)};
    s.config.policy.params = default_priority_params(s.workload.tasks);
    return s;
}

}  // namespace fixtures

#endif  // ISCHED_TESTS_FIXTURES_HPP
