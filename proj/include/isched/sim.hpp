#ifndef ISCHED_SIM_HPP
#define ISCHED_SIM_HPP

#include <algorithm>
#include <cstddef>
#include <deque>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "isched/clustering.hpp"
#include "isched/energy_model.hpp"
#include "isched/error.hpp"
#include "isched/scheduler.hpp"
#include "isched/task_model.hpp"

namespace isched {

/// Tasks plus, for feature-vector payloads, one cluster model per layer.
struct Workload {
    std::vector<ImpreciseTask> tasks;
    std::vector<ClusterModel> models;

    void validate() const {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            tasks[i].validate();
            for (std::size_t j = i + 1; j < tasks.size(); ++j) {
                detail::require(tasks[i].id != tasks[j].id,
                                "duplicate task id " + std::to_string(tasks[i].id));
            }
            for (std::size_t s = 0; s < tasks[i].subtasks.size(); ++s) {
                const auto* x = std::get_if<FeatureVector>(&tasks[i].subtasks[s].payload);
                if (x == nullptr) {
                    continue;
                }
                detail::require(s < models.size(), "task " + std::to_string(tasks[i].id) +
                                                        ": no cluster model for layer " +
                                                        std::to_string(s));
                detail::require(x->size() >= models[s].required_input_size(),
                                "task " + std::to_string(tasks[i].id) + ": layer " +
                                    std::to_string(s) + " features too short for its model");
            }
        }
        for (const auto& m : models) {
            m.validate();
        }
    }
};

/// What the zeta_I gate compares against E_opt.
enum class EnergySignal {
    charge,        ///< capacitor charge (default)
    harvest_rate,  ///< mean harvest over the last `harvest_window` slots
};

struct SimConfig {
    Capacitor capacitor{10.0, 0.0, 0.0, 0.0};  ///< initial state
    Joules idle_power = 0.0;                    ///< drawn every powered slot
    Policy policy;                              ///< params.e_opt/eta are overridden below
    double eta = 1.0;
    Slot horizon = 1;
    bool cycle_trace = false;
    EnergySignal signal = EnergySignal::charge;
    Slot harvest_window = 1;

    void validate() const {
        capacitor.validate();
        detail::require(std::isfinite(idle_power) && idle_power >= 0.0, "idle power must be >= 0");
        detail::require(horizon >= 1, "horizon must be >= 1");
        detail::require(std::isfinite(eta) && eta <= 1.0, "eta must be finite and <= 1");
        detail::require(harvest_window >= 1, "harvest window must be >= 1");
        effective_policy().validate();
    }

    /// The policy with thresholds taken from the capacitor and eta from the config.
    Policy effective_policy() const {
        Policy p = policy;
        p.params.e_opt = capacitor.e_opt;
        p.params.eta = eta;
        return p;
    }
};

enum class Action {
    run,
    restart_after_failure,
    idle_no_task,
    idle_no_energy,
    conservative_skip,
    terminate_early,
    deadline_miss,
    complete_mandatory,
    complete_full,
};

inline std::string_view to_string(Action a) {
    switch (a) {
        case Action::run: return "run";
        case Action::restart_after_failure: return "restart-after-failure";
        case Action::idle_no_task: return "idle-no-task";
        case Action::idle_no_energy: return "idle-no-energy";
        case Action::conservative_skip: return "conservative-skip";
        case Action::terminate_early: return "terminate-early";
        case Action::deadline_miss: return "deadline-miss";
        case Action::complete_mandatory: return "complete-mandatory";
        case Action::complete_full: return "complete-full";
    }
    return "?";
}

inline Action parse_action(std::string_view s) {
    for (auto a : {Action::run, Action::restart_after_failure, Action::idle_no_task,
                   Action::idle_no_energy, Action::conservative_skip, Action::terminate_early,
                   Action::deadline_miss, Action::complete_mandatory, Action::complete_full}) {
        if (to_string(a) == s) {
            return a;
        }
    }
    throw InvalidInput("unknown log action '" + std::string(s) + "'");
}

/// Both `run` and `restart-after-failure` occupy the processor for the slot.
inline bool is_dispatch(Action a) { return a == Action::run || a == Action::restart_after_failure; }

struct LogRow {
    Slot slot = 0;
    std::optional<TaskId> task;
    std::optional<std::size_t> subtask;
    std::optional<std::size_t> unit;
    Action action = Action::idle_no_task;

    friend bool operator==(const LogRow&, const LogRow&) = default;
};

using ScheduleLog = std::vector<LogRow>;

struct TaskOutcome {
    TaskId id = 0;
    TaskState state = TaskState::waiting;
    bool schedulable_success = false;
    double utility = 0.0;
    std::size_t subtasks_done = 0;
    std::optional<Slot> mandatory_done_at;
    std::optional<Slot> finished_at;
    std::optional<Slot> left_queue_at;
    Joules consumed = 0.0;
};

struct SimReport {
    std::size_t tasks_released = 0;
    std::size_t tasks_schedulable_success = 0;
    std::size_t tasks_full_complete = 0;
    std::size_t deadline_misses = 0;
    std::size_t tasks_unresolved = 0;  ///< still queued at the horizon
    double accumulated_utility = 0.0;
    Joules energy_waste_unnecessary = 0.0;
    Joules energy_waste_overflow = 0.0;
    std::size_t busy_slots = 0;
    std::size_t off_slots = 0;
    Joules energy_harvested = 0.0;
    Joules energy_consumed = 0.0;
    Joules charge_initial = 0.0;
    Joules charge_final = 0.0;
    bool trace_cycled = false;
    std::vector<TaskOutcome> tasks;

    /// harvested - (charge delta + consumed + overflow); zero up to rounding.
    double conservation_error() const {
        return energy_harvested -
               ((charge_final - charge_initial) + energy_consumed + energy_waste_overflow);
    }
};

struct SimResult {
    ScheduleLog log;
    SimReport report;
    Workload final_workload;  ///< tasks in their end state, models after adaptation
};

namespace detail {

class Simulation {
public:
    Simulation(const SimConfig& config, const EnergyTrace& trace, const Workload& workload)
        : config_(config), policy_(config.effective_policy()), trace_(trace), cap_(config.capacitor) {
        config.validate();
        trace.validate();
        workload.validate();
        detail::require(config.cycle_trace || static_cast<Slot>(trace.size()) >= config.horizon,
                        "trace has " + std::to_string(trace.size()) + " slots, horizon is " +
                            std::to_string(config.horizon) + " (enable trace cycling to repeat it)");
        pending_ = workload.tasks;
        std::stable_sort(pending_.begin(), pending_.end(), [](const auto& a, const auto& b) {
            return std::tie(a.release, a.id) < std::tie(b.release, b.id);
        });
        models_ = workload.models;
        result_.report.charge_initial = cap_.charge;
        result_.report.trace_cycled = static_cast<Slot>(trace.size()) < config.horizon;
    }

    SimResult run() {
        for (Slot t = 0; t < config_.horizon; ++t) {
            step(t);
        }
        finish();
        return std::move(result_);
    }

private:
    void log(Slot t, Action a) { result_.log.push_back({t, std::nullopt, std::nullopt, std::nullopt, a}); }

    void log(Slot t, const ImpreciseTask& task, Action a, bool with_position) {
        LogRow row{t, task.id, std::nullopt, std::nullopt, a};
        if (with_position) {
            row.subtask = task.progress.subtask;
            row.unit = task.progress.unit;
        }
        result_.log.push_back(row);
    }

    void consume(Joules amount) {
        if (amount <= 0.0) {
            return;
        }
        cap_ = capacitor_step(cap_, 0.0, amount).capacitor;
        result_.report.energy_consumed += amount;
    }

    void retire(ImpreciseTask& task, Slot left_at) {
        task.left_queue_at = left_at;
        done_.push_back(task);
    }

    Joules signal() const {
        if (config_.signal == EnergySignal::charge) {
            return cap_.charge;
        }
        if (recent_harvest_.empty()) {
            return 0.0;
        }
        return std::accumulate(recent_harvest_.begin(), recent_harvest_.end(), 0.0) /
               static_cast<double>(recent_harvest_.size());
    }

    /// Power failure: the in-flight unit loses its progress.
    void drop_in_flight_progress() {
        for (auto& task : queue_) {
            if (task.progress.slots_into_unit > 0) {
                task.progress.slots_into_unit = 0;
                task.restart_pending = true;
            }
        }
    }

    void step(Slot t) {
        auto& report = result_.report;

        // 1. harvest
        const Joules h = trace_.harvest[static_cast<std::size_t>(t) % trace_.size()];
        const auto charged = capacitor_step(cap_, h, 0.0);
        cap_ = charged.capacitor;
        report.energy_harvested += h;
        report.energy_waste_overflow += charged.wasted;
        recent_harvest_.push_back(h);
        if (static_cast<Slot>(recent_harvest_.size()) > config_.harvest_window) {
            recent_harvest_.pop_front();
        }

        // 2. releases
        while (!pending_.empty() && pending_.front().release <= t) {
            queue_.push_back(std::move(pending_.front()));
            pending_.erase(pending_.begin());
            ++report.tasks_released;
        }

        // 3. expiry: a task leaves the queue at its deadline
        for (auto it = queue_.begin(); it != queue_.end();) {
            if (it->deadline > t) {
                ++it;
                continue;
            }
            if (it->mandatory_met()) {
                log(t, *it, Action::terminate_early, false);
            } else {
                it->state = TaskState::missed;
                report.energy_waste_unnecessary += it->consumed;
                log(t, *it, Action::deadline_miss, false);
            }
            retire(*it, t);
            it = queue_.erase(it);
        }

        // 4-5. power check and dispatch
        const EnergyStatus status{cap_.charge, cap_.e_man, signal()};
        const Decision decision = select_next(queue_, t, status, policy_);
        switch (decision.reason) {
            case DecisionReason::no_energy:
                drop_in_flight_progress();
                ++report.off_slots;
                log(t, Action::idle_no_energy);
                return;
            case DecisionReason::no_task:
                consume(std::min(config_.idle_power, cap_.charge));
                log(t, Action::idle_no_task);
                return;
            case DecisionReason::conservative_skip:
                consume(std::min(config_.idle_power, cap_.charge));
                log(t, Action::conservative_skip);
                return;
            case DecisionReason::chosen:
                break;
        }

        auto it = std::find_if(queue_.begin(), queue_.end(),
                               [&](const ImpreciseTask& x) { return x.id == *decision.chosen; });
        ImpreciseTask& task = *it;
        const Joules unit_energy = task.current_unit().energy_per_slot;
        if (cap_.charge < cap_.e_man + unit_energy) {
            // Cannot carry the unit through this slot without browning out.
            drop_in_flight_progress();
            ++report.off_slots;
            log(t, Action::idle_no_energy);
            return;
        }

        const bool restarting = task.restart_pending && task.progress.slots_into_unit == 0;
        log(t, task, restarting ? Action::restart_after_failure : Action::run, true);
        task.restart_pending = false;
        if (task.state == TaskState::waiting) {
            task.state = TaskState::running;
        }
        consume(unit_energy);
        consume(std::min(config_.idle_power, cap_.charge));
        task.consumed += unit_energy;
        ++report.busy_slots;

        // 6. progress, subtask completion, utility
        ++task.progress.slots_into_unit;
        if (task.progress.slots_into_unit < task.current_unit().cost_slots) {
            return;
        }
        task.progress.slots_into_unit = 0;
        ++task.progress.unit;
        if (task.progress.unit < task.subtasks[task.progress.subtask].units.size()) {
            return;
        }

        const std::size_t layer = task.progress.subtask;
        const double u = evaluate_utility(task.subtasks[layer], layer);
        const bool was_mandatory_met = task.mandatory_met();
        task = advance(std::move(task), u, t + 1);

        if (task.state == TaskState::done_full) {
            log(t, task, Action::complete_full, false);
            task.left_queue_at = t + 1;
            done_.push_back(task);
            queue_.erase(it);
            return;
        }
        if (!was_mandatory_met && task.mandatory_met()) {
            log(t, task, Action::complete_mandatory, false);
            if (policy_.kind == PolicyKind::edf_m) {
                log(t, task, Action::terminate_early, false);
                task.left_queue_at = t + 1;
                done_.push_back(task);
                queue_.erase(it);
            }
        }
    }

    double evaluate_utility(const Subtask& subtask, std::size_t layer) {
        if (const auto* scripted = std::get_if<double>(&subtask.payload)) {
            return *scripted;
        }
        const auto& x = std::get<FeatureVector>(subtask.payload);
        auto& model = models_.at(layer);
        const Assignment a = assign(model, x);
        update_centroid_in_place(model, a, x);
        return a.utility;
    }

    void finish() {
        auto& report = result_.report;
        report.tasks_unresolved = queue_.size();
        std::vector<ImpreciseTask> all = done_;
        all.insert(all.end(), queue_.begin(), queue_.end());
        all.insert(all.end(), pending_.begin(), pending_.end());
        std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            return std::tie(a.release, a.id) < std::tie(b.release, b.id);
        });
        for (const auto& task : all) {
            TaskOutcome o;
            o.id = task.id;
            o.state = task.state;
            o.schedulable_success = is_schedulable_success(task);
            o.utility = task.utility;
            o.subtasks_done = task.progress.subtask;
            o.mandatory_done_at = task.mandatory_done_at;
            o.finished_at = task.finished_at;
            o.left_queue_at = task.left_queue_at;
            o.consumed = task.consumed;
            report.tasks.push_back(o);
            if (o.schedulable_success) {
                ++report.tasks_schedulable_success;
                report.accumulated_utility += task.utility;
            }
            if (task.state == TaskState::done_full) {
                ++report.tasks_full_complete;
            }
            if (task.state == TaskState::missed) {
                ++report.deadline_misses;
            }
        }
        report.charge_final = cap_.charge;
        result_.final_workload.tasks = std::move(all);
        result_.final_workload.models = models_;
    }

    const SimConfig& config_;
    Policy policy_;
    const EnergyTrace& trace_;
    Capacitor cap_;
    std::vector<ImpreciseTask> pending_;
    std::vector<ImpreciseTask> queue_;
    std::vector<ImpreciseTask> done_;
    std::vector<ClusterModel> models_;
    std::deque<Joules> recent_harvest_;
    SimResult result_;
};

}  // namespace detail

/// Play `trace` against `workload` under `config.policy`, one slot at a time.
///
/// Per slot: harvest into the capacitor (overflow is waste), release tasks,
/// retire tasks whose deadline has come, then either brown out (in-flight unit
/// progress lost) or run one slot of the chosen unit. Finishing a subtask
/// evaluates its utility and may close the mandatory portion.
inline SimResult run_sim(const SimConfig& config, const EnergyTrace& trace, const Workload& workload) {
    return detail::Simulation(config, trace, workload).run();
}

struct LogDiff {
    std::size_t row = 0;
    std::optional<LogRow> actual;
    std::optional<LogRow> expected;
};

/// Row-by-row structural diff; empty means the logs match.
inline std::vector<LogDiff> replay_check(const ScheduleLog& actual, const ScheduleLog& expected) {
    std::vector<LogDiff> diffs;
    const std::size_t n = std::max(actual.size(), expected.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<LogRow> a = i < actual.size() ? std::optional(actual[i]) : std::nullopt;
        std::optional<LogRow> e = i < expected.size() ? std::optional(expected[i]) : std::nullopt;
        if (a != e) {
            diffs.push_back({i, a, e});
        }
    }
    return diffs;
}

/// Slot of the first differing row, if any.
inline std::optional<Slot> first_divergence(const std::vector<LogDiff>& diffs) {
    if (diffs.empty()) {
        return std::nullopt;
    }
    const auto& d = diffs.front();
    if (d.actual && d.expected) {
        return std::min(d.actual->slot, d.expected->slot);
    }
    return d.actual ? d.actual->slot : d.expected->slot;
}

}  // namespace isched

#endif  // ISCHED_SIM_HPP
