#ifndef ISCHED_TASK_MODEL_HPP
#define ISCHED_TASK_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "isched/clustering.hpp"
#include "isched/energy_model.hpp"
#include "isched/error.hpp"

namespace isched {

using Slot = std::int64_t;
using TaskId = std::int64_t;

/// Atomic slice of a subtask. Progress inside a unit is lost on power failure.
struct Unit {
    Slot cost_slots = 1;
    Joules energy_per_slot = 0.0;
};

/// One layer plus its utility evaluation. The payload is either a scripted
/// utility or the layer's feature vector, scored against that layer's cluster model.
struct Subtask {
    std::vector<Unit> units;
    std::variant<double, FeatureVector> payload = 0.0;

    Slot cost() const {
        Slot total = 0;
        for (const auto& u : units) {
            total += u.cost_slots;
        }
        return total;
    }
};

enum class TaskState { waiting, running, done_mandatory, done_full, missed };

inline std::string_view to_string(TaskState s) {
    switch (s) {
        case TaskState::waiting: return "waiting";
        case TaskState::running: return "running";
        case TaskState::done_mandatory: return "done-mandatory";
        case TaskState::done_full: return "done-full";
        case TaskState::missed: return "missed";
    }
    return "?";
}

struct Progress {
    std::size_t subtask = 0;
    std::size_t unit = 0;
    Slot slots_into_unit = 0;

    friend bool operator==(const Progress&, const Progress&) = default;
};

/// A released data sample: a chain of subtasks whose mandatory prefix ends
/// once the running utility reaches the threshold of the layer that produced it.
struct ImpreciseTask {
    TaskId id = 0;
    Slot release = 0;
    Slot deadline = 1;  ///< absolute; the task may run in slots strictly before it
    std::vector<Subtask> subtasks;
    std::vector<double> u_t;  ///< per-subtask threshold (one value broadcasts)

    Progress progress;
    double utility = 0.0;
    TaskState state = TaskState::waiting;

    std::optional<Slot> mandatory_done_at;  ///< end of the slot that met the threshold
    std::optional<Slot> finished_at;        ///< end of the slot that completed the last subtask
    std::optional<Slot> left_queue_at;
    Joules consumed = 0.0;
    bool restart_pending = false;  ///< in-flight unit lost progress to a power failure

    double threshold(std::size_t subtask) const {
        if (u_t.size() == 1) {
            return u_t.front();
        }
        return u_t.at(subtask);
    }

    bool mandatory_met() const {
        return state == TaskState::done_mandatory || state == TaskState::done_full;
    }

    bool terminal() const { return state == TaskState::done_full || state == TaskState::missed; }

    bool has_remaining_work() const { return progress.subtask < subtasks.size(); }

    /// A subtask is under way when any of its units finished or the current unit has progress.
    bool mid_subtask() const {
        return has_remaining_work() && (progress.unit > 0 || progress.slots_into_unit > 0);
    }

    const Unit& current_unit() const { return subtasks.at(progress.subtask).units.at(progress.unit); }

    /// Slots still needed to finish the current subtask from the current state.
    Slot remaining_in_subtask() const {
        if (!has_remaining_work()) {
            return 0;
        }
        const auto& units = subtasks[progress.subtask].units;
        Slot total = units[progress.unit].cost_slots - progress.slots_into_unit;
        for (std::size_t u = progress.unit + 1; u < units.size(); ++u) {
            total += units[u].cost_slots;
        }
        return total;
    }

    void validate() const {
        const std::string who = "task " + std::to_string(id) + ": ";
        detail::require(release >= 0, who + "release must be >= 0");
        detail::require(release < deadline, who + "release must precede the deadline");
        detail::require(!subtasks.empty(), who + "needs at least one subtask");
        detail::require(u_t.size() == 1 || u_t.size() == subtasks.size(),
                        who + "u_t must hold one value or one per subtask");
        for (double t : u_t) {
            detail::require(std::isfinite(t) && t > 0.0, who + "u_t must be > 0");
        }
        for (const auto& s : subtasks) {
            detail::require(!s.units.empty(), who + "every subtask needs at least one unit");
            for (const auto& u : s.units) {
                detail::require(u.cost_slots >= 1, who + "unit cost must be >= 1 slot");
                detail::require(std::isfinite(u.energy_per_slot) && u.energy_per_slot >= 0.0,
                                who + "unit energy must be >= 0");
            }
            if (const auto* scripted = std::get_if<double>(&s.payload)) {
                detail::require(std::isfinite(*scripted) && *scripted >= 0.0,
                                who + "scripted utilities must be >= 0");
            }
        }
    }
};

/// Imprecise factor: 1 in the mandatory portion (u < u_t), 0 in the optional one.
inline int gamma(double u, double u_t) { return u < u_t ? 1 : 0; }

/// gamma of a task: 1 until its mandatory portion has completed.
inline int gamma(const ImpreciseTask& task) { return task.mandatory_met() ? 0 : 1; }

struct PriorityParams {
    double alpha = 0.01;  ///< per slot of slack
    double beta = 1.0;    ///< per unit of utility
    Joules e_opt = 0.0;
    double eta = 1.0;

    void validate() const {
        detail::require(std::isfinite(alpha) && alpha > 0.0, "alpha must be > 0");
        detail::require(std::isfinite(beta) && beta > 0.0, "beta must be > 0");
        detail::require(std::isfinite(e_opt) && e_opt >= 0.0, "E_opt must be >= 0");
        detail::require(std::isfinite(eta), "eta must be finite");
    }
};

/// Slack and utility terms of the priority without the imprecise factor.
inline double urgency(const ImpreciseTask& task, Slot slack, const PriorityParams& params) {
    return (1.0 - params.alpha * static_cast<double>(slack)) + (1.0 - params.beta * task.utility);
}

/// zeta = (1 - alpha (D - t)) + (1 - beta U) + gamma. Larger runs first.
inline double zeta(const ImpreciseTask& task, Slot now, const PriorityParams& params) {
    return urgency(task, task.deadline - now, params) + gamma(task);
}

inline bool optional_work_allowed(Joules e_curr, const PriorityParams& params) {
    return params.eta * e_curr >= params.e_opt;
}

/// zeta when eta * E_curr >= E_opt; otherwise gamma * (slack and utility terms),
/// which zeroes every optional task.
inline double zeta_intermittent(const ImpreciseTask& task, Slot now, Joules e_curr,
                                const PriorityParams& params) {
    if (optional_work_allowed(e_curr, params)) {
        return zeta(task, now, params);
    }
    return gamma(task) * urgency(task, task.deadline - now, params);
}

/// Record a completed subtask and move to the next one.
///
/// Utility is the running maximum. Reaching the threshold of the finished layer
/// closes the mandatory portion; finishing the last layer completes the task
/// (and closes the mandatory portion when the threshold was never reached).
inline ImpreciseTask advance(ImpreciseTask task, double completed_subtask_utility, Slot completed_at) {
    detail::require(!task.terminal(), "advance on a task that already finished or missed");
    detail::require(task.has_remaining_work(), "advance past the last subtask");
    detail::require(std::isfinite(completed_subtask_utility), "utility must be finite");

    const std::size_t finished = task.progress.subtask;
    task.utility = std::max(task.utility, completed_subtask_utility);
    task.progress = Progress{finished + 1, 0, 0};
    task.restart_pending = false;

    const bool crossed = task.utility >= task.threshold(finished);
    if (!task.mandatory_met() && (crossed || finished + 1 == task.subtasks.size())) {
        task.mandatory_done_at = completed_at;
    }
    if (finished + 1 == task.subtasks.size()) {
        task.state = TaskState::done_full;
        task.finished_at = completed_at;
    } else if (crossed || task.mandatory_met()) {
        task.state = TaskState::done_mandatory;
    } else {
        task.state = TaskState::running;
    }
    return task;
}

/// Mandatory portion completed no later than the deadline.
inline bool is_schedulable_success(const ImpreciseTask& task) {
    return task.mandatory_met() && task.mandatory_done_at && *task.mandatory_done_at <= task.deadline;
}

/// alpha = 1 / (largest relative deadline), beta = 1 / (largest threshold).
inline PriorityParams default_priority_params(const std::vector<ImpreciseTask>& tasks) {
    PriorityParams p;
    Slot max_rel = 0;
    double max_ut = 0.0;
    for (const auto& t : tasks) {
        max_rel = std::max(max_rel, t.deadline - t.release);
        for (double u : t.u_t) {
            max_ut = std::max(max_ut, u);
        }
    }
    p.alpha = max_rel > 0 ? 1.0 / static_cast<double>(max_rel) : 1.0;
    p.beta = max_ut > 0.0 ? 1.0 / max_ut : 1.0;
    return p;
}

}  // namespace isched

#endif  // ISCHED_TASK_MODEL_HPP
