#ifndef ISCHED_SCHEDULER_HPP
#define ISCHED_SCHEDULER_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "isched/error.hpp"
#include "isched/task_model.hpp"

namespace isched {

enum class PolicyKind { edf, edf_m, zeta, zeta_i, energy_edf, energy_zeta };

inline std::string_view to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::edf: return "edf";
        case PolicyKind::edf_m: return "edf-m";
        case PolicyKind::zeta: return "zeta";
        case PolicyKind::zeta_i: return "zeta-i";
        case PolicyKind::energy_edf: return "energy-edf";
        case PolicyKind::energy_zeta: return "energy-zeta";
    }
    return "?";
}

inline PolicyKind parse_policy(std::string_view name) {
    for (auto kind : {PolicyKind::edf, PolicyKind::edf_m, PolicyKind::zeta, PolicyKind::zeta_i,
                      PolicyKind::energy_edf, PolicyKind::energy_zeta}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    throw InvalidInput("unknown policy '" + std::string(name) +
                       "' (expected edf, edf-m, zeta, zeta-i, energy-edf or energy-zeta)");
}

/// Known periodic power-off windows of a deterministic harvester, modeled as a
/// highest-priority periodic "energy task": [offset + n*period, ... + off_length).
struct EnergyTaskSpec {
    Slot period = 1;
    Slot off_length = 0;
    Slot offset = 0;

    void validate() const {
        detail::require(off_length >= 1, "energy task off_length must be >= 1");
        detail::require(period > off_length, "energy task period must exceed off_length");
        detail::require(offset >= 0, "energy task offset must be >= 0");
    }

    bool in_window(Slot t) const {
        if (t < offset) {
            return false;
        }
        return (t - offset) % period < off_length;
    }

    /// First slot >= t that lies inside a window.
    Slot next_window_start(Slot t) const {
        if (in_window(t)) {
            return t;
        }
        if (t < offset) {
            return offset;
        }
        return offset + ((t - offset) / period + 1) * period;
    }

    /// Slots in [from, to) outside every window.
    Slot powered_slots(Slot from, Slot to) const {
        Slot count = 0;
        for (Slot t = from; t < to; ++t) {
            count += in_window(t) ? 0 : 1;
        }
        return count;
    }
};

struct OffInterval {
    Slot begin = 0;
    Slot end = 0;

    friend bool operator==(const OffInterval&, const OffInterval&) = default;
};

/// Off-windows starting before `horizon`, clipped to it.
inline std::vector<OffInterval> energy_task_windows(const EnergyTaskSpec& spec, Slot horizon) {
    spec.validate();
    std::vector<OffInterval> out;
    for (Slot begin = spec.offset; begin < horizon; begin += spec.period) {
        out.push_back({begin, std::min(begin + spec.off_length, horizon)});
    }
    return out;
}

/// Earliest finish of the current subtask when every unit must fit inside one powered stretch.
/// Returns nullopt when some unit is longer than any powered stretch.
inline std::optional<Slot> earliest_subtask_finish(const ImpreciseTask& task, Slot now,
                                                   const EnergyTaskSpec& spec) {
    if (!task.has_remaining_work()) {
        return now;
    }
    const Slot longest_gap = spec.period - spec.off_length;
    const auto& units = task.subtasks[task.progress.subtask].units;
    Slot t = now;
    for (std::size_t u = task.progress.unit; u < units.size(); ++u) {
        const Slot cost = units[u].cost_slots;
        Slot need = cost - (u == task.progress.unit ? task.progress.slots_into_unit : 0);
        while (true) {
            while (spec.in_window(t)) {
                ++t;
            }
            const Slot gap_end = spec.next_window_start(t);
            if (gap_end - t >= need) {
                t += need;
                break;
            }
            // Cut by the window: the unit restarts from scratch afterwards.
            need = cost;
            t = gap_end;
            if (cost > longest_gap) {
                return std::nullopt;
            }
        }
    }
    return t;
}

/// True when off-windows leave no room to finish the current mandatory subtask
/// before the deadline.
inline bool infeasible_under_windows(const ImpreciseTask& task, Slot now, const EnergyTaskSpec& spec) {
    if (task.mandatory_met() || !task.has_remaining_work()) {
        return false;
    }
    const auto finish = earliest_subtask_finish(task, now, spec);
    return !finish || *finish > task.deadline;
}

struct Policy {
    PolicyKind kind = PolicyKind::zeta_i;
    PriorityParams params;
    std::optional<EnergyTaskSpec> energy_task;

    bool energy_aware() const {
        return kind == PolicyKind::energy_edf || kind == PolicyKind::energy_zeta;
    }

    void validate() const {
        params.validate();
        if (energy_aware()) {
            detail::require(energy_task.has_value(),
                            std::string(to_string(kind)) + " requires an energy task spec");
        }
        if (energy_task) {
            energy_task->validate();
        }
    }
};

enum class DecisionReason { no_task, no_energy, conservative_skip, chosen };

inline std::string_view to_string(DecisionReason r) {
    switch (r) {
        case DecisionReason::no_task: return "no-task";
        case DecisionReason::no_energy: return "no-energy";
        case DecisionReason::conservative_skip: return "conservative-skip";
        case DecisionReason::chosen: return "chosen";
    }
    return "?";
}

struct Decision {
    std::optional<TaskId> chosen;
    DecisionReason reason = DecisionReason::no_task;

    friend bool operator==(const Decision&, const Decision&) = default;
};

/// Energy as seen by the scheduler. `charge` gates brown-out against E_man;
/// `signal` is the E_curr fed to zeta_I (charge by default, or a harvest rate).
struct EnergyStatus {
    Joules charge = 0.0;
    Joules e_man = 0.0;
    Joules signal = 0.0;
};

inline std::tuple<Slot, Slot, TaskId> edf_key(const ImpreciseTask& task) {
    return {task.deadline, task.release, task.id};
}

/// EDF-M only sees tasks still inside their mandatory portion.
inline bool edf_m_filter(const ImpreciseTask& task) { return gamma(task) == 1; }

/// Execution offsets (slots of work from the task's start) at which the scheduler may switch away.
inline std::vector<Slot> preemption_points(const ImpreciseTask& task) {
    std::vector<Slot> points;
    Slot t = 0;
    for (const auto& s : task.subtasks) {
        t += s.cost();
        points.push_back(t);
    }
    return points;
}

/// The scheduler may only switch away from a task at a subtask boundary.
inline bool at_preemption_point(const ImpreciseTask& task) { return !task.mid_subtask(); }

namespace detail {

inline Decision choose(const ImpreciseTask& task) { return {task.id, DecisionReason::chosen}; }

inline bool tie_before(const ImpreciseTask& a, const ImpreciseTask& b) {
    return std::tie(a.release, a.id) < std::tie(b.release, b.id);
}

/// Scores this close count as equal, so rounding never overrides the tie-break.
inline constexpr double score_tolerance = 1e-9;

template <class Score>
const ImpreciseTask* argmax(std::span<const ImpreciseTask* const> candidates, Score score) {
    const ImpreciseTask* best = nullptr;
    double best_score = 0.0;
    for (const auto* t : candidates) {
        const double s = score(*t);
        const bool tied = std::abs(s - best_score) <= score_tolerance;
        if (best == nullptr || (!tied && s > best_score) || (tied && tie_before(*t, *best))) {
            best = t;
            best_score = s;
        }
    }
    return best;
}

inline const ImpreciseTask* earliest_deadline(std::span<const ImpreciseTask* const> candidates) {
    const ImpreciseTask* best = nullptr;
    for (const auto* t : candidates) {
        if (best == nullptr || edf_key(*t) < edf_key(*best)) {
            best = t;
        }
    }
    return best;
}

}  // namespace detail

/// Pick the task to run in slot `now`.
///
/// The queue holds released, unexpired tasks with work left. A task that is
/// part-way through a subtask keeps the processor (cooperative preemption).
/// Ties fall to the earlier release, then the lower id.
inline Decision select_next(std::span<const ImpreciseTask> queue, Slot now, const EnergyStatus& energy,
                            const Policy& policy) {
    if (energy.charge < energy.e_man) {
        return {std::nullopt, DecisionReason::no_energy};
    }
    if (policy.energy_aware() && policy.energy_task->in_window(now)) {
        return {std::nullopt, DecisionReason::no_energy};
    }

    std::vector<const ImpreciseTask*> candidates;
    for (const auto& t : queue) {
        if (t.has_remaining_work() && !t.terminal()) {
            candidates.push_back(&t);
        }
    }
    if (policy.kind == PolicyKind::edf_m) {
        std::erase_if(candidates, [](const ImpreciseTask* t) { return !edf_m_filter(*t); });
    }
    if (candidates.empty()) {
        return {std::nullopt, DecisionReason::no_task};
    }

    // Non-preemptible: a started subtask runs to its end.
    for (const auto* t : candidates) {
        if (t->mid_subtask()) {
            if (policy.energy_aware()) {
                const Slot window = policy.energy_task->next_window_start(now);
                if (t->current_unit().cost_slots - t->progress.slots_into_unit > window - now) {
                    return {std::nullopt, DecisionReason::conservative_skip};
                }
            }
            return detail::choose(*t);
        }
    }

    const auto& params = policy.params;
    switch (policy.kind) {
        case PolicyKind::edf:
        case PolicyKind::edf_m:
            return detail::choose(*detail::earliest_deadline(candidates));

        case PolicyKind::zeta:
            return detail::choose(*detail::argmax(
                candidates, [&](const ImpreciseTask& t) { return zeta(t, now, params); }));

        case PolicyKind::zeta_i: {
            if (!optional_work_allowed(energy.signal, params)) {
                // Conservative branch: gamma annihilates every optional task.
                std::erase_if(candidates, [](const ImpreciseTask* t) { return gamma(*t) == 0; });
                if (candidates.empty()) {
                    return {std::nullopt, DecisionReason::conservative_skip};
                }
            }
            return detail::choose(*detail::argmax(candidates, [&](const ImpreciseTask& t) {
                return zeta_intermittent(t, now, energy.signal, params);
            }));
        }

        case PolicyKind::energy_edf:
        case PolicyKind::energy_zeta: {
            const auto& spec = *policy.energy_task;
            const Slot window = spec.next_window_start(now);
            // Skip work the next off-window would cut, and tasks the windows already doomed.
            std::erase_if(candidates, [&](const ImpreciseTask* t) {
                return t->current_unit().cost_slots > window - now ||
                       infeasible_under_windows(*t, now, spec);
            });
            if (candidates.empty()) {
                return {std::nullopt, DecisionReason::conservative_skip};
            }
            if (policy.kind == PolicyKind::energy_edf) {
                return detail::choose(*detail::earliest_deadline(candidates));
            }
            return detail::choose(*detail::argmax(candidates, [&](const ImpreciseTask& t) {
                return urgency(t, spec.powered_slots(now, t.deadline), params) + gamma(t);
            }));
        }
    }
    return {std::nullopt, DecisionReason::no_task};
}

}  // namespace isched

#endif  // ISCHED_SCHEDULER_HPP
