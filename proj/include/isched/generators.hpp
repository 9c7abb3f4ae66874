#ifndef ISCHED_GENERATORS_HPP
#define ISCHED_GENERATORS_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "isched/energy_model.hpp"
#include "isched/error.hpp"
#include "isched/sim.hpp"
#include "isched/task_model.hpp"

namespace isched {

namespace detail {

/// Uniform [0,1) from the top 53 bits; std distributions differ across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [lo, hi].
inline std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(span));
}

inline void require_probability(double p, const std::string& what) {
    require(std::isfinite(p) && p >= 0.0 && p <= 1.0, what + " must lie in [0,1]");
}

}  // namespace detail

namespace trace_model {

struct Bernoulli {
    double p = 0.5;
};
/// Two-state chain; the first slot is drawn from the stationary distribution.
struct Markov {
    double stay_on = 0.9;
    double stay_off = 0.9;
};
/// `on_length` harvesting slots at the start of every `period`.
struct Periodic {
    std::int64_t period = 2;
    std::int64_t on_length = 1;
};
struct Constant {
    Joules joules = 1.0;
};

}  // namespace trace_model

using TraceModel = std::variant<trace_model::Bernoulli, trace_model::Markov, trace_model::Periodic,
                                trace_model::Constant>;

/// On slots harvest `joules_per_on_slot`, off slots nothing. Reproducible from `seed`.
inline EnergyTrace gen_trace(const TraceModel& model, std::size_t slots, std::uint64_t seed,
                             Joules joules_per_on_slot) {
    detail::require(slots >= 1, "trace needs at least one slot");
    detail::require(std::isfinite(joules_per_on_slot) && joules_per_on_slot >= 0.0,
                    "joules per on-slot must be >= 0");
    std::mt19937_64 rng(seed);
    EnergyTrace trace;
    trace.harvest.resize(slots, 0.0);

    if (const auto* m = std::get_if<trace_model::Bernoulli>(&model)) {
        detail::require_probability(m->p, "bernoulli p");
        for (auto& h : trace.harvest) {
            h = detail::uniform01(rng) < m->p ? joules_per_on_slot : 0.0;
        }
    } else if (const auto* m = std::get_if<trace_model::Markov>(&model)) {
        detail::require_probability(m->stay_on, "markov stay_on");
        detail::require_probability(m->stay_off, "markov stay_off");
        const double leave_on = 1.0 - m->stay_on;
        const double leave_off = 1.0 - m->stay_off;
        const double stationary_on =
            leave_on + leave_off > 0.0 ? leave_off / (leave_on + leave_off) : 0.5;
        bool on = detail::uniform01(rng) < stationary_on;
        for (auto& h : trace.harvest) {
            h = on ? joules_per_on_slot : 0.0;
            on = detail::uniform01(rng) < (on ? m->stay_on : leave_off);
        }
    } else if (const auto* m = std::get_if<trace_model::Periodic>(&model)) {
        detail::require(m->period >= 1 && m->on_length >= 0 && m->on_length <= m->period,
                        "periodic model needs 0 <= on_length <= period");
        for (std::size_t i = 0; i < slots; ++i) {
            const bool on = static_cast<std::int64_t>(i) % m->period < m->on_length;
            trace.harvest[i] = on ? joules_per_on_slot : 0.0;
        }
    } else {
        const auto& c = std::get<trace_model::Constant>(model);
        detail::require(std::isfinite(c.joules) && c.joules >= 0.0, "constant joules must be >= 0");
        trace.harvest.assign(slots, c.joules);
    }
    return trace;
}

enum class UtilityModel {
    random,  ///< cumulative uniform increments, expected crossing mid-network
    linear,  ///< layer j of L yields 2 * u_t * (j + 1) / L
};

struct WorkloadParams {
    std::size_t n_tasks = 10;
    Slot period_slots = 3;
    double deadline_factor = 2.0;
    std::size_t layers = 4;
    std::size_t units_per_layer = 1;
    Slot unit_cost = 1;
    Joules unit_energy = 1.0;
    double u_t = 1.0;
    UtilityModel utility_model = UtilityModel::random;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require(period_slots >= 1, "period must be >= 1 slot");
        detail::require(std::isfinite(deadline_factor) && deadline_factor >= 1.0,
                        "deadline factor must be >= 1");
        detail::require(layers >= 1 && units_per_layer >= 1 && unit_cost >= 1,
                        "layers, units per layer and unit cost must be >= 1");
        detail::require(std::isfinite(unit_energy) && unit_energy >= 0.0, "unit energy must be >= 0");
        detail::require(std::isfinite(u_t) && u_t > 0.0, "u_t must be > 0");
    }
};

/// Sporadic tasks: inter-arrival at least one period (plus up to one period of jitter),
/// deadline = release + deadline_factor * period, scripted per-layer utilities.
inline Workload gen_workload(const WorkloadParams& params) {
    params.validate();
    std::mt19937_64 rng(params.seed);
    const auto relative_deadline =
        static_cast<Slot>(std::llround(params.deadline_factor * static_cast<double>(params.period_slots)));
    const double L = static_cast<double>(params.layers);

    Workload w;
    Slot release = detail::uniform_int(rng, 0, params.period_slots - 1);
    for (std::size_t i = 0; i < params.n_tasks; ++i) {
        ImpreciseTask task;
        task.id = static_cast<TaskId>(i + 1);
        task.release = release;
        task.deadline = release + relative_deadline;
        task.u_t = {params.u_t};
        double utility = 0.0;
        for (std::size_t layer = 0; layer < params.layers; ++layer) {
            Subtask s;
            s.units.assign(params.units_per_layer, Unit{params.unit_cost, params.unit_energy});
            if (params.utility_model == UtilityModel::random) {
                utility += detail::uniform01(rng) * 4.0 * params.u_t / L;
            } else {
                utility = 2.0 * params.u_t * static_cast<double>(layer + 1) / L;
            }
            s.payload = utility;
            task.subtasks.push_back(std::move(s));
        }
        w.tasks.push_back(std::move(task));
        release += params.period_slots + detail::uniform_int(rng, 0, params.period_slots);
    }
    return w;
}

}  // namespace isched

#endif  // ISCHED_GENERATORS_HPP
