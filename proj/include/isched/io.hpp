#ifndef ISCHED_IO_HPP
#define ISCHED_IO_HPP

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "isched/clustering.hpp"
#include "isched/energy_model.hpp"
#include "isched/error.hpp"
#include "isched/sim.hpp"
#include "isched/task_model.hpp"

namespace isched::io {

using nlohmann::json;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cells.push_back(trim(cell));
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

template <class T>
T parse_number(const std::string& s, const std::string& where) {
    T value{};
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    isched::detail::require(ec == std::errc{} && ptr == end && !s.empty(),
                            where + ": cannot parse '" + s + "' as a number");
    return value;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    isched::detail::require(static_cast<bool>(in), "cannot open '" + path + "'");
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    isched::detail::require(static_cast<bool>(out), "cannot write '" + path + "'");
    return out;
}

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
    isched::detail::require(j.is_object() && j.contains(key), where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidInput(where + ": field '" + key + "': " + e.what());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Energy trace CSV: header `slot,joules`, slots consecutive from 0.

inline EnergyTrace read_trace_csv(std::istream& in, double slot_duration = 1.0) {
    EnergyTrace trace;
    trace.slot_duration = slot_duration;
    std::string line;
    isched::detail::require(static_cast<bool>(std::getline(in, line)), "trace CSV is empty");
    isched::detail::require(detail::split_csv(line) == std::vector<std::string>{"slot", "joules"},
                            "trace CSV header must be 'slot,joules'");
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto cells = detail::split_csv(line);
        const std::string where = "trace CSV line " + std::to_string(row);
        isched::detail::require(cells.size() == 2, where + ": expected 2 columns");
        const auto slot = detail::parse_number<long long>(cells[0], where);
        isched::detail::require(slot == static_cast<long long>(trace.harvest.size()),
                                where + ": slot indices must be consecutive from 0");
        trace.harvest.push_back(detail::parse_number<double>(cells[1], where));
    }
    trace.validate();
    return trace;
}

inline EnergyTrace read_trace_csv(const std::string& path, double slot_duration = 1.0) {
    auto in = detail::open_in(path);
    return read_trace_csv(in, slot_duration);
}

inline void write_trace_csv(std::ostream& out, const EnergyTrace& trace) {
    out << "slot,joules\n";
    for (std::size_t i = 0; i < trace.harvest.size(); ++i) {
        out << i << ',' << detail::format_double(trace.harvest[i]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Analysis report JSON

inline json profile_to_json(const HarvesterProfile& p) {
    json cee = json::object();
    for (int n : p.cee.domain()) {
        cee[std::to_string(n)] = p.cee.at(n);
    }
    json support = json::object();
    for (int n : p.cee.domain()) {
        support[std::to_string(n)] = p.cee.support(n);
    }
    return json{{"event_rate", p.event_rate},
                {"kw_h", p.kw_h},
                {"kw_r", p.kw_r},
                {"eta", p.eta.value},
                {"eta_by_convention", p.eta.by_convention},
                {"n_max", p.cee.n_max()},
                {"compared", p.compared},
                {"cee", cee},
                {"support", support}};
}

// ---------------------------------------------------------------------------
// Cluster model JSON: {feature_indices, centroids, counts, labels}

inline json model_to_json(const ClusterModel& m) {
    return json{{"feature_indices", m.feature_indices},
                {"centroids", m.centroids},
                {"counts", m.counts},
                {"labels", m.labels}};
}

inline ClusterModel model_from_json(const json& j) {
    const std::string where = "cluster model";
    ClusterModel m;
    m.feature_indices = detail::get_field<std::vector<std::size_t>>(j, "feature_indices", where);
    m.centroids = detail::get_field<std::vector<FeatureVector>>(j, "centroids", where);
    m.counts = detail::get_field<std::vector<std::size_t>>(j, "counts", where);
    m.labels = detail::get_field<std::vector<int>>(j, "labels", where);
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Workload JSON:
// {tasks:[{id, release, deadline, u_t, subtasks:[{units:[{cost,energy}], utility | features}]}],
//  models:[...]}   (models optional, one per layer, for feature payloads)

inline json workload_to_json(const Workload& w) {
    json tasks = json::array();
    for (const auto& t : w.tasks) {
        json subtasks = json::array();
        for (const auto& s : t.subtasks) {
            json units = json::array();
            for (const auto& u : s.units) {
                units.push_back({{"cost", u.cost_slots}, {"energy", u.energy_per_slot}});
            }
            json sj{{"units", units}};
            if (const auto* scripted = std::get_if<double>(&s.payload)) {
                sj["utility"] = *scripted;
            } else {
                sj["features"] = std::get<FeatureVector>(s.payload);
            }
            subtasks.push_back(std::move(sj));
        }
        json tj{{"id", t.id}, {"release", t.release}, {"deadline", t.deadline}, {"subtasks", subtasks}};
        if (t.u_t.size() == 1) {
            tj["u_t"] = t.u_t.front();
        } else {
            tj["u_t"] = t.u_t;
        }
        tasks.push_back(std::move(tj));
    }
    json out{{"tasks", tasks}};
    if (!w.models.empty()) {
        json models = json::array();
        for (const auto& m : w.models) {
            models.push_back(model_to_json(m));
        }
        out["models"] = models;
    }
    return out;
}

/// `default_unit_energy` fills units that omit "energy".
inline Workload workload_from_json(const json& j, Joules default_unit_energy = 1.0) {
    isched::detail::require(j.is_object() && j.contains("tasks") && j["tasks"].is_array(),
                            "workload JSON needs a 'tasks' array");
    Workload w;
    for (const auto& tj : j["tasks"]) {
        ImpreciseTask t;
        t.id = detail::get_field<TaskId>(tj, "id", "task");
        const std::string where = "task " + std::to_string(t.id);
        t.release = detail::get_field<Slot>(tj, "release", where);
        t.deadline = detail::get_field<Slot>(tj, "deadline", where);
        isched::detail::require(tj.contains("u_t"), where + ": missing field 'u_t'");
        if (tj["u_t"].is_array()) {
            t.u_t = detail::get_field<std::vector<double>>(tj, "u_t", where);
        } else {
            t.u_t = {detail::get_field<double>(tj, "u_t", where)};
        }
        isched::detail::require(tj.contains("subtasks") && tj["subtasks"].is_array(),
                                where + ": missing 'subtasks' array");
        for (const auto& sj : tj["subtasks"]) {
            Subtask s;
            isched::detail::require(sj.contains("units") && sj["units"].is_array(),
                                    where + ": subtask missing 'units' array");
            for (const auto& uj : sj["units"]) {
                Unit u;
                u.cost_slots = detail::get_field<Slot>(uj, "cost", where);
                u.energy_per_slot = uj.contains("energy") ? detail::get_field<double>(uj, "energy", where)
                                                          : default_unit_energy;
                s.units.push_back(u);
            }
            const bool has_utility = sj.contains("utility");
            const bool has_features = sj.contains("features");
            isched::detail::require(has_utility != has_features,
                                    where + ": each subtask needs exactly one of 'utility' or 'features'");
            if (has_utility) {
                s.payload = detail::get_field<double>(sj, "utility", where);
            } else {
                s.payload = detail::get_field<FeatureVector>(sj, "features", where);
            }
            t.subtasks.push_back(std::move(s));
        }
        w.tasks.push_back(std::move(t));
    }
    if (j.contains("models")) {
        isched::detail::require(j["models"].is_array(), "'models' must be an array");
        for (const auto& mj : j["models"]) {
            w.models.push_back(model_from_json(mj));
        }
    }
    w.validate();
    return w;
}

inline json read_json_file(const std::string& path) {
    auto in = detail::open_in(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInput("'" + path + "' is not valid JSON: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Schedule log CSV: `slot,task,subtask,unit,action`; absent fields are empty.

inline void write_log_csv(std::ostream& out, const ScheduleLog& log) {
    out << "slot,task,subtask,unit,action\n";
    for (const auto& r : log) {
        out << r.slot << ',';
        if (r.task) out << *r.task;
        out << ',';
        if (r.subtask) out << *r.subtask;
        out << ',';
        if (r.unit) out << *r.unit;
        out << ',' << to_string(r.action) << '\n';
    }
}

inline std::string log_to_csv(const ScheduleLog& log) {
    std::ostringstream out;
    write_log_csv(out, log);
    return out.str();
}

inline ScheduleLog read_log_csv(std::istream& in) {
    std::string line;
    isched::detail::require(static_cast<bool>(std::getline(in, line)), "log CSV is empty");
    isched::detail::require(detail::trim(line) == "slot,task,subtask,unit,action",
                            "log CSV header must be 'slot,task,subtask,unit,action'");
    ScheduleLog log;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto cells = detail::split_csv(line);
        const std::string where = "log CSV line " + std::to_string(row);
        isched::detail::require(cells.size() == 5, where + ": expected 5 columns");
        LogRow r;
        r.slot = detail::parse_number<Slot>(cells[0], where);
        if (!cells[1].empty()) r.task = detail::parse_number<TaskId>(cells[1], where);
        if (!cells[2].empty()) r.subtask = detail::parse_number<std::size_t>(cells[2], where);
        if (!cells[3].empty()) r.unit = detail::parse_number<std::size_t>(cells[3], where);
        r.action = parse_action(cells[4]);
        log.push_back(r);
    }
    return log;
}

// ---------------------------------------------------------------------------
// Report JSON

inline json report_to_json(const SimReport& r) {
    json tasks = json::array();
    for (const auto& t : r.tasks) {
        json tj{{"id", t.id},
                {"state", to_string(t.state)},
                {"schedulable_success", t.schedulable_success},
                {"utility", t.utility},
                {"subtasks_done", t.subtasks_done},
                {"consumed", t.consumed}};
        tj["mandatory_done_at"] = t.mandatory_done_at ? json(*t.mandatory_done_at) : json(nullptr);
        tj["finished_at"] = t.finished_at ? json(*t.finished_at) : json(nullptr);
        tj["left_queue_at"] = t.left_queue_at ? json(*t.left_queue_at) : json(nullptr);
        tasks.push_back(std::move(tj));
    }
    return json{{"tasks_released", r.tasks_released},
                {"tasks_schedulable_success", r.tasks_schedulable_success},
                {"tasks_full_complete", r.tasks_full_complete},
                {"deadline_misses", r.deadline_misses},
                {"tasks_unresolved", r.tasks_unresolved},
                {"accumulated_utility", r.accumulated_utility},
                {"energy_waste_unnecessary", r.energy_waste_unnecessary},
                {"energy_waste_overflow", r.energy_waste_overflow},
                {"busy_slots", r.busy_slots},
                {"off_slots", r.off_slots},
                {"energy_harvested", r.energy_harvested},
                {"energy_consumed", r.energy_consumed},
                {"charge_initial", r.charge_initial},
                {"charge_final", r.charge_final},
                {"trace_cycled", r.trace_cycled},
                {"tasks", tasks}};
}

}  // namespace isched::io

#endif  // ISCHED_IO_HPP
