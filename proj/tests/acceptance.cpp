// Acceptance suite: prints one [PASS]/[FAIL] line per criterion, exits non-zero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "checks.hpp"
#include "fixtures.hpp"
#include "isched/energy_model.hpp"
#include "isched/generators.hpp"
#include "isched/io.hpp"
#include "isched/loss.hpp"
#include "isched/sim.hpp"
#include "oracles.hpp"

namespace {

using namespace isched;
using fixtures::MotivatingCase;

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            if (!ok) detail << "; ";
            ok = false;
            detail << "FAILED " << what;
        }
    }
};

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Every simulation run by the suite, kept for the conservation/determinism criterion.
struct Recorded {
    fixtures::Scenario scenario;
    SimResult result;
};
std::vector<Recorded> recorded;

SimResult record(const fixtures::Scenario& s) {
    SimResult r = s.run();
    recorded.push_back({s, r});
    return r;
}

const TaskOutcome& outcome_of(const SimReport& r, TaskId id) {
    for (const auto& t : r.tasks) {
        if (t.id == id) return t;
    }
    throw std::runtime_error("no outcome for task " + std::to_string(id));
}

// ---------------------------------------------------------------------------

void eta_extremes(Outcome& o) {
    const EventParams events{1.0, 1};
    const std::size_t slots = 100'000;

    auto timed = [&](const TraceModel& model, std::uint64_t seed, double& seconds) {
        const auto start = std::chrono::steady_clock::now();
        const auto profile = analyze_trace(gen_trace(model, slots, seed, 1.0), events, AnalysisOptions{20, 100});
        seconds = seconds_since(start);
        return profile;
    };

    double t_const = 0.0;
    double t_bern = 0.0;
    double t_markov = 0.0;
    const auto constant = timed(trace_model::Constant{1.0}, 0, t_const);
    const auto bernoulli = timed(trace_model::Bernoulli{0.3}, 1, t_bern);
    const auto markov = timed(trace_model::Markov{0.95, 0.95}, 1, t_markov);
    const double markov_oracle = oracle::markov_eta(0.95, 0.95);

    o.expect(constant.eta.value == 1.0, "constant trace eta == 1");
    o.expect(std::abs(bernoulli.eta.value) <= 0.05, "bernoulli |eta| <= 0.05");
    o.expect(markov.eta.value >= 0.5, "markov eta >= 0.5");
    o.expect(std::abs(markov.eta.value - markov_oracle) <= 0.05, "markov eta within 0.05 of closed form");
    o.expect(t_const < 2.0 && t_bern < 2.0 && t_markov < 2.0, "each analysis under 2 s");
    o.detail << " constant=" << num(constant.eta.value) << " bernoulli=" << num(bernoulli.eta.value)
             << " markov=" << num(markov.eta.value) << " (oracle " << num(markov_oracle) << ")"
             << " max_time=" << num(std::max({t_const, t_bern, t_markov}), 3) << "s";
}

void cee_exhaustive(Outcome& o) {
    std::size_t compared = 0;
    std::size_t mismatches = 0;
    for (std::size_t len = 2; len <= 12; ++len) {
        for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
            EventSeries s;
            for (std::size_t i = 0; i < len; ++i) s.events.push_back(((bits >> i) & 1u) != 0);
            for (int n_max = 1; n_max <= 3 && static_cast<std::size_t>(n_max) < len; ++n_max) {
                const CeeCurve curve = compute_cee(s, n_max);
                const auto expect = oracle::cee(s.events, n_max);
                for (int n : curve.domain()) {
                    ++compared;
                    if (curve.at(n) != expect.at(n).value || curve.support(n) != expect.at(n).support) {
                        ++mismatches;
                    }
                }
            }
        }
    }
    o.expect(mismatches == 0, "exact agreement with the enumerator");
    o.detail << " entries=" << compared << " mismatches=" << mismatches;
}

void motivating_example(Outcome& o) {
    for (auto which : {MotivatingCase::constant_power, MotivatingCase::outage, MotivatingCase::imprecise}) {
        const auto res = record(fixtures::motivating(which));
        const auto diffs = replay_check(res.log, fixtures::motivating_golden(which));
        const char* name = which == MotivatingCase::constant_power ? "a" : which == MotivatingCase::outage ? "b" : "c";
        o.expect(diffs.empty(), std::string("golden log for scenario ") + name);
        if (which == MotivatingCase::constant_power) {
            const auto& t1 = outcome_of(res.report, 1);
            const auto& t2 = outcome_of(res.report, 2);
            o.expect(t1.finished_at == 28 && t2.finished_at == 56, "scenario a completes at 28 and 56");
            o.expect(res.report.deadline_misses == 0, "scenario a has no misses");
            o.detail << " a: completions " << t1.finished_at.value_or(-1) << "," << t2.finished_at.value_or(-1);
        } else if (which == MotivatingCase::outage) {
            o.expect(outcome_of(res.report, 2).state == TaskState::missed, "scenario b tau2 misses");
            o.detail << " b: tau2 " << to_string(outcome_of(res.report, 2).state);
        } else {
            o.expect(res.report.tasks_schedulable_success == 2, "scenario c both schedulable-success");
            o.detail << " c: successes " << res.report.tasks_schedulable_success;
        }
    }
}

void walkthrough(Outcome& o) {
    const auto res = record(fixtures::walkthrough());
    const auto golden = fixtures::walkthrough_golden();
    const auto diffs = replay_check(res.log, golden);
    o.expect(diffs.empty(), "schedule log matches all nine narrated slots");

    // Energy conditions of the narration, from an independent charge replay.
    const auto s = fixtures::walkthrough();
    double charge = s.config.capacitor.charge;
    std::vector<double> before_dispatch;
    for (Slot t = 0; t < s.config.horizon; ++t) {
        charge = std::min(s.config.capacitor.capacity, charge + s.trace.harvest[static_cast<std::size_t>(t)]);
        before_dispatch.push_back(charge);
        bool ran = false;
        for (const auto& r : res.log) ran = ran || (r.slot == t && is_dispatch(r.action));
        bool off = false;
        for (const auto& r : res.log) off = off || (r.slot == t && r.action == Action::idle_no_energy);
        if (ran) charge -= 1.0;
        if (!off) charge -= std::min(s.config.idle_power, charge);
    }
    const auto& cap = s.config.capacitor;
    o.expect(before_dispatch[2] < cap.e_opt, "E < E_opt at t2");
    o.expect(before_dispatch[4] < cap.e_man, "E < E_man at t4");
    o.expect(before_dispatch[6] > cap.e_opt, "E > E_opt at t6");

    const auto perturbed = record(fixtures::walkthrough(1.5));
    const auto first = first_divergence(replay_check(perturbed.log, golden));
    o.expect(first.has_value() && *first == 2, "perturbed E_opt first diverges at t2");
    o.detail << " rows=" << res.log.size() << " diffs=" << diffs.size() << " E(t2,t4,t6)=" << num(before_dispatch[2], 1)
             << "," << num(before_dispatch[4], 1) << "," << num(before_dispatch[6], 1)
             << " perturbed_divergence=t" << first.value_or(-1);
}

void separation(Outcome& o) {
    const auto tasks = fixtures::separation_tasks();
    std::vector<oracle::RefTask> ref;
    for (const auto& t : tasks) ref.push_back(oracle::to_ref(t));
    const auto space = oracle::enumerate_schedules(ref, 12);
    const auto zeta = record(fixtures::persistent(tasks, PolicyKind::zeta, 12));
    const auto edf = record(fixtures::persistent(tasks, PolicyKind::edf, 12));
    const auto zeta_log = oracle::successes_of_log(ref, zeta.log);
    const auto edf_log = oracle::successes_of_log(ref, edf.log);
    o.expect(space.max_successes == 2, "enumeration finds a schedule meeting both mandatory portions");
    o.expect(zeta_log == 2 && zeta.report.tasks_schedulable_success == 2, "zeta meets both");
    o.expect(edf_log == 1 && edf.report.tasks_schedulable_success == 1, "edf meets one");

    const auto utasks = fixtures::utility_tasks();
    const auto zeta_u = record(fixtures::persistent(utasks, PolicyKind::zeta, 8));
    const auto edf_u = record(fixtures::persistent(utasks, PolicyKind::edf, 8));
    o.expect(zeta_u.report.tasks_schedulable_success == 2 && edf_u.report.tasks_schedulable_success == 2,
             "both policies succeed on the utility instance");
    o.expect(zeta_u.report.accumulated_utility > edf_u.report.accumulated_utility, "zeta utility exceeds edf");
    o.detail << " schedules=" << space.schedules << " best=" << space.max_successes
             << " successes zeta/edf=" << zeta.report.tasks_schedulable_success << "/"
             << edf.report.tasks_schedulable_success << " utility zeta/edf="
             << num(zeta_u.report.accumulated_utility, 2) << "/" << num(edf_u.report.accumulated_utility, 2);
}

void conservative_gating(Outcome& o) {
    std::size_t workloads = 0;
    std::size_t dispatched = 0;
    std::size_t optional_available = 0;
    std::size_t violations = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        fixtures::Scenario s;
        WorkloadParams wp;
        wp.n_tasks = 6;
        wp.layers = 4;
        wp.units_per_layer = 1 + seed % 2;
        wp.seed = seed;
        s.workload = gen_workload(wp);
        const Slot horizon = s.workload.tasks.back().deadline + 1;
        s.trace = gen_trace(trace_model::Bernoulli{0.6}, static_cast<std::size_t>(horizon), seed + 7, 2.0);
        s.config.capacitor = Capacitor{10.0, 5.0, 1.0, 4.0};
        s.config.eta = 0.35;  // eta * charge <= 3.5 < E_opt at every slot
        s.config.horizon = horizon;
        s.config.policy.kind = PolicyKind::zeta_i;
        s.config.policy.params = default_priority_params(s.workload.tasks);
        const auto res = s.run();
        ++workloads;

        for (const auto& task : s.workload.tasks) {
            double best = 0.0;
            for (std::size_t j = 0; j + 1 < task.subtasks.size(); ++j) {
                best = std::max(best, std::get<double>(task.subtasks[j].payload));
                if (best >= task.threshold(j)) {
                    ++optional_available;
                    break;
                }
            }
        }
        for (const auto& row : res.log) {
            if (!is_dispatch(row.action)) continue;
            ++dispatched;
            const auto& task = *std::find_if(s.workload.tasks.begin(), s.workload.tasks.end(),
                                             [&](const ImpreciseTask& t) { return t.id == *row.task; });
            double best = 0.0;
            bool optional = false;
            for (std::size_t j = 0; j < *row.subtask; ++j) {
                best = std::max(best, std::get<double>(task.subtasks[j].payload));
                optional = optional || best >= task.threshold(j);
            }
            violations += optional ? 1 : 0;
        }
    }
    o.expect(violations == 0, "no optional subtask dispatched");
    o.expect(dispatched > 0 && optional_available > 0, "workloads exercise the gate");
    o.detail << " workloads=" << workloads << " tasks_with_optional_work=" << optional_available
             << " dispatch_rows=" << dispatched << " optional_dispatches=" << violations;
}

void energy_task(Outcome& o) {
    const auto zeta = record(fixtures::windowed(PolicyKind::zeta));
    const auto aware = record(fixtures::windowed(PolicyKind::energy_zeta));
    o.expect(zeta.report.deadline_misses >= 1, "window-oblivious zeta misses a deadline");
    o.expect(aware.report.tasks_schedulable_success == 2 && aware.report.deadline_misses == 0,
             "energy-task zeta meets both");
    o.detail << " zeta misses=" << zeta.report.deadline_misses
             << " energy-zeta successes=" << aware.report.tasks_schedulable_success;
}

void clustering_oracle(Outcome& o) {
    const auto res = checks::run_cluster_check(2024, 500);
    o.expect(res.mismatches == 0, "assign/utility/update match brute force (" + res.first_mismatch + ")");

    std::mt19937_64 rng(99);
    double worst = 0.0;
    for (int inst = 0; inst < 500; ++inst) {
        const auto n = static_cast<std::size_t>(detail::uniform_int(rng, 4, 30));
        const auto d = static_cast<std::size_t>(detail::uniform_int(rng, 1, 6));
        std::vector<FeatureVector> x(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(i % 2 == 0 ? 0 : detail::uniform_int(rng, 1, 3));
            for (std::size_t j = 0; j < d; ++j) x[i].push_back(detail::uniform01(rng) * 10.0 - 2.0);
        }
        const auto got = chi2_scores(x, y).scores;
        const auto expect = oracle::chi2(x, y);
        for (std::size_t j = 0; j < d; ++j) {
            worst = std::max(worst, std::abs(got[j] - expect[j]) / std::max(1.0, std::abs(expect[j])));
        }
    }
    o.expect(worst <= 1e-9, "chi-squared within 1e-9 of the contingency-table oracle");
    o.detail << " instances=" << res.instances << " mismatches=" << res.mismatches << " chi2_max_rel_err=" << worst;
}

void loss_checks(Outcome& o) {
    const std::vector<double> a{0.3, -1.2};
    const std::vector<double> far{2.3, 0.8};
    o.expect(contrastive_pair(a, a, true, 1.0) == 0.0, "same-class identical pair is zero");
    o.expect(contrastive_pair(a, far, false, 1.0) == 0.0, "different-class pair beyond the margin is zero");
    o.expect(contrastive_pair(a, a, false, 1.0) == 0.5, "different-class identical pair is delta/2");

    const auto grad = checks::run_loss_check(7, 100);
    o.expect(grad.max_relative_error <= 1e-4, "gradient within 1e-4 of central differences");

    const double delta = 1.0;
    EmbeddingSet set;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    set.points.assign(2, {});
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 5; ++i) {
            set.labels.push_back(c);
            for (auto& layer : set.points) layer.push_back({noise(rng), noise(rng)});
        }
    }
    const auto history = fit_embeddings(set, default_alpha(2), delta, 8.0, 200);
    double worst_same = 0.0;
    double closest_cross = std::numeric_limits<double>::infinity();
    for (const auto& layer : set.points) {
        double same = 0.0;
        std::size_t same_n = 0;
        for (std::size_t i = 0; i < layer.size(); ++i) {
            for (std::size_t j = i + 1; j < layer.size(); ++j) {
                const double d = squared_distance(layer[i], layer[j]);
                if (set.labels[i] == set.labels[j]) {
                    same += d;
                    ++same_n;
                } else {
                    closest_cross = std::min(closest_cross, d);
                }
            }
        }
        worst_same = std::max(worst_same, same / static_cast<double>(same_n));
    }
    o.expect(worst_same < 0.1 * delta, "same-class mean distance < 0.1 delta");
    o.expect(closest_cross >= delta, "all cross-class distances >= delta");
    o.detail << " grad_max_rel_err=" << grad.max_relative_error << " fit: same_mean=" << num(worst_same)
             << " min_cross=" << num(closest_cross) << " final_loss=" << history.back();
}

void conservation_determinism(Outcome& o) {
    // Extra randomized runs across every policy.
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        fixtures::Scenario s;
        WorkloadParams wp;
        wp.n_tasks = 5;
        wp.units_per_layer = 1 + seed % 3;
        wp.unit_energy = 0.7;
        wp.seed = seed;
        s.workload = gen_workload(wp);
        s.config.horizon = s.workload.tasks.back().deadline + 1;
        s.trace = gen_trace(trace_model::Markov{0.8, 0.7}, 40, seed, 1.3);
        s.config.cycle_trace = true;
        s.config.capacitor = Capacitor{3.0, 0.4, 0.5, 2.0};
        s.config.idle_power = 0.1 * static_cast<double>(seed % 3);
        const PolicyKind kinds[] = {PolicyKind::edf,  PolicyKind::edf_m,      PolicyKind::zeta,
                                    PolicyKind::zeta_i, PolicyKind::energy_edf, PolicyKind::energy_zeta};
        s.config.policy.kind = kinds[seed % 6];
        s.config.policy.energy_task = EnergyTaskSpec{10, 3, 4};
        s.config.policy.params = default_priority_params(s.workload.tasks);
        record(s);
    }

    double worst = 0.0;
    std::size_t nondeterministic = 0;
    for (const auto& r : recorded) {
        worst = std::max(worst, std::abs(r.result.report.conservation_error()));
        const auto again = r.scenario.run();
        const bool same = io::log_to_csv(again.log) == io::log_to_csv(r.result.log) &&
                          io::report_to_json(again.report).dump() == io::report_to_json(r.result.report).dump();
        nondeterministic += same ? 0 : 1;
    }
    o.expect(worst <= 1e-9, "conservation identity within 1e-9");
    o.expect(nondeterministic == 0, "reruns byte-identical");
    o.detail << " runs=" << recorded.size() << " max_conservation_error=" << worst
             << " nondeterministic=" << nondeterministic;
}

}  // namespace

int main() {
    struct Criterion {
        const char* id;
        const char* title;
        std::function<void(Outcome&)> body;
    };
    bool ac5 = false;
    bool ac6 = false;
    const std::vector<Criterion> criteria = {
        {"AC1", "eta extremes", eta_extremes},
        {"AC2", "CEE brute-force equivalence", cee_exhaustive},
        {"AC3", "motivating example golden logs", motivating_example},
        {"AC4", "ZETA_I intermittent walkthrough", walkthrough},
        {"AC5", "scheduler separation", [&](Outcome& o) { separation(o); ac5 = o.ok; }},
        {"AC6", "conservative gating", [&](Outcome& o) { conservative_gating(o); ac6 = o.ok; }},
        {"AC7", "energy-task special case", energy_task},
        {"AC8", "clustering oracle", clustering_oracle},
        {"AC9", "loss checks", loss_checks},
        {"AC10", "energy conservation and determinism", conservation_determinism},
        {"AC11", "hardware headline numbers out of scope",
         [&](Outcome& o) {
             o.expect(ac5 && ac6, "directional stand-ins AC5 and AC6 hold");
             o.detail << " not asserted: device accuracy/time/task-count figures; stand-ins AC5="
                      << (ac5 ? "pass" : "fail") << " AC6=" << (ac6 ? "pass" : "fail");
         }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            c.body(o);
        } catch (const std::exception& e) {
            o.expect(false, std::string("exception: ") + e.what());
        }
        failures += o.ok ? 0 : 1;
        std::cout << (o.ok ? "[PASS] " : "[FAIL] ") << c.id << " " << c.title << ":" << o.detail.str() << "\n";
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
              << " criteria passed\n";
    return failures == 0 ? 0 : 1;
}
