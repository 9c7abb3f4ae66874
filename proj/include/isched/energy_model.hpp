#ifndef ISCHED_ENERGY_MODEL_HPP
#define ISCHED_ENERGY_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "isched/error.hpp"

namespace isched {

using Joules = double;

/// Harvested energy per slot.
struct EnergyTrace {
    double slot_duration = 1.0;
    std::vector<Joules> harvest;

    std::size_t size() const { return harvest.size(); }

    void validate() const {
        detail::require(std::isfinite(slot_duration) && slot_duration > 0.0,
                        "slot_duration must be positive");
        detail::require(!harvest.empty(), "energy trace is empty");
        for (std::size_t i = 0; i < harvest.size(); ++i) {
            detail::require(std::isfinite(harvest[i]) && harvest[i] >= 0.0,
                            "harvest at slot " + std::to_string(i) + " must be finite and >= 0");
        }
    }
};

/// An energy event is at least `k_joules` harvested within `t_slots` consecutive slots.
struct EventParams {
    Joules k_joules = 1.0;
    std::size_t t_slots = 1;

    void validate() const {
        detail::require(std::isfinite(k_joules) && k_joules > 0.0, "K must be > 0");
        detail::require(t_slots >= 1, "T must be >= 1");
    }
};

struct EventSeries {
    std::vector<bool> events;

    std::size_t size() const { return events.size(); }

    double rate() const {
        if (events.empty()) {
            return 0.0;
        }
        auto hits = std::count(events.begin(), events.end(), true);
        return static_cast<double>(hits) / static_cast<double>(events.size());
    }
};

/// Conditional energy-event probabilities CEE(N) for N in [-n_max, -1] and [1, n_max].
///
/// CEE(N > 0) is p(event | the N preceding positions were all events);
/// CEE(N < 0) the same given N preceding non-events. `support(N)` is the
/// number of positions at which the conditioning run was observed; entries
/// with zero support hold `fallback_rate`.
class CeeCurve {
public:
    CeeCurve() = default;

    CeeCurve(int n_max, double fill, double fallback_rate)
        : n_max_(checked_n_max(n_max)),
          values_(2 * static_cast<std::size_t>(n_max), fill),
          support_(2 * static_cast<std::size_t>(n_max), 0),
          fallback_rate_(fallback_rate) {
        detail::require(fill >= 0.0 && fill <= 1.0, "CEE values must lie in [0,1]");
        detail::require(fallback_rate >= 0.0 && fallback_rate <= 1.0,
                        "fallback rate must lie in [0,1]");
    }

    int n_max() const { return n_max_; }
    double fallback_rate() const { return fallback_rate_; }

    double at(int n) const { return values_[index(n)]; }
    std::size_t support(int n) const { return support_[index(n)]; }

    void set(int n, double value, std::size_t support = 0) {
        detail::require(value >= 0.0 && value <= 1.0, "CEE values must lie in [0,1]");
        values_[index(n)] = value;
        support_[index(n)] = support;
    }

    /// -n_max .. -1, 1 .. n_max in ascending order.
    std::vector<int> domain() const {
        std::vector<int> ns;
        ns.reserve(values_.size());
        for (int n = -n_max_; n <= n_max_; ++n) {
            if (n != 0) {
                ns.push_back(n);
            }
        }
        return ns;
    }

    friend bool operator==(const CeeCurve&, const CeeCurve&) = default;

private:
    static int checked_n_max(int n_max) {
        detail::require(n_max >= 1, "n_max must be >= 1");
        return n_max;
    }

    std::size_t index(int n) const {
        detail::require(n != 0 && n >= -n_max_ && n <= n_max_,
                        "CEE index " + std::to_string(n) + " outside [-n_max, n_max] \\ {0}");
        return n < 0 ? static_cast<std::size_t>(n + n_max_)
                     : static_cast<std::size_t>(n_max_ + n - 1);
    }

    int n_max_ = 0;
    std::vector<double> values_;
    std::vector<std::size_t> support_;
    double fallback_rate_ = 0.0;
};

struct EtaFactor {
    double value = 1.0;
    /// True when the random reference is itself at distance zero and eta is defined as 1.
    bool by_convention = false;
};

struct HarvesterProfile {
    double event_rate = 0.0;
    double kw_h = 0.0;  ///< harvester vs. ideal correlated source
    double kw_r = 0.0;  ///< random source of equal rate vs. ideal correlated source
    EtaFactor eta;
    CeeCurve cee;
    std::vector<int> compared;  ///< CEE indices that entered the KW means
};

struct AnalysisOptions {
    int n_max = 20;
    /// CEE entries observed at fewer positions are too noisy to compare.
    std::size_t min_support = 100;
};

/// Sliding windows of `t_slots` with stride 1; true where the window sum reaches K.
inline EventSeries detect_events(const EnergyTrace& trace, const EventParams& params) {
    trace.validate();
    params.validate();
    detail::require(trace.size() >= params.t_slots,
                    "trace has " + std::to_string(trace.size()) + " slots, shorter than T=" +
                        std::to_string(params.t_slots));
    const std::size_t windows = trace.size() - params.t_slots + 1;
    EventSeries out;
    out.events.resize(windows);
    for (std::size_t i = 0; i < windows; ++i) {
        // Summed directly per window: a rolling sum drifts and flips exact-K boundaries.
        const auto first = trace.harvest.begin() + static_cast<std::ptrdiff_t>(i);
        const Joules sum =
            std::accumulate(first, first + static_cast<std::ptrdiff_t>(params.t_slots), 0.0);
        out.events[i] = sum >= params.k_joules;
    }
    return out;
}

inline CeeCurve compute_cee(const EventSeries& series, int n_max) {
    detail::require(n_max >= 1, "n_max must be >= 1");
    detail::require(static_cast<std::size_t>(n_max) < series.size(),
                    "n_max must be smaller than the event series length");
    const auto& ev = series.events;
    const auto width = static_cast<std::size_t>(n_max);
    std::vector<std::size_t> hit_on(width + 1, 0), seen_on(width + 1, 0);
    std::vector<std::size_t> hit_off(width + 1, 0), seen_off(width + 1, 0);

    // Length of the run of equal values ending just before position i.
    std::size_t run = 0;
    for (std::size_t i = 1; i < ev.size(); ++i) {
        run = (i >= 2 && ev[i - 1] == ev[i - 2]) ? run + 1 : 1;
        const std::size_t reach = std::min(run, width);
        auto& seen = ev[i - 1] ? seen_on : seen_off;
        auto& hit = ev[i - 1] ? hit_on : hit_off;
        for (std::size_t n = 1; n <= reach; ++n) {
            ++seen[n];
            if (ev[i]) {
                ++hit[n];
            }
        }
    }

    const double rate = series.rate();
    CeeCurve curve(n_max, rate, rate);
    for (std::size_t n = 1; n <= width; ++n) {
        const int k = static_cast<int>(n);
        if (seen_on[n] > 0) {
            curve.set(k, static_cast<double>(hit_on[n]) / static_cast<double>(seen_on[n]),
                      seen_on[n]);
        }
        if (seen_off[n] > 0) {
            curve.set(-k, static_cast<double>(hit_off[n]) / static_cast<double>(seen_off[n]),
                      seen_off[n]);
        }
    }
    return curve;
}

/// CEE of an always-on source: every entry 1.
inline CeeCurve reference_persistent(int n_max) { return CeeCurve(n_max, 1.0, 1.0); }

/// CEE of a memoryless source with event probability p: every entry p.
inline CeeCurve reference_random(double p, int n_max) {
    detail::require(p >= 0.0 && p <= 1.0, "probability must lie in [0,1]");
    return CeeCurve(n_max, p, p);
}

/// Perfectly correlated source: an event run always continues (1 for N>0) and a
/// gap always continues (0 for N<0). Agrees with the persistent curve on every
/// N > 0, the only side a persistent source ever observes.
inline CeeCurve reference_correlated(int n_max) {
    CeeCurve curve(n_max, 1.0, 1.0);
    for (int n = 1; n <= n_max; ++n) {
        curve.set(-n, 0.0);
    }
    return curve;
}

/// Mean absolute difference of two CEE curves over the listed indices.
inline double kw_distance_over(const CeeCurve& h, const CeeCurve& p, std::span<const int> indices) {
    detail::require(h.n_max() == p.n_max(), "KW distance needs curves with equal n_max");
    detail::require(!indices.empty(), "KW distance over an empty index set");
    double total = 0.0;
    for (int n : indices) {
        total += std::abs(h.at(n) - p.at(n));
    }
    return total / static_cast<double>(indices.size());
}

/// Discrete Kantorovich-Wasserstein distance: mean |h(N) - p(N)| over all 2*n_max entries.
inline double kw_distance(const CeeCurve& h, const CeeCurve& p) {
    detail::require(h.n_max() == p.n_max(), "KW distance needs curves with equal n_max");
    const auto ns = h.domain();
    return kw_distance_over(h, p, ns);
}

inline EtaFactor eta_factor(double kw_h, double kw_r) {
    detail::require(std::isfinite(kw_h) && kw_h >= 0.0, "kw_h must be finite and >= 0");
    detail::require(std::isfinite(kw_r) && kw_r >= 0.0, "kw_r must be finite and >= 0");
    if (kw_r == 0.0) {
        return {1.0, true};
    }
    return {(kw_r - kw_h) / kw_r, false};
}

inline HarvesterProfile analyze_events(const EventSeries& series, const AnalysisOptions& options = {}) {
    HarvesterProfile profile;
    profile.cee = compute_cee(series, options.n_max);
    profile.event_rate = series.rate();

    const auto ns = profile.cee.domain();
    for (int n : ns) {
        if (profile.cee.support(n) >= std::max<std::size_t>(options.min_support, 1)) {
            profile.compared.push_back(n);
        }
    }
    if (profile.compared.empty()) {
        for (int n : ns) {
            if (profile.cee.support(n) > 0) {
                profile.compared.push_back(n);
            }
        }
    }

    const CeeCurve ideal = reference_correlated(options.n_max);
    const CeeCurve random = reference_random(profile.event_rate, options.n_max);
    profile.kw_h = kw_distance_over(profile.cee, ideal, profile.compared);
    profile.kw_r = kw_distance_over(random, ideal, profile.compared);
    profile.eta = eta_factor(profile.kw_h, profile.kw_r);
    return profile;
}

/// detect_events -> compute_cee -> KW against the correlated and random references -> eta.
inline HarvesterProfile analyze_trace(const EnergyTrace& trace, const EventParams& params,
                                      const AnalysisOptions& options = {}) {
    return analyze_events(detect_events(trace, params), options);
}

// ---------------------------------------------------------------------------
// Capacitor

struct Capacitor {
    Joules capacity = 1.0;
    Joules charge = 0.0;
    Joules e_man = 0.0;  ///< below this the device browns out
    Joules e_opt = 0.0;  ///< optional work threshold (compared against eta * E_curr)

    void validate() const {
        detail::require(std::isfinite(capacity) && capacity > 0.0, "capacity must be > 0");
        detail::require(charge >= 0.0 && charge <= capacity, "charge must lie in [0, capacity]");
        detail::require(e_man >= 0.0 && e_man <= e_opt && e_opt <= capacity,
                        "thresholds must satisfy 0 <= E_man <= E_opt <= capacity");
    }
};

struct CapacitorStep {
    Capacitor capacitor;
    Joules wasted = 0.0;  ///< harvest that did not fit
};

inline CapacitorStep capacitor_step(Capacitor cap, Joules harvested, Joules consumed) {
    detail::require(harvested >= 0.0 && consumed >= 0.0, "energy amounts must be >= 0");
    const Joules available = cap.charge + harvested;
    if (consumed > available) {
        throw InsufficientEnergy("requested " + std::to_string(consumed) + " J with only " +
                                 std::to_string(available) + " J available");
    }
    const Joules after = available - consumed;
    CapacitorStep step;
    step.wasted = std::max(0.0, after - cap.capacity);
    cap.charge = std::min(cap.capacity, after);
    step.capacitor = cap;
    return step;
}

}  // namespace isched

#endif  // ISCHED_ENERGY_MODEL_HPP
