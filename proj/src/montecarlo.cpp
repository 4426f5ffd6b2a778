#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "threatlang/errors.hpp"
#include "threatlang/rng.hpp"
#include "threatlang/ttc.hpp"

namespace threatlang {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TrialSetup {
    const AttackGraph* graph = nullptr;
    uint64_t master_seed = 0;
    // -1 = decide per trial, 0/1 = forced by override
    std::vector<int8_t> forced;
    std::vector<uint32_t> targets;
};

// One full trial: draw defense enablements and local TTCs, run the
// label-setting sweep, store the global TTC column and target paths.
// Everything is derived from (master_seed, trial), so trials may run in
// any order on any number of workers.
void run_trial(const TrialSetup& setup, uint64_t trial, SimulationReport& report) {
    const AttackGraph& g = *setup.graph;
    const uint32_t n = static_cast<uint32_t>(g.step_count());
    Rng rng = trial_rng(setup.master_seed, trial);

    std::vector<char> enabled(g.defense_count(), 0);
    for (uint32_t d = 0; d < g.defense_count(); ++d) {
        if (setup.forced[d] >= 0) {
            enabled[d] = setup.forced[d];
        } else if (g.defense(d).enablement) {
            enabled[d] = rng.next_double() < *g.defense(d).enablement ? 1 : 0;
        } else {
            enabled[d] = g.defense(d).enabled ? 1 : 0;
        }
    }
    std::vector<char> blocked = g.blocked_steps(enabled);

    std::vector<double> locals(n);
    for (uint32_t s = 0; s < n; ++s) locals[s] = g.step(s).ttc.sample(rng);

    std::vector<double> glob = propagate(g, locals, blocked);

    for (uint32_t s = 0; s < n; ++s) report.samples[static_cast<size_t>(s) * report.trials + trial] = glob[s];

    for (size_t ti = 0; ti < setup.targets.size(); ++ti) {
        std::vector<uint32_t> path = backtrack_path(g, glob, setup.targets[ti]);
        auto& slot = report.target_paths[ti][trial];
        slot.reserve(path.size());
        for (uint32_t s : path) slot.push_back(g.step(s).id);
    }
}

// Serial reference path; the OpenMP kernel below must match it byte for
// byte, which the test suite checks.
void run_trials_serial(const TrialSetup& setup, SimulationReport& report) {
    for (uint64_t t = 0; t < report.trials; ++t) run_trial(setup, t, report);
}

void run_trials_parallel(const TrialSetup& setup, SimulationReport& report, int workers) {
#ifdef _OPENMP
    const int64_t trials = static_cast<int64_t>(report.trials);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (int64_t t = 0; t < trials; ++t) run_trial(setup, static_cast<uint64_t>(t), report);
#else
    (void)workers;
    run_trials_serial(setup, report);
#endif
}

} // namespace

std::optional<size_t> SimulationReport::step_pos(const std::string& id) const {
    auto it = std::lower_bound(step_ids.begin(), step_ids.end(), id);
    if (it == step_ids.end() || *it != id) return std::nullopt;
    return static_cast<size_t>(it - step_ids.begin());
}

SimulationReport monte_carlo(const AttackGraph& g, uint64_t trials, uint64_t master_seed,
                             const std::map<std::string, bool>& defense_overrides, int workers) {
    if (trials == 0) throw InvalidParameters("trials must be >= 1");
    if (g.entry_steps().empty()) throw NoEntry("graph has no entry steps");

    TrialSetup setup;
    setup.graph = &g;
    setup.master_seed = master_seed;
    setup.forced.assign(g.defense_count(), -1);
    for (const auto& [id, value] : defense_overrides) {
        auto d = g.find_defense(id);
        if (!d) throw UnknownDefense("unknown defense: " + id);
        setup.forced[*d] = value ? 1 : 0;
    }
    setup.targets = g.target_steps();

    SimulationReport report;
    report.fingerprint = g.fingerprint();
    report.trials = trials;
    report.master_seed = master_seed;
    report.rng_mixer = kRngMixerName;
    report.step_ids.reserve(g.step_count());
    for (const StepNode& s : g.steps()) report.step_ids.push_back(s.id);
    report.samples.assign(g.step_count() * trials, kInf);
    for (uint32_t t : setup.targets) {
        report.target_ids.push_back(g.step(t).id);
        report.target_impacts.push_back(g.step(t).impact);
    }
    report.target_paths.assign(setup.targets.size(),
                               std::vector<std::vector<std::string>>(trials));

    if (workers == 1) {
        run_trials_serial(setup, report);
    } else {
#ifdef _OPENMP
        int w = workers >= 1 ? workers : omp_get_max_threads();
#else
        int w = 1;
#endif
        run_trials_parallel(setup, report, w);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization and summaries
// ---------------------------------------------------------------------------

namespace {

using ordered = nlohmann::ordered_json;

ordered sample_to_json(double v) {
    if (v == kInf) return "inf";
    return v;
}

} // namespace

std::string report_to_json(const SimulationReport& r) {
    ordered doc;
    ordered header;
    header["fingerprint"] = r.fingerprint;
    header["trials"] = r.trials;
    header["master_seed"] = r.master_seed;
    header["rng_mixer"] = r.rng_mixer;
    if (r.horizon) header["horizon"] = *r.horizon;
    doc["header"] = std::move(header);

    ordered samples = ordered::object();
    for (size_t s = 0; s < r.step_ids.size(); ++s) {
        ordered arr = ordered::array();
        for (uint64_t t = 0; t < r.trials; ++t) arr.push_back(sample_to_json(r.sample_at(s, t)));
        samples[r.step_ids[s]] = std::move(arr);
    }
    doc["samples"] = std::move(samples);

    ordered paths = ordered::object();
    for (size_t ti = 0; ti < r.target_ids.size(); ++ti) {
        ordered arr = ordered::array();
        for (uint64_t t = 0; t < r.trials; ++t) {
            const auto& p = r.target_paths[ti][t];
            if (p.empty()) arr.push_back(nullptr);
            else arr.push_back(p);
        }
        paths[r.target_ids[ti]] = std::move(arr);
    }
    doc["critical_paths"] = std::move(paths);
    return doc.dump(2) + "\n";
}

StepSummary summarize(const SimulationReport& r, const std::string& step,
                      std::optional<double> horizon) {
    auto pos = r.step_pos(step);
    if (!pos) throw UnknownStep("step not in report: " + step);

    std::vector<double> sorted(r.samples.begin() + static_cast<std::ptrdiff_t>(*pos * r.trials),
                               r.samples.begin() + static_cast<std::ptrdiff_t>((*pos + 1) * r.trials));
    std::sort(sorted.begin(), sorted.end()); // +inf orders last

    StepSummary out;
    size_t finite = 0;
    double sum = 0.0;
    for (double v : sorted) {
        if (v < kInf) {
            ++finite;
            sum += v;
        }
    }
    out.reach_fraction = static_cast<double>(finite) / static_cast<double>(r.trials);
    out.mean = finite ? sum / static_cast<double>(finite) : kInf;

    auto rank = [&](double q) {
        double idx = std::ceil(q * static_cast<double>(sorted.size())) - 1.0;
        size_t i = idx < 0.0 ? 0 : static_cast<size_t>(idx);
        return sorted[std::min(i, sorted.size() - 1)];
    };
    out.p05 = rank(0.05);
    out.p50 = rank(0.50);
    out.p95 = rank(0.95);

    if (horizon) {
        size_t within = 0;
        for (double v : sorted) {
            if (v <= *horizon) ++within;
        }
        out.p_within = static_cast<double>(within) / static_cast<double>(r.trials);
    }
    return out;
}

std::string report_summary_csv(const SimulationReport& r) {
    auto fmt = [](double v) -> std::string {
        if (v == kInf) return "inf";
        return nlohmann::json(v).dump();
    };
    std::string out = "step,mean,reach_fraction,p05,p50,p95\n";
    for (const std::string& id : r.step_ids) {
        StepSummary s = summarize(r, id);
        out += id;
        out += ',';
        out += fmt(s.mean);
        out += ',';
        out += fmt(s.reach_fraction);
        out += ',';
        out += fmt(s.p05);
        out += ',';
        out += fmt(s.p50);
        out += ',';
        out += fmt(s.p95);
        out += '\n';
    }
    return out;
}

RiskMatrix risk_matrix(const SimulationReport& r, double horizon) {
    RiskMatrix m;
    size_t annotated = 0;
    for (size_t ti = 0; ti < r.target_ids.size(); ++ti) {
        if (!r.target_impacts[ti]) continue;
        ++annotated;
        StepSummary s = summarize(r, r.target_ids[ti], horizon);
        double p = *s.p_within;
        int bucket = p < 0.2 ? 1 : p < 0.4 ? 2 : p < 0.6 ? 3 : p < 0.8 ? 4 : 5;
        m.cells[static_cast<size_t>(bucket - 1)][static_cast<size_t>(*r.target_impacts[ti] - 1)]
            .push_back(r.target_ids[ti]);
    }
    if (annotated == 0)
        throw NoAnnotatedTargets("no target in the report carries an impact annotation");
    return m;
}

std::string risk_matrix_to_json(const RiskMatrix& m, double horizon) {
    ordered doc;
    doc["horizon"] = horizon;
    ordered cells = ordered::array();
    for (size_t l = 0; l < 5; ++l) {
        ordered row = ordered::array();
        for (size_t i = 0; i < 5; ++i) row.push_back(m.cells[l][i]);
        cells.push_back(std::move(row));
    }
    doc["cells"] = std::move(cells); // [likelihood-1][impact-1]
    return doc.dump(2) + "\n";
}

} // namespace threatlang
