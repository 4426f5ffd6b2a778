#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "threatlang/attack_graph.hpp"

namespace threatlang {

// Global time-to-compromise per step from a single set of local values.
//
// Entry steps cost their own local value. An OR step becomes compromised
// once its cheapest parent is, an AND step once its last parent is; both
// then add their own local increment:
//
//   OR:  t[child] = min(t[parent1], ..., t[parentN]) + local[child]
//   AND: t[child] = max(t[parent1], ..., t[parentN]) + local[child]
//
// Computed with a label-setting priority-queue sweep (a shortest-path
// relaxation generalized with max at AND nodes; monotone since locals are
// non-negative). Steps protected by an enabled defense, non-entry steps
// with no parents, and AND steps whose requirements never finalize (for
// example inside dependency cycles) end at +infinity.
std::vector<double> propagate(const AttackGraph& g, std::span<const double> locals,
                              const std::vector<char>& blocked);

// Map-based convenience wrapper; throws MissingLocal/NegativeLocal.
std::map<std::string, double> propagate(const AttackGraph& g,
                                        const std::map<std::string, double>& locals,
                                        const std::map<std::string, bool>& defense_assignment);

// Expected local value of every step (distribution means), step-indexed.
std::vector<double> expected_locals(const AttackGraph& g);

// Walks a finished propagation back from target: the minimizing parent at
// OR nodes, the maximizing parent at AND nodes, ties to the smaller id.
// Returns entry..target ids; empty when the target label is infinite.
std::vector<uint32_t> backtrack_path(const AttackGraph& g, std::span<const double> glob,
                                     uint32_t target);

struct SimulationReport {
    std::string fingerprint;
    uint64_t trials = 0;
    uint64_t master_seed = 0;
    std::string rng_mixer;
    std::optional<double> horizon;

    std::vector<std::string> step_ids;  // canonical (sorted) order
    std::vector<double> samples;        // [step * trials + trial]

    std::vector<std::string> target_ids;
    std::vector<std::optional<int>> target_impacts;
    // [target][trial] -> critical path (empty when unreachable that trial)
    std::vector<std::vector<std::vector<std::string>>> target_paths;

    double sample_at(size_t step, size_t trial) const { return samples[step * trials + trial]; }
    std::optional<size_t> step_pos(const std::string& id) const;
};

// Runs `trials` independent propagations with locals and Bernoulli defense
// enablements drawn per trial. Trial i derives its generator from
// (master_seed, i) alone, so the report is a pure function of
// (graph, trials, master_seed, overrides) no matter how many workers run.
SimulationReport monte_carlo(const AttackGraph& g, uint64_t trials, uint64_t master_seed,
                             const std::map<std::string, bool>& defense_overrides = {},
                             int workers = 1);

std::string report_to_json(const SimulationReport& r);
std::string report_summary_csv(const SimulationReport& r);

struct StepSummary {
    double mean = 0.0;           // over finite samples only
    double reach_fraction = 0.0; // finite samples / trials
    double p05 = 0.0, p50 = 0.0, p95 = 0.0;
    std::optional<double> p_within; // P(TTC <= horizon) when horizon given
};

StepSummary summarize(const SimulationReport& r, const std::string& step,
                      std::optional<double> horizon = std::nullopt);

// 5x5 likelihood x impact grid. Likelihood buckets partition [0,1] as
// [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1]; impact levels are 1..5.
struct RiskMatrix {
    std::array<std::array<std::vector<std::string>, 5>, 5> cells; // [likelihood-1][impact-1]
};

RiskMatrix risk_matrix(const SimulationReport& r, double horizon);
std::string risk_matrix_to_json(const RiskMatrix& m, double horizon);

} // namespace threatlang
