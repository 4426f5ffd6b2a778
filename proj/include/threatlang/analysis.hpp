#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "threatlang/attack_graph.hpp"

namespace threatlang {

struct CriticalPath {
    std::vector<std::string> path; // entry .. target
    double cost = 0.0;             // target's global TTC
};

// Deterministic propagation with the given locals, then a parent walk back
// from the target. Throws Unreachable when the target's label is infinite.
CriticalPath critical_path(const AttackGraph& g, const std::string& target,
                           const std::map<std::string, double>& locals,
                           const std::map<std::string, bool>& defense_assignment = {});

struct StepFrequency {
    std::string step;
    double frequency = 0.0; // fraction of trials on the critical path
};

// Monte Carlo ranking: how often each step sits on the sampled critical
// path to target. Sorted by descending frequency, ties by id.
std::vector<StepFrequency> critical_steps(const AttackGraph& g, const std::string& target,
                                          uint64_t trials, uint64_t seed, int workers = 1);

enum class CutMode { Exact, Greedy };

// Smallest set of defenses whose joint enablement makes target unreachable
// under defense-aware OR/AND reachability. Exact mode (<= 20 defenses)
// returns a minimum-cardinality, lexicographically smallest set; greedy
// mode returns a valid but possibly larger set.
std::vector<std::string> min_defense_cut(const AttackGraph& g, const std::string& target, CutMode mode);

// Defense-aware reachability fixpoint: entries are live unless blocked, OR
// steps need one live parent, AND steps need all (and at least one).
std::vector<char> reachable_steps(const AttackGraph& g, const std::vector<char>& blocked);

// ---------------------------------------------------------------------------
// Alternative graph views
// ---------------------------------------------------------------------------

struct StateVertex {
    std::string source;      // instance part of the enabling parent; "-" for entries
    std::string destination; // instance part of the applied step
    std::string attack;      // step name
    std::vector<uint32_t> reached; // sorted step indexes, the state annotation
};

// State-enumeration view: breadth-first expansion over attacker knowledge
// states from the empty set; every feasible step application becomes a
// (source, destination, attack) vertex. Vertex 0 is the root.
struct StateGraph {
    std::vector<StateVertex> vertices;
    std::vector<std::pair<uint32_t, uint32_t>> arcs;
};

StateGraph to_state_enumeration(const AttackGraph& g, size_t cap);

// Condition-oriented view: one vertex per step's "compromised" condition,
// one arc per dependency edge labeled with the producing step.
struct ConditionGraph {
    std::vector<std::string> conditions; // "compromised: <step id>"
    struct Arc {
        uint32_t from, to;
        std::string label;
    };
    std::vector<Arc> arcs;
};

ConditionGraph to_condition_view(const AttackGraph& g);

std::string export_dot(const StateGraph& sg);
std::string export_json(const StateGraph& sg);
std::string export_dot(const ConditionGraph& cg);
std::string export_json(const ConditionGraph& cg);
std::string export_view(const StateGraph& sg, const std::string& format);
std::string export_view(const ConditionGraph& cg, const std::string& format);

} // namespace threatlang
