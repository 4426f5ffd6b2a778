#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "threatlang/distribution.hpp"

namespace threatlang {

enum class StepKind { Or, And };

struct StepNode {
    std::string id; // "instance.step" for compiled graphs
    StepKind kind = StepKind::Or;
    TtcDistribution ttc; // local TTC; Constant(0) by default
    bool entry = false;
    bool target = false;
    std::optional<int> impact; // 1..5
};

struct DefenseNode {
    std::string id;
    std::vector<std::string> protects; // step ids, at least one
    bool enabled = false;              // default assignment
    std::optional<double> enablement;  // Bernoulli probability, sampled per trial
};

// Exploit-dependency graph over attack steps: edges run parent -> child in
// the attacker's direction of progress. OR steps need one compromised
// parent, AND steps need all of them. Cycles are representable.
class AttackGraph {
public:
    void add_step(StepNode step);
    void add_defense(DefenseNode defense);
    void add_edge(const std::string& parent, const std::string& child);

    // Validates, sorts nodes by id and builds adjacency indexes. Must be
    // called once after construction; mutation afterwards is not allowed.
    void finalize();
    bool finalized() const { return finalized_; }

    size_t step_count() const { return steps_.size(); }
    size_t defense_count() const { return defenses_.size(); }
    const StepNode& step(uint32_t idx) const { return steps_[idx]; }
    const DefenseNode& defense(uint32_t idx) const { return defenses_[idx]; }
    const std::vector<StepNode>& steps() const { return steps_; }
    const std::vector<DefenseNode>& defenses() const { return defenses_; }

    std::optional<uint32_t> find_step(const std::string& id) const;
    std::optional<uint32_t> find_defense(const std::string& id) const;

    std::span<const uint32_t> parents(uint32_t step) const;
    std::span<const uint32_t> children(uint32_t step) const;
    const std::vector<std::pair<uint32_t, uint32_t>>& edges() const { return edges_; }

    // Step indexes protected by defense idx.
    std::span<const uint32_t> protected_steps(uint32_t defense) const;

    std::vector<uint32_t> entry_steps() const;
    std::vector<uint32_t> target_steps() const;

    // Union of protected steps over enabled defenses, as a step-indexed mask.
    std::vector<char> blocked_steps(const std::vector<char>& defense_enabled) const;
    // Default defense assignment, optionally overridden by id.
    std::vector<char> default_enablement(const std::map<std::string, bool>& overrides = {}) const;

    // FNV-1a hash of the canonical JSON form; ties reports to their graph.
    std::string fingerprint() const;

private:
    void require_finalized() const;

    std::vector<StepNode> steps_;
    std::vector<DefenseNode> defenses_;
    std::vector<std::pair<uint32_t, uint32_t>> edges_; // by step index, deduplicated
    std::vector<std::pair<std::string, std::string>> pending_edges_;

    std::unordered_map<std::string, uint32_t> step_index_;
    std::unordered_map<std::string, uint32_t> defense_index_;
    std::vector<uint32_t> parent_offsets_, parent_list_;
    std::vector<uint32_t> child_offsets_, child_list_;
    std::vector<std::vector<uint32_t>> protect_index_;
    bool finalized_ = false;
};

// Canonical JSON graph schema (steps/defenses/edges); round-trips.
std::string export_json(const AttackGraph& g);
AttackGraph import_json(const std::string& text);

// DOT with the shape convention: ellipse = OR, box = AND, triangle = defense.
std::string export_dot(const AttackGraph& g);

// Dispatch on format name ("dot" | "json"); throws UnsupportedFormat.
std::string export_graph(const AttackGraph& g, const std::string& format);

} // namespace threatlang
