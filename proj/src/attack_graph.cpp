#include "threatlang/attack_graph.hpp"

#include <algorithm>
#include <cstdio>

#include "threatlang/errors.hpp"

namespace threatlang {

void AttackGraph::add_step(StepNode step) {
    if (finalized_) throw GraphError("graph is finalized");
    steps_.push_back(std::move(step));
}

void AttackGraph::add_defense(DefenseNode defense) {
    if (finalized_) throw GraphError("graph is finalized");
    defenses_.push_back(std::move(defense));
}

void AttackGraph::add_edge(const std::string& parent, const std::string& child) {
    if (finalized_) throw GraphError("graph is finalized");
    pending_edges_.emplace_back(parent, child);
}

void AttackGraph::require_finalized() const {
    if (!finalized_) throw GraphError("graph must be finalized first");
}

void AttackGraph::finalize() {
    if (finalized_) throw GraphError("graph is already finalized");

    std::sort(steps_.begin(), steps_.end(),
              [](const StepNode& a, const StepNode& b) { return a.id < b.id; });
    std::sort(defenses_.begin(), defenses_.end(),
              [](const DefenseNode& a, const DefenseNode& b) { return a.id < b.id; });

    step_index_.clear();
    for (uint32_t i = 0; i < steps_.size(); ++i) {
        if (!step_index_.emplace(steps_[i].id, i).second)
            throw GraphError("duplicate step id: " + steps_[i].id);
        if (steps_[i].impact && (*steps_[i].impact < 1 || *steps_[i].impact > 5))
            throw GraphError("impact outside 1..5 on step: " + steps_[i].id);
        if (steps_[i].ttc.family() == DistFamily::Bernoulli)
            throw GraphError("Bernoulli is only valid as defense enablement (step " + steps_[i].id + ")");
    }
    defense_index_.clear();
    for (uint32_t i = 0; i < defenses_.size(); ++i) {
        if (step_index_.count(defenses_[i].id))
            throw GraphError("id used by both a step and a defense: " + defenses_[i].id);
        if (!defense_index_.emplace(defenses_[i].id, i).second)
            throw GraphError("duplicate defense id: " + defenses_[i].id);
    }

    edges_.clear();
    edges_.reserve(pending_edges_.size());
    for (const auto& [p, c] : pending_edges_) {
        auto pi = step_index_.find(p);
        auto ci = step_index_.find(c);
        if (pi == step_index_.end()) throw GraphError("edge references unknown step: " + p);
        if (ci == step_index_.end()) throw GraphError("edge references unknown step: " + c);
        edges_.emplace_back(pi->second, ci->second);
    }
    pending_edges_.clear();
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

    const uint32_t n = static_cast<uint32_t>(steps_.size());
    std::vector<uint32_t> in_deg(n, 0), out_deg(n, 0);
    for (const auto& [p, c] : edges_) {
        ++out_deg[p];
        ++in_deg[c];
    }
    parent_offsets_.assign(n + 1, 0);
    child_offsets_.assign(n + 1, 0);
    for (uint32_t i = 0; i < n; ++i) {
        parent_offsets_[i + 1] = parent_offsets_[i] + in_deg[i];
        child_offsets_[i + 1] = child_offsets_[i] + out_deg[i];
    }
    parent_list_.assign(parent_offsets_[n], 0);
    child_list_.assign(child_offsets_[n], 0);
    std::vector<uint32_t> ppos(parent_offsets_.begin(), parent_offsets_.end() - 1);
    std::vector<uint32_t> cpos(child_offsets_.begin(), child_offsets_.end() - 1);
    for (const auto& [p, c] : edges_) {
        child_list_[cpos[p]++] = c;
        parent_list_[ppos[c]++] = p;
    }

    protect_index_.assign(defenses_.size(), {});
    for (uint32_t d = 0; d < defenses_.size(); ++d) {
        if (defenses_[d].protects.empty())
            throw GraphError("defense protects nothing: " + defenses_[d].id);
        if (defenses_[d].enablement && !(*defenses_[d].enablement >= 0.0 && *defenses_[d].enablement <= 1.0))
            throw GraphError("enablement probability outside [0,1] on defense: " + defenses_[d].id);
        for (const std::string& sid : defenses_[d].protects) {
            auto it = step_index_.find(sid);
            if (it == step_index_.end())
                throw GraphError("defense " + defenses_[d].id + " protects unknown step: " + sid);
            protect_index_[d].push_back(it->second);
        }
        std::sort(protect_index_[d].begin(), protect_index_[d].end());
        protect_index_[d].erase(std::unique(protect_index_[d].begin(), protect_index_[d].end()),
                                protect_index_[d].end());
    }
    finalized_ = true;
}

std::optional<uint32_t> AttackGraph::find_step(const std::string& id) const {
    require_finalized();
    auto it = step_index_.find(id);
    if (it == step_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<uint32_t> AttackGraph::find_defense(const std::string& id) const {
    require_finalized();
    auto it = defense_index_.find(id);
    if (it == defense_index_.end()) return std::nullopt;
    return it->second;
}

std::span<const uint32_t> AttackGraph::parents(uint32_t step) const {
    require_finalized();
    return {parent_list_.data() + parent_offsets_[step],
            parent_list_.data() + parent_offsets_[step + 1]};
}

std::span<const uint32_t> AttackGraph::children(uint32_t step) const {
    require_finalized();
    return {child_list_.data() + child_offsets_[step], child_list_.data() + child_offsets_[step + 1]};
}

std::span<const uint32_t> AttackGraph::protected_steps(uint32_t defense) const {
    require_finalized();
    return {protect_index_[defense].data(), protect_index_[defense].size()};
}

std::vector<uint32_t> AttackGraph::entry_steps() const {
    require_finalized();
    std::vector<uint32_t> out;
    for (uint32_t i = 0; i < steps_.size(); ++i) {
        if (steps_[i].entry) out.push_back(i);
    }
    return out;
}

std::vector<uint32_t> AttackGraph::target_steps() const {
    require_finalized();
    std::vector<uint32_t> out;
    for (uint32_t i = 0; i < steps_.size(); ++i) {
        if (steps_[i].target) out.push_back(i);
    }
    return out;
}

std::vector<char> AttackGraph::blocked_steps(const std::vector<char>& defense_enabled) const {
    require_finalized();
    if (defense_enabled.size() != defenses_.size())
        throw GraphError("defense assignment size mismatch");
    std::vector<char> blocked(steps_.size(), 0);
    for (uint32_t d = 0; d < defenses_.size(); ++d) {
        if (!defense_enabled[d]) continue;
        for (uint32_t s : protect_index_[d]) blocked[s] = 1;
    }
    return blocked;
}

std::vector<char> AttackGraph::default_enablement(const std::map<std::string, bool>& overrides) const {
    require_finalized();
    std::vector<char> enabled(defenses_.size(), 0);
    for (uint32_t d = 0; d < defenses_.size(); ++d) enabled[d] = defenses_[d].enabled ? 1 : 0;
    for (const auto& [id, value] : overrides) {
        auto idx = find_defense(id);
        if (!idx) throw UnknownDefense("unknown defense: " + id);
        enabled[*idx] = value ? 1 : 0;
    }
    return enabled;
}

std::string AttackGraph::fingerprint() const {
    require_finalized();
    const std::string canon = export_json(*this);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace threatlang
