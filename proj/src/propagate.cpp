#include <algorithm>
#include <limits>
#include <queue>

#include "threatlang/errors.hpp"
#include "threatlang/ttc.hpp"

namespace threatlang {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::vector<double> propagate(const AttackGraph& g, std::span<const double> locals,
                              const std::vector<char>& blocked) {
    const uint32_t n = static_cast<uint32_t>(g.step_count());
    if (locals.size() != n) throw MissingLocal("locals must cover every step");
    if (blocked.size() != n) throw GraphError("blocked mask size mismatch");
    for (uint32_t i = 0; i < n; ++i) {
        if (std::isnan(locals[i]) || locals[i] < 0.0)
            throw NegativeLocal("negative local TTC on step: " + g.step(i).id);
    }

    std::vector<double> glob(n, kInf);
    std::vector<char> finalized(n, 0);
    // AND nodes wait for all parents; track how many are still open and
    // the running max of finalized parents' labels.
    std::vector<uint32_t> waiting(n, 0);
    std::vector<double> and_max(n, 0.0);

    using QEntry = std::pair<double, uint32_t>;
    std::priority_queue<QEntry, std::vector<QEntry>, std::greater<QEntry>> queue;

    for (uint32_t i = 0; i < n; ++i) {
        const StepNode& s = g.step(i);
        if (s.kind == StepKind::And) waiting[i] = static_cast<uint32_t>(g.parents(i).size());
        if (s.entry && !blocked[i] && locals[i] < kInf) {
            glob[i] = locals[i];
            queue.push({glob[i], i});
        }
    }

    auto relax_or = [&](uint32_t child, double parent_label) {
        double cand = parent_label + locals[child];
        if (cand < glob[child]) {
            glob[child] = cand;
            queue.push({cand, child});
        }
    };

    while (!queue.empty()) {
        auto [label, node] = queue.top();
        queue.pop();
        if (finalized[node] || label > glob[node]) continue; // stale entry
        finalized[node] = 1;
        for (uint32_t child : g.children(node)) {
            if (finalized[child] || blocked[child] || locals[child] == kInf) continue;
            const StepNode& cs = g.step(child);
            if (cs.entry) continue; // entries keep their own label
            if (cs.kind == StepKind::Or) {
                relax_or(child, label);
            } else {
                and_max[child] = std::max(and_max[child], label);
                if (--waiting[child] == 0) {
                    double cand = and_max[child] + locals[child];
                    if (cand < glob[child]) {
                        glob[child] = cand;
                        queue.push({cand, child});
                    }
                }
            }
        }
    }
    return glob;
}

std::map<std::string, double> propagate(const AttackGraph& g,
                                        const std::map<std::string, double>& locals,
                                        const std::map<std::string, bool>& defense_assignment) {
    const uint32_t n = static_cast<uint32_t>(g.step_count());
    std::vector<double> loc(n);
    for (uint32_t i = 0; i < n; ++i) {
        auto it = locals.find(g.step(i).id);
        if (it == locals.end()) throw MissingLocal("no local TTC for step: " + g.step(i).id);
        loc[i] = it->second;
    }
    std::vector<char> enabled(g.defense_count(), 0);
    for (uint32_t d = 0; d < g.defense_count(); ++d) {
        auto it = defense_assignment.find(g.defense(d).id);
        enabled[d] = (it != defense_assignment.end() ? it->second : g.defense(d).enabled) ? 1 : 0;
    }
    std::vector<double> glob = propagate(g, loc, g.blocked_steps(enabled));
    std::map<std::string, double> out;
    for (uint32_t i = 0; i < n; ++i) out[g.step(i).id] = glob[i];
    return out;
}

std::vector<double> expected_locals(const AttackGraph& g) {
    std::vector<double> out(g.step_count());
    for (uint32_t i = 0; i < g.step_count(); ++i) out[i] = g.step(i).ttc.mean();
    return out;
}

std::vector<uint32_t> backtrack_path(const AttackGraph& g, std::span<const double> glob,
                                     uint32_t target) {
    if (glob[target] == kInf) return {};
    std::vector<uint32_t> path{target};
    std::vector<char> visited(g.step_count(), 0);
    visited[target] = 1;
    uint32_t cur = target;
    while (!g.step(cur).entry) {
        const bool is_or = g.step(cur).kind == StepKind::Or;
        std::optional<uint32_t> pick;
        for (uint32_t p : g.parents(cur)) {
            if (glob[p] == kInf || visited[p]) continue;
            if (!pick) {
                pick = p;
                continue;
            }
            // node storage is sorted by id, so smaller index = smaller id
            if (is_or ? (glob[p] < glob[*pick] || (glob[p] == glob[*pick] && p < *pick))
                      : (glob[p] > glob[*pick] || (glob[p] == glob[*pick] && p < *pick)))
                pick = p;
        }
        if (!pick) break; // zero-cost cycle; every remaining parent already on the path
        cur = *pick;
        path.push_back(cur);
        visited[cur] = 1;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

} // namespace threatlang
