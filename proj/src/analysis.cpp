#include "threatlang/analysis.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <set>

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

uint32_t require_step(const AttackGraph& g, const std::string& id) {
    auto idx = g.find_step(id);
    if (!idx) throw UnknownStep("unknown step: " + id);
    return *idx;
}
} // namespace

// ---------------------------------------------------------------------------
// Critical path / critical steps
// ---------------------------------------------------------------------------

CriticalPath critical_path(const AttackGraph& g, const std::string& target,
                           const std::map<std::string, double>& locals,
                           const std::map<std::string, bool>& defense_assignment) {
    const uint32_t tgt = require_step(g, target);
    if (g.entry_steps().empty()) throw NoEntry("graph has no entry steps");

    std::vector<double> loc(g.step_count());
    for (uint32_t i = 0; i < g.step_count(); ++i) {
        auto it = locals.find(g.step(i).id);
        if (it == locals.end()) throw MissingLocal("no local TTC for step: " + g.step(i).id);
        loc[i] = it->second;
    }
    std::vector<char> enabled = g.default_enablement(defense_assignment);
    std::vector<double> glob = propagate(g, loc, g.blocked_steps(enabled));
    if (glob[tgt] == kInf) throw Unreachable("target is unreachable: " + target);

    CriticalPath out;
    out.cost = glob[tgt];
    for (uint32_t s : backtrack_path(g, glob, tgt)) out.path.push_back(g.step(s).id);
    return out;
}

std::vector<StepFrequency> critical_steps(const AttackGraph& g, const std::string& target,
                                          uint64_t trials, uint64_t seed, int workers) {
    const uint32_t tgt = require_step(g, target);
    if (trials == 0) throw InvalidParameters("trials must be >= 1");
    if (g.entry_steps().empty()) throw NoEntry("graph has no entry steps");
    const uint32_t n = static_cast<uint32_t>(g.step_count());

    // Identical sampling order to monte_carlo: defenses first, then steps,
    // both in canonical id order.
    auto run = [&](uint64_t trial, std::vector<uint64_t>& counts, uint64_t& reached) {
        Rng rng = trial_rng(seed, trial);
        std::vector<char> enabled(g.defense_count(), 0);
        for (uint32_t d = 0; d < g.defense_count(); ++d) {
            if (g.defense(d).enablement) enabled[d] = rng.next_double() < *g.defense(d).enablement ? 1 : 0;
            else enabled[d] = g.defense(d).enabled ? 1 : 0;
        }
        std::vector<char> blocked = g.blocked_steps(enabled);
        std::vector<double> locals(n);
        for (uint32_t s = 0; s < n; ++s) locals[s] = g.step(s).ttc.sample(rng);
        std::vector<double> glob = propagate(g, locals, blocked);
        std::vector<uint32_t> path = backtrack_path(g, glob, tgt);
        if (!path.empty()) ++reached;
        for (uint32_t s : path) ++counts[s];
    };

    std::vector<uint64_t> counts(n, 0);
    uint64_t reached = 0;
    if (workers == 1) {
        for (uint64_t t = 0; t < trials; ++t) run(t, counts, reached);
    } else {
#ifdef _OPENMP
        const int w = workers >= 1 ? workers : omp_get_max_threads();
#pragma omp parallel num_threads(w)
        {
            std::vector<uint64_t> local_counts(n, 0);
            uint64_t local_reached = 0;
            const int64_t tr = static_cast<int64_t>(trials);
#pragma omp for schedule(dynamic)
            for (int64_t t = 0; t < tr; ++t) run(static_cast<uint64_t>(t), local_counts, local_reached);
#pragma omp critical
            {
                for (uint32_t s = 0; s < n; ++s) counts[s] += local_counts[s];
                reached += local_reached;
            }
        }
#else
        for (uint64_t t = 0; t < trials; ++t) run(t, counts, reached);
#endif
    }
    if (reached == 0) throw Unreachable("target unreachable in every trial: " + target);

    std::vector<StepFrequency> out;
    out.reserve(n);
    for (uint32_t s = 0; s < n; ++s)
        out.push_back({g.step(s).id, static_cast<double>(counts[s]) / static_cast<double>(trials)});
    std::sort(out.begin(), out.end(), [](const StepFrequency& a, const StepFrequency& b) {
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return a.step < b.step;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Reachability and minimal defense cuts
// ---------------------------------------------------------------------------

std::vector<char> reachable_steps(const AttackGraph& g, const std::vector<char>& blocked) {
    const uint32_t n = static_cast<uint32_t>(g.step_count());
    std::vector<char> live(n, 0);
    std::vector<uint32_t> waiting(n, 0);
    std::deque<uint32_t> queue;
    for (uint32_t i = 0; i < n; ++i) {
        const StepNode& s = g.step(i);
        if (s.kind == StepKind::And) waiting[i] = static_cast<uint32_t>(g.parents(i).size());
        if (s.entry && !blocked[i]) {
            live[i] = 1;
            queue.push_back(i);
        }
    }
    while (!queue.empty()) {
        uint32_t node = queue.front();
        queue.pop_front();
        for (uint32_t child : g.children(node)) {
            if (live[child] || blocked[child] || g.step(child).entry) continue;
            if (g.step(child).kind == StepKind::Or) {
                live[child] = 1;
                queue.push_back(child);
            } else if (--waiting[child] == 0) {
                live[child] = 1;
                queue.push_back(child);
            }
        }
    }
    return live;
}

namespace {

bool cut_is_valid(const AttackGraph& g, uint32_t target, const std::vector<char>& enabled) {
    return !reachable_steps(g, g.blocked_steps(enabled))[target];
}

std::vector<std::string> exact_cut(const AttackGraph& g, uint32_t target) {
    const uint32_t d = static_cast<uint32_t>(g.defense_count());
    std::vector<char> enabled(d, 0);

    // Subsets in order of size, lexicographic within a size; defenses are
    // stored sorted by id so the first valid subset is the answer.
    for (uint32_t k = 0; k <= d; ++k) {
        std::vector<uint32_t> combo(k);
        for (uint32_t i = 0; i < k; ++i) combo[i] = i;
        for (;;) {
            std::fill(enabled.begin(), enabled.end(), 0);
            for (uint32_t i : combo) enabled[i] = 1;
            if (cut_is_valid(g, target, enabled)) {
                std::vector<std::string> out;
                for (uint32_t i : combo) out.push_back(g.defense(i).id);
                return out;
            }
            if (k == 0) break;
            // next combination
            int32_t pos = static_cast<int32_t>(k) - 1;
            while (pos >= 0 && combo[static_cast<size_t>(pos)] == d - k + static_cast<uint32_t>(pos)) --pos;
            if (pos < 0) break;
            ++combo[static_cast<size_t>(pos)];
            for (uint32_t i = static_cast<uint32_t>(pos) + 1; i < k; ++i) combo[i] = combo[i - 1] + 1;
        }
    }
    throw NoCut("target remains reachable with every defense enabled");
}

std::vector<std::string> greedy_cut(const AttackGraph& g, uint32_t target) {
    const uint32_t d = static_cast<uint32_t>(g.defense_count());
    std::vector<double> locals = expected_locals(g);
    std::vector<char> enabled(d, 0);

    for (;;) {
        std::vector<double> glob = propagate(g, locals, g.blocked_steps(enabled));
        if (glob[target] == kInf) break;
        std::vector<uint32_t> path = backtrack_path(g, glob, target);
        std::vector<char> on_path(g.step_count(), 0);
        for (uint32_t s : path) on_path[s] = 1;

        // enable the unused defense covering the most steps of the current
        // cheapest path
        uint32_t best = d;
        size_t best_cover = 0;
        for (uint32_t i = 0; i < d; ++i) {
            if (enabled[i]) continue;
            size_t cover = 0;
            for (uint32_t s : g.protected_steps(i)) cover += on_path[s] ? 1 : 0;
            if (cover > best_cover) {
                best_cover = cover;
                best = i;
            }
        }
        if (best == d)
            throw NoCut("a path to the target crosses no defended step");
        enabled[best] = 1;
    }

    // drop redundant picks, smallest id first
    for (uint32_t i = 0; i < d; ++i) {
        if (!enabled[i]) continue;
        enabled[i] = 0;
        if (!cut_is_valid(g, target, enabled)) enabled[i] = 1;
    }

    std::vector<std::string> out;
    for (uint32_t i = 0; i < d; ++i) {
        if (enabled[i]) out.push_back(g.defense(i).id);
    }
    return out;
}

} // namespace

std::vector<std::string> min_defense_cut(const AttackGraph& g, const std::string& target, CutMode mode) {
    const uint32_t tgt = require_step(g, target);
    if (mode == CutMode::Exact) {
        if (g.defense_count() > 20)
            throw InvalidParameters("exact mode is limited to 20 defenses; use greedy");
        return exact_cut(g, tgt);
    }
    return greedy_cut(g, tgt);
}

// ---------------------------------------------------------------------------
// Alternative views
// ---------------------------------------------------------------------------

namespace {

std::string instance_part(const std::string& id) {
    size_t dot = id.find('.');
    return dot == std::string::npos ? std::string(".") : id.substr(0, dot);
}

std::string step_part(const std::string& id) {
    size_t dot = id.find('.');
    return dot == std::string::npos ? id : id.substr(dot + 1);
}

} // namespace

StateGraph to_state_enumeration(const AttackGraph& g, size_t cap) {
    if (cap < 1) throw InvalidParameters("cap must be >= 1");
    const std::vector<char> blocked = g.blocked_steps(g.default_enablement());

    StateGraph sg;
    sg.vertices.push_back(StateVertex{"", "", "", {}}); // root: nothing reached yet

    std::map<std::tuple<std::string, uint32_t, std::vector<uint32_t>>, uint32_t> index;
    std::set<std::pair<uint32_t, uint32_t>> arc_set;
    std::deque<uint32_t> queue{0};

    while (!queue.empty()) {
        uint32_t u = queue.front();
        queue.pop_front();
        const std::vector<uint32_t> reached = sg.vertices[u].reached;

        std::vector<char> in_set(g.step_count(), 0);
        for (uint32_t s : reached) in_set[s] = 1;

        for (uint32_t t = 0; t < g.step_count(); ++t) {
            if (in_set[t] || blocked[t]) continue;
            const StepNode& step = g.step(t);
            std::string source;
            if (step.entry) {
                source = "-";
            } else {
                auto parents = g.parents(t);
                if (parents.empty()) continue;
                bool enabled_now;
                uint32_t enabling = 0;
                if (step.kind == StepKind::Or) {
                    enabled_now = false;
                    for (uint32_t p : parents) {
                        if (in_set[p]) {
                            enabling = p;
                            enabled_now = true;
                            break; // parents are id-sorted; first hit is smallest
                        }
                    }
                } else {
                    enabled_now = true;
                    enabling = parents[0];
                    for (uint32_t p : parents) {
                        if (!in_set[p]) {
                            enabled_now = false;
                            break;
                        }
                    }
                }
                if (!enabled_now) continue;
                source = instance_part(g.step(enabling).id);
            }

            std::vector<uint32_t> next = reached;
            next.insert(std::lower_bound(next.begin(), next.end(), t), t);
            auto key = std::make_tuple(source, t, next);
            auto it = index.find(key);
            uint32_t v;
            if (it == index.end()) {
                if (sg.vertices.size() >= cap)
                    throw StateSpaceExceeded("state enumeration exceeds the vertex cap of " +
                                             std::to_string(cap));
                v = static_cast<uint32_t>(sg.vertices.size());
                sg.vertices.push_back(StateVertex{source, instance_part(g.step(t).id),
                                                  step_part(g.step(t).id), std::move(next)});
                index.emplace(std::move(key), v);
                queue.push_back(v);
            } else {
                v = it->second;
            }
            if (arc_set.emplace(u, v).second) sg.arcs.emplace_back(u, v);
        }
    }
    return sg;
}

ConditionGraph to_condition_view(const AttackGraph& g) {
    ConditionGraph cg;
    for (const StepNode& s : g.steps()) cg.conditions.push_back("compromised: " + s.id);
    for (const auto& [p, c] : g.edges()) cg.arcs.push_back({p, c, g.step(c).id});
    return cg;
}

// ---------------------------------------------------------------------------
// View exports
// ---------------------------------------------------------------------------

namespace {

using ordered = nlohmann::ordered_json;

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

std::string state_label(const StateVertex& v, uint32_t idx) {
    if (idx == 0) return "root";
    return "(" + v.source + "," + v.destination + "," + v.attack + ")";
}

} // namespace

std::string export_dot(const StateGraph& sg) {
    std::string out = "digraph state_graph {\n";
    for (uint32_t i = 0; i < sg.vertices.size(); ++i)
        out += "  n" + std::to_string(i) + " [label=\"" + dot_escape(state_label(sg.vertices[i], i)) +
               "\"];\n";
    for (const auto& [u, v] : sg.arcs)
        out += "  n" + std::to_string(u) + " -> n" + std::to_string(v) + ";\n";
    out += "}\n";
    return out;
}

std::string export_json(const StateGraph& sg) {
    ordered doc;
    doc["vertices"] = ordered::array();
    for (uint32_t i = 0; i < sg.vertices.size(); ++i) {
        const StateVertex& v = sg.vertices[i];
        ordered j;
        j["label"] = state_label(v, i);
        j["source"] = v.source;
        j["destination"] = v.destination;
        j["attack"] = v.attack;
        doc["vertices"].push_back(std::move(j));
    }
    doc["arcs"] = ordered::array();
    for (const auto& [u, v] : sg.arcs) doc["arcs"].push_back(ordered::array({u, v}));
    return doc.dump(2) + "\n";
}

std::string export_dot(const ConditionGraph& cg) {
    std::string out = "digraph condition_graph {\n";
    for (uint32_t i = 0; i < cg.conditions.size(); ++i)
        out += "  n" + std::to_string(i) + " [shape=ellipse, label=\"" + dot_escape(cg.conditions[i]) +
               "\"];\n";
    for (const auto& arc : cg.arcs)
        out += "  n" + std::to_string(arc.from) + " -> n" + std::to_string(arc.to) + " [label=\"" +
               dot_escape(arc.label) + "\"];\n";
    out += "}\n";
    return out;
}

std::string export_json(const ConditionGraph& cg) {
    ordered doc;
    doc["conditions"] = cg.conditions;
    doc["arcs"] = ordered::array();
    for (const auto& arc : cg.arcs)
        doc["arcs"].push_back(ordered::array({arc.from, arc.to, arc.label}));
    return doc.dump(2) + "\n";
}

std::string export_view(const StateGraph& sg, const std::string& format) {
    if (format == "dot") return export_dot(sg);
    if (format == "json") return export_json(sg);
    throw UnsupportedFormat("unsupported export format: " + format);
}

std::string export_view(const ConditionGraph& cg, const std::string& format) {
    if (format == "dot") return export_dot(cg);
    if (format == "json") return export_json(cg);
    throw UnsupportedFormat("unsupported export format: " + format);
}

} // namespace threatlang
