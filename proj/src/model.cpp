#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "threatlang/dsl.hpp"
#include "threatlang/errors.hpp"

namespace threatlang {

using nlohmann::json;

namespace {

struct MultBounds {
    size_t lo;
    size_t hi; // SIZE_MAX = unbounded
};

MultBounds bounds(Multiplicity m) {
    switch (m) {
    case Multiplicity::One: return {1, 1};
    case Multiplicity::ZeroOrOne: return {0, 1};
    case Multiplicity::ZeroOrMany: return {0, SIZE_MAX};
    case Multiplicity::OneOrMany: return {1, SIZE_MAX};
    }
    return {0, SIZE_MAX};
}

const AssetType& asset_of(const LanguageSpec& spec, const std::string& name) {
    auto it = spec.assets.find(name);
    if (it == spec.assets.end()) throw UnknownAsset("unknown asset type: " + name);
    return it->second;
}

// instance.step reference used by entries/targets/impacts
std::pair<std::string, std::string> split_step_ref(const std::string& ref) {
    size_t dot = ref.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == ref.size())
        throw UnresolvedEntry("expected 'instance.step', got: " + ref);
    return {ref.substr(0, dot), ref.substr(dot + 1)};
}

} // namespace

SystemModel parse_model(const std::string& json_text, const LanguageSpec& spec) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid model JSON: ") + e.what());
    }

    SystemModel model;
    std::map<std::string, std::string> asset_by_id;
    try {
        for (const json& j : doc.at("instances")) {
            Instance inst;
            inst.id = j.at("id").get<std::string>();
            inst.asset = j.at("asset").get<std::string>();
            if (j.contains("defenses"))
                inst.defenses = j.at("defenses").get<std::map<std::string, bool>>();
            if (asset_by_id.count(inst.id))
                throw SchemaError("duplicate instance id: " + inst.id);
            asset_by_id.emplace(inst.id, inst.asset);
            model.instances.push_back(std::move(inst));
        }
        if (doc.contains("links")) {
            for (const json& j : doc.at("links")) {
                Link link;
                link.association = j.at("association").get<std::string>();
                link.left = j.at("left").get<std::string>();
                link.right = j.at("right").get<std::string>();
                model.links.push_back(std::move(link));
            }
        }
        if (doc.contains("entries")) model.entries = doc.at("entries").get<std::vector<std::string>>();
        if (doc.contains("targets")) model.targets = doc.at("targets").get<std::vector<std::string>>();
        if (doc.contains("impacts")) model.impacts = doc.at("impacts").get<std::map<std::string, int>>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid model JSON: ") + e.what());
    }

    // resolve instances against the spec
    for (const Instance& inst : model.instances) {
        const AssetType& asset = asset_of(spec, inst.asset);
        for (const auto& [dname, value] : inst.defenses) {
            (void)value;
            bool known = std::any_of(asset.defenses.begin(), asset.defenses.end(),
                                     [&](const DefenseDecl& d) { return d.name == dname; });
            if (!known)
                throw UnknownDefense("asset " + inst.asset + " declares no defense '" + dname +
                                     "' (instance " + inst.id + ")");
        }
    }

    // resolve links and validate multiplicities
    std::set<std::tuple<std::string, std::string, std::string>> seen_links;
    for (const Link& link : model.links) {
        auto ait = spec.associations.find(link.association);
        if (ait == spec.associations.end())
            throw BadLink("unknown association: " + link.association);
        const Association& assoc = ait->second;
        auto lit = asset_by_id.find(link.left);
        auto rit = asset_by_id.find(link.right);
        if (lit == asset_by_id.end()) throw BadLink("link references unknown instance: " + link.left);
        if (rit == asset_by_id.end()) throw BadLink("link references unknown instance: " + link.right);
        if (lit->second != assoc.left.asset)
            throw BadLink("left of " + link.association + " must be a " + assoc.left.asset + ", got " +
                          lit->second + " (" + link.left + ")");
        if (rit->second != assoc.right.asset)
            throw BadLink("right of " + link.association + " must be a " + assoc.right.asset + ", got " +
                          rit->second + " (" + link.right + ")");
        if (!seen_links.emplace(link.association, link.left, link.right).second)
            throw BadLink("duplicate link in " + link.association + ": " + link.left + " -- " +
                          link.right);
    }
    for (const auto& [aname, assoc] : spec.associations) {
        const MultBounds rb = bounds(assoc.right.mult); // partners per left instance
        const MultBounds lb = bounds(assoc.left.mult);  // partners per right instance
        for (const Instance& inst : model.instances) {
            if (inst.asset == assoc.left.asset) {
                size_t n = static_cast<size_t>(
                    std::count_if(model.links.begin(), model.links.end(), [&](const Link& l) {
                        return l.association == aname && l.left == inst.id;
                    }));
                if (n < rb.lo || n > rb.hi)
                    throw BadLink("instance " + inst.id + " has " + std::to_string(n) + " '" +
                                  assoc.right.role + "' partner(s) in " + aname + ", multiplicity " +
                                  multiplicity_text(assoc.right.mult));
            }
            if (inst.asset == assoc.right.asset) {
                size_t n = static_cast<size_t>(
                    std::count_if(model.links.begin(), model.links.end(), [&](const Link& l) {
                        return l.association == aname && l.right == inst.id;
                    }));
                if (n < lb.lo || n > lb.hi)
                    throw BadLink("instance " + inst.id + " has " + std::to_string(n) + " '" +
                                  assoc.left.role + "' partner(s) in " + aname + ", multiplicity " +
                                  multiplicity_text(assoc.left.mult));
            }
        }
    }

    // entries / targets / impacts must name declared instance steps
    auto check_step_ref = [&](const std::string& ref, const char* what) {
        auto [inst, step] = split_step_ref(ref);
        auto it = asset_by_id.find(inst);
        if (it == asset_by_id.end())
            throw UnresolvedEntry(std::string(what) + " references unknown instance: " + ref);
        const AssetType& asset = asset_of(spec, it->second);
        bool known = std::any_of(asset.steps.begin(), asset.steps.end(),
                                 [&](const StepDecl& s) { return s.name == step; });
        if (!known)
            throw UnresolvedEntry(std::string(what) + " references unknown step: " + ref);
    };
    for (const std::string& e : model.entries) check_step_ref(e, "entry");
    for (const std::string& t : model.targets) check_step_ref(t, "target");
    for (const auto& [ref, impact] : model.impacts) {
        check_step_ref(ref, "impact");
        if (impact < 1 || impact > 5)
            throw SchemaError("impact must be 1..5, got " + std::to_string(impact) + " for " + ref);
    }
    return model;
}

// ---------------------------------------------------------------------------
// Compilation to an attack graph
// ---------------------------------------------------------------------------

AttackGraph compile(const LanguageSpec& spec, const SystemModel& model) {
    AttackGraph g;

    std::set<std::string> entries(model.entries.begin(), model.entries.end());
    std::set<std::string> targets(model.targets.begin(), model.targets.end());

    // role -> target asset per asset type, mirrored from the association ends
    std::map<std::string, std::map<std::string, std::string>> roles_by_asset;
    for (const auto& [aname, assoc] : spec.associations) {
        roles_by_asset[assoc.left.asset][assoc.right.role] = assoc.right.asset;
        roles_by_asset[assoc.right.asset][assoc.left.role] = assoc.left.asset;
    }

    // partners[instance][role] -> linked instance ids
    std::map<std::string, std::map<std::string, std::vector<std::string>>> partners;
    for (const Link& link : model.links) {
        const Association& assoc = spec.associations.at(link.association);
        partners[link.left][assoc.right.role].push_back(link.right);
        partners[link.right][assoc.left.role].push_back(link.left);
    }

    for (const Instance& inst : model.instances) {
        const AssetType& asset = spec.assets.at(inst.asset);
        for (const StepDecl& s : asset.steps) {
            StepNode node;
            node.id = inst.id + "." + s.name;
            node.kind = s.kind;
            node.ttc = s.ttc;
            node.entry = entries.count(node.id) > 0;
            node.target = targets.count(node.id) > 0;
            if (auto it = model.impacts.find(node.id); it != model.impacts.end()) node.impact = it->second;
            g.add_step(std::move(node));
        }
        for (const DefenseDecl& d : asset.defenses) {
            DefenseNode node;
            node.id = inst.id + "." + d.name;
            auto it = inst.defenses.find(d.name);
            if (it != inst.defenses.end()) {
                node.enabled = it->second; // model assignment pins the value
            } else {
                node.enabled = d.default_enabled;
                node.enablement = d.enablement;
            }
            for (const StepRef& ref : d.protects) {
                if (ref.role.empty()) {
                    node.protects.push_back(inst.id + "." + ref.step);
                } else {
                    auto pit = partners.find(inst.id);
                    if (pit == partners.end()) continue;
                    auto rit = pit->second.find(ref.role);
                    if (rit == pit->second.end()) continue;
                    for (const std::string& other : rit->second)
                        node.protects.push_back(other + "." + ref.step);
                }
            }
            if (node.protects.empty())
                throw ExpansionError("defense " + node.id + " protects no instantiated step");
            g.add_defense(std::move(node));
        }
    }

    for (const Instance& inst : model.instances) {
        const AssetType& asset = spec.assets.at(inst.asset);
        for (const StepDecl& s : asset.steps) {
            const std::string parent_id = inst.id + "." + s.name;
            for (const StepRef& ref : s.children) {
                if (ref.role.empty()) {
                    g.add_edge(parent_id, inst.id + "." + ref.step);
                    continue;
                }
                auto pit = partners.find(inst.id);
                if (pit == partners.end()) continue; // zero-match role expansion
                auto rit = pit->second.find(ref.role);
                if (rit == pit->second.end()) continue;
                for (const std::string& other : rit->second)
                    g.add_edge(parent_id, other + "." + ref.step);
            }
        }
    }

    g.finalize();

    // (asset, step) pairs that some declaration points at; an AND node of
    // such a step left without in-edges has an unsatisfiable precondition
    std::set<std::pair<std::string, std::string>> statically_referenced;
    for (const auto& [aname, asset] : spec.assets) {
        auto roles = roles_by_asset.find(aname);
        for (const StepDecl& s : asset.steps) {
            for (const StepRef& ref : s.children) {
                if (ref.role.empty()) {
                    statically_referenced.emplace(aname, ref.step);
                } else if (roles != roles_by_asset.end()) {
                    auto rit = roles->second.find(ref.role);
                    if (rit != roles->second.end()) statically_referenced.emplace(rit->second, ref.step);
                }
            }
        }
    }
    for (const Instance& inst : model.instances) {
        const AssetType& asset = spec.assets.at(inst.asset);
        for (const StepDecl& s : asset.steps) {
            if (s.kind != StepKind::And) continue;
            if (!statically_referenced.count({inst.asset, s.name})) continue;
            uint32_t idx = *g.find_step(inst.id + "." + s.name);
            if (!g.step(idx).entry && g.parents(idx).empty())
                throw ExpansionError("AND step " + g.step(idx).id +
                                     " lost every parent to zero-match role expansion");
        }
    }
    return g;
}

} // namespace threatlang
