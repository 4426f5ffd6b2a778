#include "threatlang/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <json.hpp>

#include "threatlang/errors.hpp"

namespace threatlang {

using nlohmann::json;

TechniqueCatalog load_catalog(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid catalog JSON: ") + e.what());
    }

    TechniqueCatalog catalog;
    try {
        catalog.name = doc.value("name", "");
        catalog.version = doc.value("version", "");
        for (const json& j : doc.at("techniques")) {
            Technique t;
            t.id = j.at("id").get<std::string>();
            t.name = j.at("name").get<std::string>();
            t.tactic = j.value("tactic", "");
            std::string kind = j.value("kind", "OR");
            if (kind == "OR") t.kind = StepKind::Or;
            else if (kind == "AND") t.kind = StepKind::And;
            else throw SchemaError("technique " + t.id + " has unknown kind: " + kind);
            if (j.contains("prerequisites"))
                t.prerequisites = j.at("prerequisites").get<std::vector<std::string>>();
            if (j.contains("mitigations")) {
                for (const json& m : j.at("mitigations"))
                    t.mitigations.push_back(
                        {m.at("id").get<std::string>(), m.at("name").get<std::string>()});
            }
            catalog.techniques.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid catalog JSON: ") + e.what());
    }

    std::set<std::string> ids;
    for (const Technique& t : catalog.techniques) {
        if (!ids.insert(t.id).second) throw DuplicateTechnique("duplicate technique id: " + t.id);
    }
    for (const Technique& t : catalog.techniques) {
        for (const std::string& pre : t.prerequisites) {
            if (!ids.count(pre))
                throw DanglingPrerequisite("technique " + t.id + " requires unknown technique: " + pre);
        }
    }
    return catalog;
}

GenerateOverrides load_overrides(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid override JSON: ") + e.what());
    }
    GenerateOverrides out;
    for (const auto& [id, j] : doc.items()) {
        TechniqueOverride o;
        if (j.contains("kind")) {
            std::string kind = j.at("kind").get<std::string>();
            if (kind == "OR") o.kind = StepKind::Or;
            else if (kind == "AND") o.kind = StepKind::And;
            else throw SchemaError("override for " + id + " has unknown kind: " + kind);
        }
        if (j.contains("ttc")) o.ttc = TtcDistribution::parse(j.at("ttc").get<std::string>());
        out.emplace(id, std::move(o));
    }
    return out;
}

namespace {

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') out += c;
        else out += '_';
    }
    if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0]))) out = "t_" + out;
    return out;
}

} // namespace

std::string generate_language(const TechniqueCatalog& catalog, const std::string& asset_name,
                              const GenerateOverrides& overrides) {
    if (catalog.techniques.empty()) throw EmptyCatalog("catalog contains no techniques");

    // sanitized identifiers must stay collision free across steps and defenses
    std::map<std::string, std::string> step_name;   // technique id -> identifier
    std::map<std::string, std::string> taken;       // identifier -> original
    for (const Technique& t : catalog.techniques) {
        std::string ident = sanitize(t.name);
        auto [it, fresh] = taken.emplace(ident, t.name);
        if (!fresh)
            throw IdentifierCollision("'" + t.name + "' and '" + it->second +
                                      "' both sanitize to identifier '" + ident + "'");
        step_name.emplace(t.id, ident);
    }

    struct DefensePlan {
        std::string name;
        std::vector<std::string> protects;
    };
    std::map<std::string, DefensePlan> defenses; // mitigation id -> plan
    for (const Technique& t : catalog.techniques) {
        for (const Mitigation& m : t.mitigations) {
            auto it = defenses.find(m.id);
            if (it == defenses.end()) {
                std::string ident = sanitize(m.name);
                auto [tit, fresh] = taken.emplace(ident, m.name);
                if (!fresh)
                    throw IdentifierCollision("'" + m.name + "' and '" + tit->second +
                                              "' both sanitize to identifier '" + ident + "'");
                it = defenses.emplace(m.id, DefensePlan{ident, {}}).first;
            }
            it->second.protects.push_back(step_name.at(t.id));
        }
    }

    // dependents per technique: prerequisite is the parent
    std::map<std::string, std::vector<std::string>> children;
    for (const Technique& t : catalog.techniques) {
        for (const std::string& pre : t.prerequisites) children[pre].push_back(step_name.at(t.id));
    }

    std::string out;
    if (!catalog.name.empty())
        out += "// generated from catalog " + catalog.name +
               (catalog.version.empty() ? "" : " " + catalog.version) + "\n";
    out += "asset " + asset_name + " {\n";
    for (const Technique& t : catalog.techniques) {
        StepKind kind = t.kind;
        std::optional<TtcDistribution> ttc;
        if (auto it = overrides.find(t.id); it != overrides.end()) {
            if (it->second.kind) kind = *it->second.kind;
            if (it->second.ttc) ttc = it->second.ttc;
        }
        out += std::string("  ") + (kind == StepKind::Or ? "|" : "&") + " " + step_name.at(t.id);
        if (ttc) out += " [" + ttc->to_string() + "]";
        if (auto it = children.find(t.id); it != children.end()) {
            out += " -> ";
            for (size_t i = 0; i < it->second.size(); ++i) {
                if (i) out += ", ";
                out += it->second[i];
            }
        }
        out += "\n";
    }
    for (const auto& [mid, plan] : defenses) {
        out += "  # " + plan.name + " -> ";
        for (size_t i = 0; i < plan.protects.size(); ++i) {
            if (i) out += ", ";
            out += plan.protects[i];
        }
        out += "\n";
    }
    out += "}\n";
    return out;
}

} // namespace threatlang
