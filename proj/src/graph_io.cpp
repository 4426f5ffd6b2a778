#include <json.hpp>

#include "threatlang/attack_graph.hpp"
#include "threatlang/errors.hpp"

namespace threatlang {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

std::string export_json(const AttackGraph& g) {
    ordered doc;
    doc["steps"] = ordered::array();
    for (const StepNode& s : g.steps()) {
        ordered j;
        j["id"] = s.id;
        j["kind"] = s.kind == StepKind::Or ? "OR" : "AND";
        j["ttc"] = s.ttc.to_string();
        j["entry"] = s.entry;
        j["target"] = s.target;
        if (s.impact) j["impact"] = *s.impact;
        doc["steps"].push_back(std::move(j));
    }
    doc["defenses"] = ordered::array();
    for (const DefenseNode& d : g.defenses()) {
        ordered j;
        j["id"] = d.id;
        j["protects"] = d.protects;
        j["enabled"] = d.enabled;
        if (d.enablement) j["enablement"] = *d.enablement;
        doc["defenses"].push_back(std::move(j));
    }
    doc["edges"] = ordered::array();
    for (const auto& [p, c] : g.edges())
        doc["edges"].push_back(ordered::array({g.step(p).id, g.step(c).id}));
    return doc.dump(2) + "\n";
}

AttackGraph import_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw GraphError(std::string("invalid graph JSON: ") + e.what());
    }
    AttackGraph g;
    try {
        for (const json& j : doc.at("steps")) {
            StepNode s;
            s.id = j.at("id").get<std::string>();
            std::string kind = j.at("kind").get<std::string>();
            if (kind == "OR") s.kind = StepKind::Or;
            else if (kind == "AND") s.kind = StepKind::And;
            else throw GraphError("unknown step kind: " + kind);
            s.ttc = TtcDistribution::parse(j.value("ttc", "Constant(0)"));
            s.entry = j.value("entry", false);
            s.target = j.value("target", false);
            if (j.contains("impact")) s.impact = j.at("impact").get<int>();
            g.add_step(std::move(s));
        }
        if (doc.contains("defenses")) {
            for (const json& j : doc.at("defenses")) {
                DefenseNode d;
                d.id = j.at("id").get<std::string>();
                d.protects = j.at("protects").get<std::vector<std::string>>();
                d.enabled = j.value("enabled", false);
                if (j.contains("enablement")) d.enablement = j.at("enablement").get<double>();
                g.add_defense(std::move(d));
            }
        }
        if (doc.contains("edges")) {
            for (const json& j : doc.at("edges")) {
                if (!j.is_array() || j.size() != 2)
                    throw GraphError("edges must be [parent, child] pairs");
                g.add_edge(j[0].get<std::string>(), j[1].get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        throw GraphError(std::string("invalid graph JSON: ") + e.what());
    }
    g.finalize();
    return g;
}

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

} // namespace

std::string export_dot(const AttackGraph& g) {
    std::string out = "digraph attack_graph {\n";
    for (const StepNode& s : g.steps()) {
        out += "  \"" + dot_escape(s.id) + "\" [shape=" +
               (s.kind == StepKind::Or ? "ellipse" : "box");
        if (s.entry) out += ", style=filled, fillcolor=lightgrey";
        if (s.target) out += ", peripheries=2";
        out += "];\n";
    }
    for (const DefenseNode& d : g.defenses())
        out += "  \"" + dot_escape(d.id) + "\" [shape=triangle];\n";
    for (const auto& [p, c] : g.edges())
        out += "  \"" + dot_escape(g.step(p).id) + "\" -> \"" + dot_escape(g.step(c).id) + "\";\n";
    for (const DefenseNode& d : g.defenses()) {
        for (const std::string& sid : d.protects)
            out += "  \"" + dot_escape(d.id) + "\" -> \"" + dot_escape(sid) + "\" [style=dashed];\n";
    }
    out += "}\n";
    return out;
}

std::string export_graph(const AttackGraph& g, const std::string& format) {
    if (format == "dot") return export_dot(g);
    if (format == "json") return export_json(g);
    throw UnsupportedFormat("unsupported export format: " + format);
}

} // namespace threatlang
