#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "threatlang/attack_graph.hpp"
#include "threatlang/distribution.hpp"
#include "threatlang/errors.hpp"

namespace threatlang {

// Reference to a step or defense, either local ("root") or across an
// association role ("hosts.exploit").
struct StepRef {
    std::string role; // empty = local
    std::string step;
    SourcePos pos;

    bool operator==(const StepRef& o) const { return role == o.role && step == o.step; }
};

struct StepDecl {
    std::string name;
    StepKind kind = StepKind::Or;
    TtcDistribution ttc; // Constant(0) unless declared
    std::vector<StepRef> children;
    SourcePos pos;

    bool operator==(const StepDecl& o) const {
        return name == o.name && kind == o.kind && ttc == o.ttc && children == o.children;
    }
};

struct DefenseDecl {
    std::string name;
    std::vector<StepRef> protects;
    bool default_enabled = false;
    std::optional<double> enablement; // Bernoulli probability
    SourcePos pos;

    bool operator==(const DefenseDecl& o) const {
        return name == o.name && protects == o.protects && default_enabled == o.default_enabled &&
               enablement == o.enablement;
    }
};

struct AssetType {
    std::string name;
    std::vector<StepDecl> steps;
    std::vector<DefenseDecl> defenses;

    bool operator==(const AssetType&) const = default;
};

enum class Multiplicity { One, ZeroOrOne, ZeroOrMany, OneOrMany };

std::string multiplicity_text(Multiplicity m);

struct AssociationEnd {
    std::string asset;
    std::string role; // the name the *other* side uses to reach this end
    Multiplicity mult = Multiplicity::ZeroOrMany;

    bool operator==(const AssociationEnd&) const = default;
};

struct Association {
    std::string name;
    AssociationEnd left, right;

    bool operator==(const Association&) const = default;
};

struct LanguageSpec {
    std::map<std::string, AssetType> assets;
    std::map<std::string, Association> associations;

    bool operator==(const LanguageSpec&) const = default;
};

// Parses DSL text into a validated language spec. Diagnostics carry
// line/column positions.
LanguageSpec parse_language(const std::string& text);

// Union of assets and associations; structurally identical duplicates are
// deduplicated, same-name structural conflicts are reported with the first
// difference found.
LanguageSpec merge_languages(const std::vector<LanguageSpec>& specs);

// Canonical renderer; parse_language(render_language(s)) == s.
std::string render_language(const LanguageSpec& spec);

// ---------------------------------------------------------------------------
// System models
// ---------------------------------------------------------------------------

struct Instance {
    std::string id;
    std::string asset;
    std::map<std::string, bool> defenses; // per-instance defense assignment

    bool operator==(const Instance&) const = default;
};

struct Link {
    std::string association;
    std::string left;
    std::string right;

    bool operator==(const Link&) const = default;
};

struct SystemModel {
    std::vector<Instance> instances;
    std::vector<Link> links;
    std::vector<std::string> entries; // "instance.step"
    std::vector<std::string> targets;
    std::map<std::string, int> impacts; // "instance.step" -> 1..5

    bool operator==(const SystemModel&) const = default;
};

// Parses and validates the model JSON document against a language spec.
SystemModel parse_model(const std::string& json_text, const LanguageSpec& spec);

// Instantiates the spec over the model: one node per (instance, step) and
// (instance, defense), one edge per resolved child reference, with role
// references expanded across links.
AttackGraph compile(const LanguageSpec& spec, const SystemModel& model);

} // namespace threatlang
