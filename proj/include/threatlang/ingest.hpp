#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "threatlang/attack_graph.hpp"
#include "threatlang/distribution.hpp"

namespace threatlang {

struct Mitigation {
    std::string id;
    std::string name;
};

struct Technique {
    std::string id;
    std::string name;
    std::string tactic;
    StepKind kind = StepKind::Or;
    std::vector<std::string> prerequisites; // technique ids
    std::vector<Mitigation> mitigations;
};

struct TechniqueCatalog {
    std::string name;
    std::string version;
    std::vector<Technique> techniques;
};

// Validates the catalog JSON document.
TechniqueCatalog load_catalog(const std::string& json_text);

// Per-technique generation overrides (kind and/or TTC distribution),
// keyed by technique id.
struct TechniqueOverride {
    std::optional<StepKind> kind;
    std::optional<TtcDistribution> ttc;
};

using GenerateOverrides = std::map<std::string, TechniqueOverride>;

GenerateOverrides load_overrides(const std::string& json_text);

// Emits DSL source with one asset: a step per technique, an edge per
// prerequisite relation (prerequisite -> dependent) and a defense per
// mitigation. The output always parses cleanly.
std::string generate_language(const TechniqueCatalog& catalog, const std::string& asset_name,
                              const GenerateOverrides& overrides = {});

} // namespace threatlang
