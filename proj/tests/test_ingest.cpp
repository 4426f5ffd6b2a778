#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "threatlang/dsl.hpp"
#include "threatlang/errors.hpp"
#include "threatlang/ingest.hpp"

using namespace threatlang;

TEST_CASE("catalog loading and validation") {
    TechniqueCatalog one = load_catalog(
        R"({"name":"demo","version":"1","techniques":[
             {"id":"T1","name":"Phishing","tactic":"initial-access"}]})");
    REQUIRE(one.techniques.size() == 1);
    CHECK(one.techniques[0].id == "T1");
    CHECK(one.techniques[0].kind == StepKind::Or);

    CHECK_THROWS_AS(load_catalog(R"({"techniques":[
        {"id":"T1","name":"a"},{"id":"T1","name":"b"}]})"),
                    DuplicateTechnique);
    CHECK_THROWS_AS(load_catalog(R"({"techniques":[
        {"id":"T1","name":"a","prerequisites":["T9"]}]})"),
                    DanglingPrerequisite);
    CHECK_THROWS_AS(load_catalog(R"({"techniques":[{"id":"T1"}]})"), SchemaError);
    CHECK_THROWS_AS(load_catalog("not json"), SchemaError);
}

TEST_CASE("generation produces parsable sources with the expected structure") {
    TechniqueCatalog catalog = load_catalog(
        R"({"name":"demo","techniques":[
             {"id":"T1","name":"Initial Foothold"},
             {"id":"T2","name":"Privilege Escalation","kind":"AND",
              "prerequisites":["T1"],
              "mitigations":[{"id":"M1","name":"Patch Fast"}]}]})");

    std::string text = generate_language(catalog, "EnterpriseIT");
    LanguageSpec spec = parse_language(text); // must parse with zero diagnostics
    REQUIRE(spec.assets.count("EnterpriseIT") == 1);
    const AssetType& asset = spec.assets.at("EnterpriseIT");

    // technique count = step count; mitigation count = defense count
    REQUIRE(asset.steps.size() == 2);
    REQUIRE(asset.defenses.size() == 1);

    const StepDecl& foothold = asset.steps[0];
    CHECK(foothold.name == "Initial_Foothold");
    REQUIRE(foothold.children.size() == 1);
    CHECK(foothold.children[0].step == "Privilege_Escalation"); // prerequisite is the parent
    CHECK(asset.steps[1].kind == StepKind::And);

    CHECK(asset.defenses[0].name == "Patch_Fast");
    REQUIRE(asset.defenses[0].protects.size() == 1);
    CHECK(asset.defenses[0].protects[0].step == "Privilege_Escalation");
}

TEST_CASE("generation failure modes") {
    CHECK_THROWS_AS(generate_language(TechniqueCatalog{}, "X"), EmptyCatalog);

    TechniqueCatalog collide = load_catalog(
        R"({"techniques":[
             {"id":"T1","name":"Drive-by"},
             {"id":"T2","name":"Drive_by"}]})");
    try {
        generate_language(collide, "X");
        FAIL("expected IdentifierCollision");
    } catch (const IdentifierCollision& e) {
        std::string msg = e.what();
        CHECK(msg.find("Drive-by") != std::string::npos);
        CHECK(msg.find("Drive_by") != std::string::npos);
    }

    TechniqueCatalog digits = load_catalog(R"({"techniques":[{"id":"T1","name":"0day"}]})");
    LanguageSpec spec = parse_language(generate_language(digits, "X"));
    CHECK(spec.assets.at("X").steps[0].name == "t_0day");
}

TEST_CASE("overrides adjust kind and TTC") {
    TechniqueCatalog catalog =
        load_catalog(R"({"techniques":[{"id":"T1","name":"Foothold"}]})");
    GenerateOverrides overrides =
        load_overrides(R"json({"T1":{"kind":"AND","ttc":"Gamma(2,1.5)"}})json");
    LanguageSpec spec = parse_language(generate_language(catalog, "X", overrides));
    const StepDecl& s = spec.assets.at("X").steps[0];
    CHECK(s.kind == StepKind::And);
    CHECK(s.ttc == TtcDistribution::gamma(2, 1.5));
}

TEST_CASE("per-tactic outputs merge back into one language") {
    const char* doc = R"({"name":"demo","techniques":[
        {"id":"T1","name":"Spearphishing","tactic":"initial-access"},
        {"id":"T2","name":"Valid Accounts","tactic":"initial-access"},
        {"id":"T3","name":"Service Scan","tactic":"discovery"},
        {"id":"T4","name":"Dump Credentials","tactic":"credential-access",
         "mitigations":[{"id":"M1","name":"Credential Guard"}]}]})";
    TechniqueCatalog all = load_catalog(doc);

    std::map<std::string, TechniqueCatalog> by_tactic;
    for (const Technique& t : all.techniques) {
        auto& c = by_tactic[t.tactic];
        Technique copy = t;
        copy.prerequisites.clear(); // cross-tactic links stay within one asset per file
        c.techniques.push_back(std::move(copy));
    }
    std::vector<LanguageSpec> parts;
    for (const auto& [tactic, catalog] : by_tactic) {
        std::string asset = "Tactic_";
        for (char c : tactic) asset += c == '-' ? '_' : c;
        parts.push_back(parse_language(generate_language(catalog, asset)));
    }
    LanguageSpec merged = merge_languages(parts);
    CHECK(merged.assets.size() == by_tactic.size());
    size_t steps = 0;
    for (const auto& [name, asset] : merged.assets) steps += asset.steps.size();
    CHECK(steps == all.techniques.size());
}
