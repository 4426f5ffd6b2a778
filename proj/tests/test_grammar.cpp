#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "threatlang/errors.hpp"
#include "threatlang/grammar.hpp"

using namespace threatlang;

namespace {

// S -> aA | bB, A -> ab, B -> ba
Grammar make_g1(bool stochastic = false) {
    Grammar g;
    Symbol S = g.add_nonterminal("S");
    Symbol A = g.add_nonterminal("A");
    Symbol B = g.add_nonterminal("B");
    Symbol a = g.add_terminal("a");
    Symbol b = g.add_terminal("b");
    g.set_start(S);
    auto p = [&](double v) { return stochastic ? std::optional<double>(v) : std::nullopt; };
    g.add_rule({S}, {a, A}, p(0.5));
    g.add_rule({S}, {b, B}, p(0.5));
    g.add_rule({A}, {a, b}, p(1.0));
    g.add_rule({B}, {b, a}, p(1.0));
    return g;
}

// S -> aB | bA, aA -> aa, bB -> bb (context sensitive)
Grammar make_g2() {
    Grammar g;
    Symbol S = g.add_nonterminal("S");
    Symbol A = g.add_nonterminal("A");
    Symbol B = g.add_nonterminal("B");
    Symbol a = g.add_terminal("a");
    Symbol b = g.add_terminal("b");
    g.set_start(S);
    g.add_rule({S}, {a, B});
    g.add_rule({S}, {b, A});
    g.add_rule({a, A}, {a, a});
    g.add_rule({b, B}, {b, b});
    return g;
}

Grammar pairs_grammar() { return Grammar::from_text(oracle::kPairsGrammarText); }

std::multiset<std::string> tree_texts(const Grammar& g, const ParseForest& f) {
    std::multiset<std::string> out;
    for (const ParseTree& t : f.trees) out.insert(tree_to_text(g, t.root));
    return out;
}

} // namespace

TEST_CASE("classify follows the single-nonterminal left-hand-side rule") {
    CHECK(classify(make_g1()) == GrammarClass::ContextFree);
    CHECK(classify(make_g2()) == GrammarClass::NotContextFree);

    Grammar eps;
    Symbol S = eps.add_nonterminal("S");
    eps.set_start(S);
    eps.add_rule({S}, {});
    CHECK(classify(eps) == GrammarClass::ContextFree);
}

TEST_CASE("grammar validation rejects malformed rule sets") {
    Grammar g;
    CHECK_THROWS_AS(g.validate(), InvalidGrammar); // no rules, no start

    Grammar dup = make_g1();
    Symbol S = *dup.find_symbol("S");
    Symbol a = *dup.find_symbol("a");
    Symbol A = *dup.find_symbol("A");
    dup.add_rule({S}, {a, A});
    CHECK_THROWS_AS(dup.validate(), InvalidGrammar);

    Grammar no_nt;
    Symbol T = no_nt.add_nonterminal("T");
    Symbol x = no_nt.add_terminal("x");
    no_nt.set_start(T);
    no_nt.add_rule({x}, {x});
    try {
        no_nt.validate();
        FAIL("expected InvalidGrammar");
    } catch (const InvalidGrammar& e) {
        CHECK(e.rule_index == 0);
    }

    Grammar partial = make_g1();
    Symbol B = *partial.find_symbol("B");
    Symbol b = *partial.find_symbol("b");
    partial.add_rule({B}, {b, b, b}, 0.5); // probability on one rule only
    CHECK_THROWS_AS(partial.validate(), InvalidGrammar);
}

TEST_CASE("top-down parse of the two-branch grammar") {
    Grammar g = make_g1();
    ParseForest f = parse_top_down(g, g.tokenize("aab"));
    REQUIRE(f.trees.size() == 1);
    CHECK(!f.truncated);
    CHECK(tree_to_text(g, f.trees[0].root) == "S(a,A(a,b))");

    CHECK(parse_top_down(g, g.tokenize("ba")).trees.empty());
    CHECK_THROWS_AS(parse_top_down(make_g2(), std::vector<Symbol>{}), NotContextFree);
}

TEST_CASE("bottom-up parse agrees with top-down on the two-branch grammar") {
    Grammar g = make_g1();
    ParseForest up = parse_bottom_up(g, g.tokenize("aab"));
    ParseForest down = parse_top_down(g, g.tokenize("aab"));
    REQUIRE(up.trees.size() == 1);
    CHECK(up.trees[0] == down.trees[0]);
    CHECK(parse_bottom_up(g, g.tokenize("abab")).trees.empty());
}

TEST_CASE("nested-pair grammar has a unique derivation of the probe string") {
    // exhaustive hand enumeration: the probe occurs in exactly one of the
    // 128 derivations
    auto all = oracle::enumerate_pairs_derivations();
    REQUIRE(all.size() == 128);
    size_t hits = 0;
    double probe_prob = 0.0;
    for (const auto& d : all) {
        if (d.text == "AAGGAAACUU") {
            ++hits;
            probe_prob = d.probability;
        }
    }
    REQUIRE(hits == 1);
    CHECK(probe_prob == doctest::Approx(0.005).epsilon(1e-12));

    Grammar g = pairs_grammar();
    auto input = g.tokenize("AAGGAAACUU");
    ParseForest down = parse_top_down(g, input);
    ParseForest up = parse_bottom_up(g, input);
    REQUIRE(down.trees.size() == 1);
    REQUIRE(up.trees.size() == 1);
    CHECK(down.trees[0] == up.trees[0]);
    CHECK(frontier_text(g, down.trees[0].root) == "AAGGAAACUU");
}

TEST_CASE("epsilon rules parse with both strategies") {
    // S -> a A b, A -> eps | c
    Grammar g;
    Symbol S = g.add_nonterminal("S");
    Symbol A = g.add_nonterminal("A");
    Symbol a = g.add_terminal("a");
    Symbol b = g.add_terminal("b");
    Symbol c = g.add_terminal("c");
    g.set_start(S);
    g.add_rule({S}, {a, A, b});
    g.add_rule({A}, {});
    g.add_rule({A}, {c});

    for (const char* input : {"ab", "acb"}) {
        ParseForest down = parse_top_down(g, g.tokenize(input));
        ParseForest up = parse_bottom_up(g, g.tokenize(input));
        REQUIRE(down.trees.size() == 1);
        REQUIRE(up.trees.size() >= 1);
        CHECK(tree_texts(g, down) == tree_texts(g, up));
        CHECK(frontier_text(g, down.trees[0].root) == input);
    }
    CHECK(parse_top_down(g, g.tokenize("acb")).trees[0].root.children.size() == 3);
}

TEST_CASE("sampling is deterministic and respects the language") {
    Grammar g = pairs_grammar();
    for (uint64_t seed : {0ULL, 7ULL, 42ULL, 12345ULL}) {
        SampleResult r = sample(g, seed);
        CHECK(r.string.size() == 10); // three 2-terminal wraps + 4-terminal core
        CHECK(frontier_text(g, r.tree.root) == g.to_text(r.string));
    }
    SampleResult first = sample(g, 42);
    SampleResult second = sample(g, 42);
    CHECK(first.string == second.string);
    CHECK(first.tree == second.tree);
    CHECK(first.probability == second.probability);

    Grammar g1 = make_g1(true);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        std::string s = g1.to_text(sample(g1, seed).string);
        CHECK((s == "aab" || s == "bba"));
    }
}

TEST_CASE("sampling failure modes") {
    Grammar endless;
    Symbol S = endless.add_nonterminal("S");
    Symbol a = endless.add_terminal("a");
    endless.set_start(S);
    endless.add_rule({S}, {a, S}, 1.0); // every derivation is infinite
    CHECK_THROWS_AS(sample(endless, 1, 50), DepthExceeded);

    Grammar skewed = make_g1(true);
    Symbol A = *skewed.find_symbol("A");
    Symbol b = *skewed.find_symbol("b");
    skewed.add_rule({A}, {b}, 0.5); // A's rules now sum to 1.5
    CHECK_THROWS_AS(sample(skewed, 1), NotNormalized);
    CHECK_THROWS_AS(sample(make_g1(false), 1), NotNormalized);
}

TEST_CASE("string probability sums derivations") {
    Grammar g = pairs_grammar();
    double p = string_probability(g, g.tokenize("AAGGAAACUU"));
    CHECK(p == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(string_probability(g, g.tokenize("AAAA")) == 0.0);

    // mass over the full language equals one
    LanguageEnumeration lang = enumerate_language(g, 10, 1000);
    CHECK(!lang.truncated);
    double total = 0.0;
    for (const auto& e : lang.entries) total += string_probability(g, e.string);
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("string probability reports truncation instead of lower bounds") {
    Grammar amb;
    Symbol S = amb.add_nonterminal("S");
    Symbol A = amb.add_nonterminal("A");
    Symbol B = amb.add_nonterminal("B");
    Symbol a = amb.add_terminal("a");
    amb.set_start(S);
    amb.add_rule({S}, {A}, 0.5);
    amb.add_rule({S}, {B}, 0.5);
    amb.add_rule({A}, {a}, 1.0);
    amb.add_rule({B}, {a}, 1.0);
    ParseLimits tight;
    tight.max_trees = 1;
    CHECK_THROWS_AS(string_probability(amb, amb.tokenize("a"), tight), LimitExceeded);
    ParseLimits loose;
    CHECK(string_probability(amb, amb.tokenize("a"), loose) == doctest::Approx(1.0));
}

TEST_CASE("language enumeration") {
    Grammar g1 = make_g1();
    LanguageEnumeration lang = enumerate_language(g1, 8, 100);
    CHECK(!lang.truncated);
    REQUIRE(lang.entries.size() == 2);
    CHECK(g1.to_text(lang.entries[0].string) == "aab");
    CHECK(g1.to_text(lang.entries[1].string) == "bba");

    // every distinct string of the hand enumeration, probabilities summed
    Grammar pairs = pairs_grammar();
    LanguageEnumeration plang = enumerate_language(pairs, 10, 1000);
    CHECK(!plang.truncated);
    std::map<std::string, double> expected;
    for (const auto& d : oracle::enumerate_pairs_derivations()) expected[d.text] += d.probability;
    REQUIRE(plang.entries.size() == expected.size());
    double mass = 0.0;
    for (const auto& e : plang.entries) {
        auto it = expected.find(pairs.to_text(e.string));
        REQUIRE(it != expected.end());
        REQUIRE(e.probability.has_value());
        CHECK(*e.probability == doctest::Approx(it->second).epsilon(1e-12));
        mass += *e.probability;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));

    Grammar rec;
    Symbol S = rec.add_nonterminal("S");
    Symbol a = rec.add_terminal("a");
    rec.set_start(S);
    rec.add_rule({S}, {a, S});
    rec.add_rule({S}, {a});
    LanguageEnumeration r = enumerate_language(rec, 3, 100);
    CHECK(r.truncated);
    REQUIRE(r.entries.size() == 3);
    CHECK(rec.to_text(r.entries[0].string) == "a");
    CHECK(rec.to_text(r.entries[1].string) == "aa");
    CHECK(rec.to_text(r.entries[2].string) == "aaa");
}

TEST_CASE("epsilon-only grammars accept the empty string") {
    Grammar g;
    Symbol S = g.add_nonterminal("S");
    g.set_start(S);
    g.add_rule({S}, {});
    std::vector<Symbol> empty;
    ParseForest down = parse_top_down(g, empty);
    ParseForest up = parse_bottom_up(g, empty);
    REQUIRE(down.trees.size() == 1);
    REQUIRE(up.trees.size() == 1);
    CHECK(down.trees[0] == up.trees[0]);
    CHECK(down.trees[0].root.children.size() == 1);
    CHECK(down.trees[0].root.children[0].symbol == kEpsilon);

    LanguageEnumeration lang = enumerate_language(g, 4, 10);
    REQUIRE(lang.entries.size() == 1);
    CHECK(lang.entries[0].string.empty());
}

TEST_CASE("context-sensitive grammars still enumerate by general rewriting") {
    // S -> a B, a B -> a a
    Grammar g;
    Symbol S = g.add_nonterminal("S");
    Symbol B = g.add_nonterminal("B");
    Symbol a = g.add_terminal("a");
    g.set_start(S);
    g.add_rule({S}, {a, B});
    g.add_rule({a, B}, {a, a});
    REQUIRE(classify(g) == GrammarClass::NotContextFree);
    LanguageEnumeration lang = enumerate_language(g, 8, 100);
    REQUIRE(lang.entries.size() == 1);
    CHECK(g.to_text(lang.entries[0].string) == "aa");
    CHECK(!lang.entries[0].probability.has_value());
}

TEST_CASE("text format round trips the fixtures") {
    Grammar g = Grammar::from_text("terminals a b\nS -> a A | b B\nA -> a b\nB -> b a\n");
    CHECK(classify(g) == GrammarClass::ContextFree);
    CHECK(parse_top_down(g, g.tokenize("aab")).trees.size() == 1);

    CHECK_THROWS_AS(Grammar::from_text("S -> 'a\n"), InvalidGrammar);
    CHECK_THROWS_AS(Grammar::from_text("terminals a\nS a\n"), InvalidGrammar);
    CHECK_THROWS_AS(Grammar::from_text("terminals a b\n0.5 S -> a | b\n"), InvalidGrammar);
    CHECK_THROWS_AS(pairs_grammar().tokenize("AXU"), UnknownSymbol);
}

// ---------------------------------------------------------------------------
// Property suites
// ---------------------------------------------------------------------------

namespace {

// Random context-free grammars without same-span cycles: every rule either
// consumes a terminal or only references later nonterminals, so parse
// forests stay finite and the two strategies can be compared exactly.
Grammar random_cf_grammar(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nt_count(2, 4);
    std::uniform_int_distribution<int> rule_extra(0, 6);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Grammar g;
    const int nts = nt_count(rng);
    std::vector<Symbol> N, T;
    for (int i = 0; i < nts; ++i) N.push_back(g.add_nonterminal("X" + std::to_string(i)));
    T.push_back(g.add_terminal("a"));
    T.push_back(g.add_terminal("b"));
    g.set_start(N[0]);

    std::set<std::pair<std::vector<Symbol>, std::vector<Symbol>>> seen;
    auto add_rule = [&](int lhs) {
        for (int attempt = 0; attempt < 8; ++attempt) {
            int len = 1 + static_cast<int>(unit(rng) * 3.0);
            std::vector<Symbol> rhs;
            bool has_terminal = false;
            for (int k = 0; k < len; ++k) {
                if (unit(rng) < 0.55 || lhs == nts - 1) {
                    rhs.push_back(T[static_cast<size_t>(unit(rng) * 2.0)]);
                    has_terminal = true;
                } else {
                    int lo = has_terminal ? 0 : lhs + 1; // downhill unless a terminal anchors
                    int hi = nts - 1;
                    if (lo > hi) {
                        rhs.push_back(T[static_cast<size_t>(unit(rng) * 2.0)]);
                        has_terminal = true;
                        continue;
                    }
                    rhs.push_back(N[static_cast<size_t>(lo + unit(rng) * (hi - lo + 1))]);
                }
            }
            if (!has_terminal) {
                bool downhill = std::all_of(rhs.begin(), rhs.end(), [&](Symbol s) {
                    return s > N[static_cast<size_t>(lhs)];
                });
                if (!downhill) continue;
            }
            if (seen.emplace(std::vector<Symbol>{N[static_cast<size_t>(lhs)]}, rhs).second) {
                g.add_rule({N[static_cast<size_t>(lhs)]}, rhs);
                return;
            }
        }
    };
    for (int i = 0; i < nts; ++i) add_rule(i);
    int extra = rule_extra(rng);
    for (int i = 0; i < extra; ++i) add_rule(static_cast<int>(unit(rng) * nts));
    return g;
}

} // namespace

TEST_CASE("property: top-down and bottom-up agree on membership and tree sets") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ParseLimits limits;
    limits.max_trees = 10000;

    int checked = 0;
    for (int iter = 0; iter < 60; ++iter) {
        Grammar g = random_cf_grammar(rng);
        Symbol a = *g.find_symbol("a"), b = *g.find_symbol("b");

        std::vector<std::vector<Symbol>> inputs;
        for (int i = 0; i < 5; ++i) {
            std::vector<Symbol> s;
            int len = static_cast<int>(unit(rng) * 7.0);
            for (int k = 0; k < len; ++k) s.push_back(unit(rng) < 0.5 ? a : b);
            inputs.push_back(std::move(s));
        }
        LanguageEnumeration lang = enumerate_language(g, 7, 50);
        for (size_t i = 0; i < lang.entries.size() && i < 3; ++i)
            inputs.push_back(lang.entries[i].string);

        for (const auto& input : inputs) {
            ParseForest down = parse_top_down(g, input, limits);
            ParseForest up = parse_bottom_up(g, input, limits);
            REQUIRE(!down.truncated);
            REQUIRE(!up.truncated);
            CHECK(down.trees.empty() == up.trees.empty());
            CHECK(tree_texts(g, down) == tree_texts(g, up));
            for (const ParseTree& t : down.trees)
                CHECK(frontier_text(g, t.root) == g.to_text(input));
            ++checked;
        }
    }
    CHECK(checked >= 300);
}

TEST_CASE("property: sampling frequencies track string probabilities") {
    Grammar g = pairs_grammar();
    const int kSamples = 100000;
    std::map<std::string, int> counts;
    for (int i = 0; i < kSamples; ++i) ++counts[g.to_text(sample(g, static_cast<uint64_t>(i)).string)];

    std::map<std::string, double> expected;
    for (const auto& d : oracle::enumerate_pairs_derivations()) expected[d.text] += d.probability;

    for (const auto& [text, p] : expected) {
        double freq = static_cast<double>(counts[text]) / kSamples;
        CHECK(std::abs(freq - p) <= 0.004);
    }
    // nothing outside the language ever appears
    for (const auto& [text, count] : counts) CHECK(expected.count(text) == 1);
}

TEST_CASE("property: probability mass of non-recursive stochastic grammars is one") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int iter = 0; iter < 20; ++iter) {
        Grammar g;
        const int nts = 3;
        std::vector<Symbol> N;
        for (int i = 0; i < nts; ++i) N.push_back(g.add_nonterminal("X" + std::to_string(i)));
        Symbol a = g.add_terminal("a");
        Symbol b = g.add_terminal("b");
        g.set_start(N[0]);

        struct Pending {
            int lhs;
            std::vector<Symbol> rhs;
        };
        std::vector<Pending> rules;
        std::set<std::pair<int, std::vector<Symbol>>> seen;
        for (int i = 0; i < nts; ++i) {
            int n_rules = 1 + static_cast<int>(unit(rng) * 2.0);
            for (int r = 0; r < n_rules; ++r) {
                std::vector<Symbol> rhs;
                int len = static_cast<int>(unit(rng) * 3.5); // 0..3, epsilon allowed
                for (int k = 0; k < len; ++k) {
                    if (i + 1 < nts && unit(rng) < 0.4)
                        rhs.push_back(N[static_cast<size_t>(i + 1 + unit(rng) * (nts - i - 1))]);
                    else
                        rhs.push_back(unit(rng) < 0.5 ? a : b);
                }
                if (seen.emplace(i, rhs).second) rules.push_back({i, std::move(rhs)});
            }
        }
        // normalize probabilities per left-hand side
        std::map<int, double> weight_sum;
        std::vector<double> weights(rules.size());
        for (size_t r = 0; r < rules.size(); ++r) {
            weights[r] = 0.1 + unit(rng);
            weight_sum[rules[r].lhs] += weights[r];
        }
        for (size_t r = 0; r < rules.size(); ++r)
            g.add_rule({N[static_cast<size_t>(rules[r].lhs)]}, rules[r].rhs,
                       weights[r] / weight_sum[rules[r].lhs]);

        LanguageEnumeration lang = enumerate_language(g, 32, 100000);
        REQUIRE(!lang.truncated);
        double mass = 0.0;
        for (const auto& e : lang.entries) {
            REQUIRE(e.probability.has_value());
            mass += *e.probability;
        }
        CHECK(std::abs(mass - 1.0) < 1e-9);
    }
}
