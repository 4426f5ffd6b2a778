#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace threatlang {

// Symbols are interned per grammar; negative ids never occur except for
// the epsilon marker used on leaves of epsilon productions.
using Symbol = int32_t;
inline constexpr Symbol kEpsilon = -1;

struct Rule {
    std::vector<Symbol> lhs; // at least one symbol, at least one nonterminal
    std::vector<Symbol> rhs; // empty means epsilon
    std::optional<double> probability;

    bool operator==(const Rule&) const = default;
};

enum class GrammarClass { ContextFree, NotContextFree };

// Formal grammar G = (nonterminals, terminals, start, rules). General
// enough to hold context-sensitive rule sets; the parsing, sampling and
// probability operations require the context-free subset.
class Grammar {
public:
    Symbol add_nonterminal(const std::string& name);
    Symbol add_terminal(const std::string& name);
    void set_start(Symbol s);
    void add_rule(std::vector<Symbol> lhs, std::vector<Symbol> rhs,
                  std::optional<double> probability = std::nullopt);

    // Checks all structural invariants; throws InvalidGrammar with the
    // offending rule index where one applies.
    void validate() const;

    // True when every rule carries a probability.
    bool stochastic() const;
    // Requires: context-free and stochastic. Throws NotNormalized unless
    // each nonterminal's rule probabilities sum to 1 within tol.
    void check_normalized(double tol = 1e-9) const;

    Symbol start() const;
    const std::vector<Rule>& rules() const { return rules_; }
    size_t symbol_count() const { return names_.size(); }
    bool is_nonterminal(Symbol s) const { return s >= 0 && nonterminal_[static_cast<size_t>(s)]; }
    bool is_terminal(Symbol s) const { return s >= 0 && !nonterminal_[static_cast<size_t>(s)]; }
    const std::string& name(Symbol s) const { return names_[static_cast<size_t>(s)]; }
    std::optional<Symbol> find_symbol(const std::string& name) const;

    // Splits input text into terminal symbols: one char per symbol when
    // every terminal name is a single character, whitespace-separated
    // tokens otherwise. Unknown tokens raise UnknownSymbol.
    std::vector<Symbol> tokenize(const std::string& text) const;
    std::string to_text(std::span<const Symbol> symbols) const;

    // Text format: optional "terminals ..." and "start X" headers, then
    // one rule per line ("LHS -> RHS | RHS"), optional leading probability
    // on single-alternative lines, '#' comments.
    static Grammar from_text(const std::string& text);

private:
    Symbol intern(const std::string& name, bool nonterminal);

    std::vector<std::string> names_;
    std::vector<bool> nonterminal_;
    std::unordered_map<std::string, Symbol> index_;
    std::optional<Symbol> start_;
    std::vector<Rule> rules_;
};

GrammarClass classify(const Grammar& g);

struct ParseNode {
    Symbol symbol = kEpsilon;
    int32_t rule = -1; // grammar rule index on internal nodes
    std::vector<ParseNode> children;

    bool operator==(const ParseNode&) const = default;
};

struct ParseTree {
    ParseNode root;

    bool operator==(const ParseTree&) const = default;
};

struct ParseLimits {
    size_t max_trees = 1000;
    size_t max_items = 1'000'000;
};

struct ParseForest {
    std::vector<Symbol> input;
    std::vector<ParseTree> trees;
    bool truncated = false; // a limit fired; tree list may be incomplete
};

// Chart-based top-down recognition (root toward leaves) with tree
// extraction. Input grammar must be context-free.
ParseForest parse_top_down(const Grammar& g, std::span<const Symbol> input, ParseLimits limits = {});

// Reduction search: repeatedly collapse a right-hand side occurrence to
// its left-hand nonterminal until only the start symbol remains. Memoized
// and bounded by limits.max_items.
ParseForest parse_bottom_up(const Grammar& g, std::span<const Symbol> input, ParseLimits limits = {});

struct SampleResult {
    std::vector<Symbol> string;
    ParseTree tree;
    double probability = 0.0;
};

// Samples a leftmost derivation from a normalized stochastic grammar.
// Deterministic in seed. Retries up to 100 times when a derivation
// exceeds max_depth, then throws DepthExceeded.
SampleResult sample(const Grammar& g, uint64_t seed, int max_depth = 64);

// Sum of derivation probabilities over all parse trees of input; 0 when
// the input is not in the language. Throws LimitExceeded if the forest
// was truncated (the sum would only be a lower bound).
double string_probability(const Grammar& g, std::span<const Symbol> input, ParseLimits limits = {});

struct LanguageEntry {
    std::vector<Symbol> string;
    std::optional<double> probability; // summed over derivations when stochastic
};

struct LanguageEnumeration {
    std::vector<LanguageEntry> entries;
    bool truncated = false;
};

LanguageEnumeration enumerate_language(const Grammar& g, size_t max_len = 16, size_t max_count = 100000);

// Rendering helpers: "S(a,A(a,b))" for trees, terminal frontier text.
std::string tree_to_text(const Grammar& g, const ParseNode& node);
std::string frontier_text(const Grammar& g, const ParseNode& node);

} // namespace threatlang
