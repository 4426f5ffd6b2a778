#include "threatlang/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "threatlang/errors.hpp"
#include "threatlang/rng.hpp"

namespace threatlang {

// ---------------------------------------------------------------------------
// Grammar construction and validation
// ---------------------------------------------------------------------------

Symbol Grammar::intern(const std::string& name, bool nonterminal) {
    auto it = index_.find(name);
    if (it != index_.end()) {
        if (nonterminal_[static_cast<size_t>(it->second)] != nonterminal)
            throw InvalidGrammar("symbol '" + name + "' declared as both terminal and nonterminal");
        return it->second;
    }
    Symbol s = static_cast<Symbol>(names_.size());
    names_.push_back(name);
    nonterminal_.push_back(nonterminal);
    index_.emplace(name, s);
    return s;
}

Symbol Grammar::add_nonterminal(const std::string& name) { return intern(name, true); }
Symbol Grammar::add_terminal(const std::string& name) { return intern(name, false); }

void Grammar::set_start(Symbol s) {
    if (s < 0 || static_cast<size_t>(s) >= names_.size() || !nonterminal_[static_cast<size_t>(s)])
        throw InvalidGrammar("start symbol must be a declared nonterminal");
    start_ = s;
}

void Grammar::add_rule(std::vector<Symbol> lhs, std::vector<Symbol> rhs, std::optional<double> probability) {
    rules_.push_back(Rule{std::move(lhs), std::move(rhs), probability});
}

Symbol Grammar::start() const {
    if (!start_) throw InvalidGrammar("no start symbol set");
    return *start_;
}

std::optional<Symbol> Grammar::find_symbol(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool Grammar::stochastic() const {
    return !rules_.empty() &&
           std::all_of(rules_.begin(), rules_.end(), [](const Rule& r) { return r.probability.has_value(); });
}

void Grammar::validate() const {
    if (rules_.empty()) throw InvalidGrammar("rule list is empty");
    if (!start_) throw InvalidGrammar("no start symbol set");

    auto check_symbol = [&](Symbol s, int rule_index) {
        if (s < 0 || static_cast<size_t>(s) >= names_.size())
            throw InvalidGrammar("rule " + std::to_string(rule_index) + " references an unknown symbol",
                                 rule_index);
    };

    size_t with_prob = 0;
    for (size_t i = 0; i < rules_.size(); ++i) {
        const Rule& r = rules_[i];
        const int ri = static_cast<int>(i);
        if (r.lhs.empty())
            throw InvalidGrammar("rule " + std::to_string(i) + " has an empty left-hand side", ri);
        bool has_nt = false;
        for (Symbol s : r.lhs) {
            check_symbol(s, ri);
            has_nt = has_nt || nonterminal_[static_cast<size_t>(s)];
        }
        if (!has_nt)
            throw InvalidGrammar("rule " + std::to_string(i) + " has no nonterminal on the left-hand side",
                                 ri);
        for (Symbol s : r.rhs) check_symbol(s, ri);
        if (r.probability) {
            ++with_prob;
            if (!(*r.probability > 0.0 && *r.probability <= 1.0))
                throw InvalidGrammar("rule " + std::to_string(i) + " probability outside (0,1]", ri);
        }
        for (size_t j = 0; j < i; ++j) {
            if (rules_[j].lhs == r.lhs && rules_[j].rhs == r.rhs)
                throw InvalidGrammar("rule " + std::to_string(i) + " duplicates rule " + std::to_string(j),
                                     ri);
        }
    }
    if (with_prob != 0 && with_prob != rules_.size())
        throw InvalidGrammar("probabilities must be present on all rules or none");
}

void Grammar::check_normalized(double tol) const {
    if (!stochastic()) throw NotNormalized("grammar carries no rule probabilities");
    if (classify(*this) != GrammarClass::ContextFree)
        throw NotContextFree("stochastic operations require a context-free grammar");
    std::map<Symbol, double> sums;
    for (const Rule& r : rules_) sums[r.lhs[0]] += *r.probability;
    for (size_t s = 0; s < names_.size(); ++s) {
        if (!nonterminal_[s]) continue;
        double sum = 0.0;
        if (auto it = sums.find(static_cast<Symbol>(s)); it != sums.end()) sum = it->second;
        if (std::abs(sum - 1.0) > tol)
            throw NotNormalized("probabilities of '" + names_[s] + "' sum to " + std::to_string(sum));
    }
}

GrammarClass classify(const Grammar& g) {
    g.validate();
    for (const Rule& r : g.rules()) {
        if (r.lhs.size() != 1 || !g.is_nonterminal(r.lhs[0])) return GrammarClass::NotContextFree;
    }
    return GrammarClass::ContextFree;
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

namespace {

struct TextToken {
    std::string text;
    bool quoted = false;
};

std::vector<TextToken> split_tokens(const std::string& line, int line_no) {
    std::vector<TextToken> out;
    size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '#') break; // comment to end of line
        if (c == '\'' || c == '"') {
            size_t close = line.find(c, i + 1);
            if (close == std::string::npos)
                throw InvalidGrammar("unterminated quote on line " + std::to_string(line_no));
            out.push_back({line.substr(i + 1, close - i - 1), true});
            i = close + 1;
            continue;
        }
        size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != '#' &&
               line[j] != '\'' && line[j] != '"')
            ++j;
        out.push_back({line.substr(i, j - i), false});
        i = j;
    }
    return out;
}

bool parse_number(const std::string& s, double& out) {
    try {
        size_t used = 0;
        out = std::stod(s, &used);
        return used == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

} // namespace

Grammar Grammar::from_text(const std::string& text) {
    Grammar g;
    std::vector<std::pair<int, std::vector<TextToken>>> rule_lines;
    std::optional<std::string> start_name;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    // First pass: headers. Rule lines are kept for the second pass so the
    // declared terminal list applies regardless of position.
    while (std::getline(in, line)) {
        ++line_no;
        auto tokens = split_tokens(line, line_no);
        if (tokens.empty()) continue;
        if (!tokens[0].quoted && tokens[0].text == "terminals") {
            for (size_t i = 1; i < tokens.size(); ++i) g.add_terminal(tokens[i].text);
            continue;
        }
        if (!tokens[0].quoted && tokens[0].text == "start") {
            if (tokens.size() != 2)
                throw InvalidGrammar("'start' takes one symbol (line " + std::to_string(line_no) + ")");
            start_name = tokens[1].text;
            continue;
        }
        rule_lines.emplace_back(line_no, std::move(tokens));
    }

    auto resolve = [&](const TextToken& t) -> Symbol {
        if (t.quoted) return g.add_terminal(t.text);
        if (auto s = g.find_symbol(t.text)) return *s;
        return g.add_nonterminal(t.text);
    };

    for (auto& [ln, tokens] : rule_lines) {
        size_t pos = 0;
        std::optional<double> prob;
        double num = 0.0;
        if (!tokens[pos].quoted && parse_number(tokens[pos].text, num)) {
            prob = num;
            ++pos;
        }
        // collect LHS up to ->
        std::vector<Symbol> lhs;
        while (pos < tokens.size() && !(tokens[pos].text == "->" && !tokens[pos].quoted)) {
            lhs.push_back(resolve(tokens[pos]));
            ++pos;
        }
        if (pos == tokens.size())
            throw InvalidGrammar("missing '->' on line " + std::to_string(ln));
        if (lhs.empty()) throw InvalidGrammar("missing left-hand side on line " + std::to_string(ln));
        ++pos;

        std::vector<std::vector<Symbol>> alts;
        alts.emplace_back();
        bool saw_alt_bar = false;
        for (; pos < tokens.size(); ++pos) {
            if (!tokens[pos].quoted && tokens[pos].text == "|") {
                alts.emplace_back();
                saw_alt_bar = true;
                continue;
            }
            if (!tokens[pos].quoted && (tokens[pos].text == "eps" || tokens[pos].text == "\xce\xb5") &&
                !g.find_symbol(tokens[pos].text))
                continue; // lone epsilon keyword -> empty alternative
            alts.back().push_back(resolve(tokens[pos]));
        }
        if (prob && saw_alt_bar)
            throw InvalidGrammar("probability lines take a single alternative (line " + std::to_string(ln) +
                                 ")");
        for (auto& alt : alts) g.add_rule(lhs, std::move(alt), prob);
    }

    if (start_name) {
        Symbol s = g.find_symbol(*start_name).value_or(g.add_nonterminal(*start_name));
        g.set_start(s);
    } else {
        for (const Rule& r : g.rules_) {
            auto it = std::find_if(r.lhs.begin(), r.lhs.end(), [&](Symbol s) { return g.is_nonterminal(s); });
            if (it != r.lhs.end()) {
                g.set_start(*it);
                break;
            }
        }
    }
    g.validate();
    return g;
}

// ---------------------------------------------------------------------------
// Tokenization helpers
// ---------------------------------------------------------------------------

namespace {

bool single_char_terminals(const Grammar& g) {
    for (size_t s = 0; s < g.symbol_count(); ++s) {
        Symbol sym = static_cast<Symbol>(s);
        if (g.is_terminal(sym) && g.name(sym).size() != 1) return false;
    }
    return true;
}

} // namespace

std::vector<Symbol> Grammar::tokenize(const std::string& text) const {
    std::vector<Symbol> out;
    if (single_char_terminals(*this)) {
        for (char c : text) {
            if (std::isspace(static_cast<unsigned char>(c))) continue;
            auto s = find_symbol(std::string(1, c));
            if (!s || !is_terminal(*s))
                throw UnknownSymbol("'" + std::string(1, c) + "' is not a terminal of the grammar");
            out.push_back(*s);
        }
        return out;
    }
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        auto s = find_symbol(tok);
        if (!s || !is_terminal(*s))
            throw UnknownSymbol("'" + tok + "' is not a terminal of the grammar");
        out.push_back(*s);
    }
    return out;
}

std::string Grammar::to_text(std::span<const Symbol> symbols) const {
    const bool compact = single_char_terminals(*this);
    std::string out;
    for (size_t i = 0; i < symbols.size(); ++i) {
        if (!compact && i) out += ' ';
        out += name(symbols[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Top-down parsing: chart recognition, then derivation extraction
// ---------------------------------------------------------------------------

namespace {

struct EarleyItem {
    int32_t rule;
    int32_t dot;
    int32_t origin;
};

uint64_t item_key(int32_t rule, int32_t dot, int32_t origin) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(rule)) << 40) ^
           (static_cast<uint64_t>(static_cast<uint32_t>(dot)) << 28) ^
           static_cast<uint32_t>(origin);
}

uint64_t span_key(Symbol s, int32_t i) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(s)) << 32) | static_cast<uint32_t>(i);
}

struct Chart {
    // (symbol, start) -> sorted list of end positions with a completed parse
    std::unordered_map<uint64_t, std::vector<int32_t>> ends;
    bool truncated = false;
    bool accepted = false;
};

// Builds per-lhs rule indices; parsers require context-free input.
std::vector<std::vector<int32_t>> rules_by_lhs(const Grammar& g) {
    std::vector<std::vector<int32_t>> by_lhs(g.symbol_count());
    const auto& rules = g.rules();
    for (size_t i = 0; i < rules.size(); ++i) by_lhs[static_cast<size_t>(rules[i].lhs[0])].push_back(static_cast<int32_t>(i));
    return by_lhs;
}

Chart run_earley(const Grammar& g, std::span<const Symbol> input, const ParseLimits& limits) {
    const auto& rules = g.rules();
    const auto by_lhs = rules_by_lhs(g);
    const int32_t n = static_cast<int32_t>(input.size());
    const Symbol start = g.start();

    std::vector<std::vector<EarleyItem>> sets(static_cast<size_t>(n) + 1);
    std::vector<std::unordered_set<uint64_t>> seen(static_cast<size_t>(n) + 1);
    // nonterminals with an empty-span completion at position i
    std::vector<std::unordered_set<Symbol>> empty_done(static_cast<size_t>(n) + 1);
    std::unordered_set<uint64_t> completions; // dedups (sym, origin, end)

    Chart chart;
    size_t total_items = 0;

    auto add = [&](int32_t set_idx, int32_t rule, int32_t dot, int32_t origin) {
        if (!seen[static_cast<size_t>(set_idx)].insert(item_key(rule, dot, origin)).second) return;
        if (++total_items > limits.max_items) {
            chart.truncated = true;
            return;
        }
        sets[static_cast<size_t>(set_idx)].push_back({rule, dot, origin});
    };

    for (int32_t r : by_lhs[static_cast<size_t>(start)]) add(0, r, 0, 0);

    for (int32_t i = 0; i <= n && !chart.truncated; ++i) {
        auto& set = sets[static_cast<size_t>(i)];
        for (size_t idx = 0; idx < set.size() && !chart.truncated; ++idx) {
            EarleyItem item = set[idx];
            const Rule& rule = rules[static_cast<size_t>(item.rule)];
            if (item.dot < static_cast<int32_t>(rule.rhs.size())) {
                Symbol next = rule.rhs[static_cast<size_t>(item.dot)];
                if (g.is_terminal(next)) {
                    if (i < n && input[static_cast<size_t>(i)] == next)
                        add(i + 1, item.rule, item.dot + 1, item.origin);
                } else {
                    for (int32_t r : by_lhs[static_cast<size_t>(next)]) add(i, r, 0, i);
                    // already-collapsed empty parse of `next` at i
                    if (empty_done[static_cast<size_t>(i)].count(next))
                        add(i, item.rule, item.dot + 1, item.origin);
                }
            } else {
                Symbol lhs = rule.lhs[0];
                uint64_t ck = (static_cast<uint64_t>(static_cast<uint32_t>(lhs)) << 40) ^
                              (static_cast<uint64_t>(static_cast<uint32_t>(item.origin)) << 20) ^
                              static_cast<uint32_t>(i);
                if (completions.insert(ck).second)
                    chart.ends[span_key(lhs, item.origin)].push_back(i);
                if (item.origin == i) {
                    if (empty_done[static_cast<size_t>(i)].insert(lhs).second) {
                        // advance every item already waiting on lhs at i
                        for (size_t k = 0; k < set.size(); ++k) {
                            EarleyItem w = set[k];
                            const Rule& wr = rules[static_cast<size_t>(w.rule)];
                            if (w.dot < static_cast<int32_t>(wr.rhs.size()) &&
                                wr.rhs[static_cast<size_t>(w.dot)] == lhs)
                                add(i, w.rule, w.dot + 1, w.origin);
                        }
                    }
                } else {
                    for (const EarleyItem& w : sets[static_cast<size_t>(item.origin)]) {
                        const Rule& wr = rules[static_cast<size_t>(w.rule)];
                        if (w.dot < static_cast<int32_t>(wr.rhs.size()) &&
                            wr.rhs[static_cast<size_t>(w.dot)] == lhs)
                            add(i, w.rule, w.dot + 1, w.origin);
                    }
                }
            }
        }
    }

    for (auto& [key, list] : chart.ends) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    if (auto it = chart.ends.find(span_key(start, 0)); it != chart.ends.end())
        chart.accepted = std::binary_search(it->second.begin(), it->second.end(), n);
    return chart;
}

class TreeExtractor {
public:
    TreeExtractor(const Grammar& g, std::span<const Symbol> input, const Chart& chart,
                  const ParseLimits& limits)
        : g_(g), input_(input), chart_(chart), limits_(limits), by_lhs_(rules_by_lhs(g)),
          budget_(limits.max_items) {}

    void run(std::vector<ParseTree>& out) {
        out_ = &out;
        derive(g_.start(), 0, static_cast<int32_t>(input_.size()),
               [&](ParseNode&& root) { emit_root(std::move(root)); });
    }

    bool truncated() const { return truncated_; }

private:
    using Sink = std::function<void(ParseNode&&)>;

    void emit_root(ParseNode&& root) {
        if (out_->size() >= limits_.max_trees) {
            truncated_ = true;
            stop_ = true;
            return;
        }
        out_->push_back(ParseTree{std::move(root)});
    }

    void derive(Symbol a, int32_t i, int32_t j, const Sink& sink) {
        if (stop_) return;
        if (budget_ == 0) {
            truncated_ = true;
            stop_ = true;
            return;
        }
        --budget_;
        uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 40) ^
                       (static_cast<uint64_t>(static_cast<uint32_t>(i)) << 20) ^
                       static_cast<uint32_t>(j);
        if (active_.count(key)) {
            // a same-span derivation of itself pumps forever; the tree set
            // is infinite, so flag truncation and move on
            truncated_ = true;
            return;
        }
        active_.insert(key);
        for (int32_t ri : by_lhs_[static_cast<size_t>(a)]) {
            if (stop_) break;
            const Rule& rule = g_.rules()[static_cast<size_t>(ri)];
            if (rule.rhs.empty()) {
                if (i == j) {
                    ParseNode node;
                    node.symbol = a;
                    node.rule = ri;
                    node.children.push_back(ParseNode{kEpsilon, -1, {}});
                    sink(std::move(node));
                }
                continue;
            }
            std::vector<ParseNode> children;
            extend(rule, ri, 0, i, j, children, sink);
        }
        active_.erase(key);
    }

    void extend(const Rule& rule, int32_t rule_idx, size_t k, int32_t pos, int32_t j,
                std::vector<ParseNode>& children, const Sink& sink) {
        if (stop_) return;
        if (budget_ == 0) {
            truncated_ = true;
            stop_ = true;
            return;
        }
        --budget_;
        if (k == rule.rhs.size()) {
            if (pos == j) {
                ParseNode node;
                node.symbol = rule.lhs[0];
                node.rule = rule_idx;
                node.children = children;
                sink(std::move(node));
            }
            return;
        }
        Symbol x = rule.rhs[k];
        if (g_.is_terminal(x)) {
            if (pos < j && input_[static_cast<size_t>(pos)] == x) {
                children.push_back(ParseNode{x, -1, {}});
                extend(rule, rule_idx, k + 1, pos + 1, j, children, sink);
                children.pop_back();
            }
            return;
        }
        auto it = chart_.ends.find(span_key(x, pos));
        if (it == chart_.ends.end()) return;
        for (int32_t end : it->second) {
            if (end > j) break;
            if (stop_) return;
            derive(x, pos, end, [&](ParseNode&& child) {
                if (stop_) return;
                children.push_back(std::move(child));
                extend(rule, rule_idx, k + 1, end, j, children, sink);
                children.pop_back();
            });
        }
    }

    const Grammar& g_;
    std::span<const Symbol> input_;
    const Chart& chart_;
    ParseLimits limits_;
    std::vector<std::vector<int32_t>> by_lhs_;
    size_t budget_;
    std::vector<ParseTree>* out_ = nullptr;
    std::unordered_set<uint64_t> active_;
    bool truncated_ = false;
    bool stop_ = false;
};

void check_parse_input(const Grammar& g, std::span<const Symbol> input) {
    if (classify(g) != GrammarClass::ContextFree)
        throw NotContextFree("parsing requires a context-free grammar");
    for (Symbol s : input) {
        if (!g.is_terminal(s)) throw UnknownSymbol("input contains a non-terminal symbol");
    }
}

} // namespace

ParseForest parse_top_down(const Grammar& g, std::span<const Symbol> input, ParseLimits limits) {
    check_parse_input(g, input);
    ParseForest forest;
    forest.input.assign(input.begin(), input.end());
    Chart chart = run_earley(g, input, limits);
    if (chart.truncated) {
        forest.truncated = true;
        return forest;
    }
    if (!chart.accepted) return forest;
    TreeExtractor extractor(g, input, chart, limits);
    extractor.run(forest.trees);
    forest.truncated = extractor.truncated();
    return forest;
}

// ---------------------------------------------------------------------------
// Bottom-up parsing: memoized reduction search
// ---------------------------------------------------------------------------

namespace {

// Hash-consed parse nodes: structurally equal subtrees share one id, so
// sentential forms become small integer vectors and deduplication is an
// id comparison.
class NodePool {
public:
    int32_t leaf(Symbol s) { return make(s, -1, {}); }

    int32_t make(Symbol symbol, int32_t rule, std::vector<int32_t> children) {
        Entry e{symbol, rule, std::move(children)};
        auto it = index_.find(e);
        if (it != index_.end()) return it->second;
        int32_t id = static_cast<int32_t>(entries_.size());
        entries_.push_back(e);
        index_.emplace(std::move(e), id);
        return id;
    }

    Symbol symbol(int32_t id) const { return entries_[static_cast<size_t>(id)].symbol; }
    int32_t rule(int32_t id) const { return entries_[static_cast<size_t>(id)].rule; }

    ParseNode materialize(int32_t id) const {
        const Entry& e = entries_[static_cast<size_t>(id)];
        ParseNode node{e.symbol, e.rule, {}};
        node.children.reserve(e.children.size());
        for (int32_t c : e.children) node.children.push_back(materialize(c));
        return node;
    }

private:
    struct Entry {
        Symbol symbol;
        int32_t rule;
        std::vector<int32_t> children;

        bool operator==(const Entry&) const = default;
    };
    struct EntryHash {
        size_t operator()(const Entry& e) const {
            uint64_t h = 0xcbf29ce484222325ULL;
            auto mix = [&](uint64_t v) {
                h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            };
            mix(static_cast<uint64_t>(static_cast<uint32_t>(e.symbol)));
            mix(static_cast<uint64_t>(static_cast<uint32_t>(e.rule)));
            for (int32_t c : e.children) mix(static_cast<uint64_t>(static_cast<uint32_t>(c)));
            return static_cast<size_t>(h);
        }
    };

    std::vector<Entry> entries_;
    std::unordered_map<Entry, int32_t, EntryHash> index_;
};

struct FormHash {
    size_t operator()(const std::vector<int32_t>& form) const {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (int32_t id : form) {
            h ^= static_cast<uint32_t>(id);
            h *= 0x100000001b3ULL;
        }
        return static_cast<size_t>(h);
    }
};

} // namespace

ParseForest parse_bottom_up(const Grammar& g, std::span<const Symbol> input, ParseLimits limits) {
    check_parse_input(g, input);
    ParseForest forest;
    forest.input.assign(input.begin(), input.end());

    const auto& rules = g.rules();
    const Symbol start = g.start();

    NodePool pool;
    int32_t eps_leaf = pool.leaf(kEpsilon);

    std::vector<int32_t> init;
    for (Symbol s : input) init.push_back(pool.leaf(s));

    std::deque<std::vector<int32_t>> queue;
    std::unordered_set<std::vector<int32_t>, FormHash> visited;
    std::set<int32_t> roots;
    visited.insert(init);
    queue.push_back(std::move(init));

    // Right of any reducible occurrence only terminals may remain; this
    // restricts the search to reverse rightmost derivations, which visit
    // every parse tree exactly once.
    auto first_nonterminal_after = [&](const std::vector<int32_t>& form) {
        // index of the last nonterminal + 1; reductions must end at or
        // beyond that point
        size_t bound = 0;
        for (size_t i = 0; i < form.size(); ++i) {
            if (g.is_nonterminal(pool.symbol(form[i]))) bound = i + 1;
        }
        return bound;
    };

    bool overflow = false;
    while (!queue.empty() && !overflow) {
        std::vector<int32_t> form = std::move(queue.front());
        queue.pop_front();

        if (form.size() == 1 && pool.symbol(form[0]) == start && pool.rule(form[0]) >= 0) {
            if (roots.insert(form[0]).second && roots.size() > limits.max_trees) {
                forest.truncated = true;
                roots.erase(form[0]);
                break;
            }
        }

        const size_t min_end = first_nonterminal_after(form);
        auto enqueue = [&](std::vector<int32_t>&& next) {
            if (visited.size() >= limits.max_items) {
                overflow = true;
                forest.truncated = true;
                return;
            }
            if (visited.insert(next).second) queue.push_back(std::move(next));
        };

        for (size_t ri = 0; ri < rules.size() && !overflow; ++ri) {
            const Rule& rule = rules[ri];
            const Symbol lhs = rule.lhs[0];
            const size_t len = rule.rhs.size();
            if (len == 0) {
                int32_t node = pool.make(lhs, static_cast<int32_t>(ri), {eps_leaf});
                for (size_t p = min_end; p <= form.size(); ++p) {
                    std::vector<int32_t> next = form;
                    next.insert(next.begin() + static_cast<std::ptrdiff_t>(p), node);
                    enqueue(std::move(next));
                    if (overflow) break;
                }
                continue;
            }
            if (len > form.size()) continue;
            const size_t first_p = min_end >= len ? min_end - len : 0;
            for (size_t p = first_p; p + len <= form.size(); ++p) {
                bool match = true;
                for (size_t k = 0; k < len; ++k) {
                    if (pool.symbol(form[p + k]) != rule.rhs[k]) {
                        match = false;
                        break;
                    }
                }
                if (!match || p + len < min_end) continue;
                std::vector<int32_t> next;
                next.reserve(form.size() - len + 1);
                next.insert(next.end(), form.begin(), form.begin() + static_cast<std::ptrdiff_t>(p));
                next.push_back(pool.make(lhs, static_cast<int32_t>(ri),
                                         {form.begin() + static_cast<std::ptrdiff_t>(p),
                                          form.begin() + static_cast<std::ptrdiff_t>(p + len)}));
                next.insert(next.end(), form.begin() + static_cast<std::ptrdiff_t>(p + len),
                            form.end());
                enqueue(std::move(next));
                if (overflow) break;
            }
        }
    }
    for (int32_t root : roots) forest.trees.push_back(ParseTree{pool.materialize(root)});
    return forest;
}

// ---------------------------------------------------------------------------
// Stochastic operations
// ---------------------------------------------------------------------------

SampleResult sample(const Grammar& g, uint64_t seed, int max_depth) {
    g.check_normalized();
    const auto by_lhs = rules_by_lhs(g);
    const auto& rules = g.rules();
    Rng rng(seed);

    constexpr int kAttempts = 100;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        SampleResult result;
        result.probability = 1.0;
        bool ok = true;

        std::function<ParseNode(Symbol, int)> expand = [&](Symbol a, int depth) -> ParseNode {
            if (!ok) return {};
            if (depth > max_depth) {
                ok = false;
                return {};
            }
            const auto& candidates = by_lhs[static_cast<size_t>(a)];
            double u = rng.next_double();
            int32_t chosen = candidates.back();
            double acc = 0.0;
            for (int32_t ri : candidates) {
                acc += *rules[static_cast<size_t>(ri)].probability;
                if (u < acc) {
                    chosen = ri;
                    break;
                }
            }
            result.probability *= *rules[static_cast<size_t>(chosen)].probability;
            ParseNode node{a, chosen, {}};
            const Rule& rule = rules[static_cast<size_t>(chosen)];
            if (rule.rhs.empty()) {
                node.children.push_back(ParseNode{kEpsilon, -1, {}});
                return node;
            }
            for (Symbol x : rule.rhs) {
                if (!ok) break;
                if (g.is_terminal(x)) {
                    result.string.push_back(x);
                    node.children.push_back(ParseNode{x, -1, {}});
                } else {
                    node.children.push_back(expand(x, depth + 1));
                }
            }
            return node;
        };

        ParseNode root = expand(g.start(), 1);
        if (ok) {
            result.tree = ParseTree{std::move(root)};
            return result;
        }
    }
    throw DepthExceeded("no derivation within max_depth after 100 attempts");
}

namespace {

double tree_probability(const Grammar& g, const ParseNode& node) {
    double p = 1.0;
    if (node.rule >= 0) p = *g.rules()[static_cast<size_t>(node.rule)].probability;
    for (const ParseNode& c : node.children) p *= tree_probability(g, c);
    return p;
}

} // namespace

double string_probability(const Grammar& g, std::span<const Symbol> input, ParseLimits limits) {
    g.check_normalized();
    ParseForest forest = parse_top_down(g, input, limits);
    if (forest.truncated)
        throw LimitExceeded("parse forest truncated; probability would only be a lower bound");
    double total = 0.0;
    for (const ParseTree& t : forest.trees) total += tree_probability(g, t.root);
    return total;
}

// ---------------------------------------------------------------------------
// Language enumeration
// ---------------------------------------------------------------------------

namespace {

// Minimum derivable terminal length per nonterminal (infinity when a
// nonterminal cannot derive a terminal string).
std::vector<double> min_lengths(const Grammar& g, const std::vector<std::vector<int32_t>>& by_lhs) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> len(g.symbol_count(), kInf);
    for (size_t s = 0; s < g.symbol_count(); ++s) {
        if (g.is_terminal(static_cast<Symbol>(s))) len[s] = 1.0;
    }
    bool changed = true;
    while (changed) {
        changed = false;
        for (const Rule& r : g.rules()) {
            if (r.lhs.size() != 1) continue;
            double sum = 0.0;
            for (Symbol x : r.rhs) sum += len[static_cast<size_t>(x)];
            if (sum < len[static_cast<size_t>(r.lhs[0])]) {
                len[static_cast<size_t>(r.lhs[0])] = sum;
                changed = true;
            }
        }
    }
    (void)by_lhs;
    return len;
}

LanguageEnumeration enumerate_context_free(const Grammar& g, size_t max_len, size_t max_count) {
    const auto by_lhs = rules_by_lhs(g);
    const auto& rules = g.rules();
    const bool stochastic = g.stochastic();
    const auto minlen = min_lengths(g, by_lhs);

    LanguageEnumeration out;
    std::map<std::vector<Symbol>, double> found;

    struct Form {
        std::vector<Symbol> symbols;
        double probability;
    };
    std::deque<Form> queue;
    queue.push_back({{g.start()}, 1.0});

    size_t work = 0;
    const size_t work_cap = std::max<size_t>(4'000'000, max_count * 64);

    while (!queue.empty()) {
        if (++work > work_cap) {
            out.truncated = true;
            break;
        }
        Form form = std::move(queue.front());
        queue.pop_front();

        size_t nt_pos = form.symbols.size();
        for (size_t i = 0; i < form.symbols.size(); ++i) {
            if (g.is_nonterminal(form.symbols[i])) {
                nt_pos = i;
                break;
            }
        }
        if (nt_pos == form.symbols.size()) {
            if (form.symbols.size() <= max_len) {
                auto [it, fresh] = found.emplace(form.symbols, 0.0);
                it->second += form.probability;
                if (fresh && found.size() >= max_count && !queue.empty()) {
                    out.truncated = true;
                    break;
                }
            }
            continue;
        }
        Symbol a = form.symbols[static_cast<size_t>(nt_pos)];
        for (int32_t ri : by_lhs[static_cast<size_t>(a)]) {
            const Rule& rule = rules[static_cast<size_t>(ri)];
            Form next;
            next.symbols.reserve(form.symbols.size() - 1 + rule.rhs.size());
            next.symbols.insert(next.symbols.end(), form.symbols.begin(),
                                form.symbols.begin() + static_cast<std::ptrdiff_t>(nt_pos));
            next.symbols.insert(next.symbols.end(), rule.rhs.begin(), rule.rhs.end());
            next.symbols.insert(next.symbols.end(),
                                form.symbols.begin() + static_cast<std::ptrdiff_t>(nt_pos) + 1,
                                form.symbols.end());
            next.probability = form.probability * (stochastic ? *rule.probability : 1.0);
            double bound = 0.0;
            for (Symbol x : next.symbols) bound += minlen[static_cast<size_t>(x)];
            if (std::isinf(bound)) continue; // dead branch, derives nothing
            if (bound > static_cast<double>(max_len)) {
                out.truncated = true;
                continue;
            }
            queue.push_back(std::move(next));
        }
    }

    for (auto& [str, prob] : found) {
        LanguageEntry e;
        e.string = str;
        if (stochastic) e.probability = prob;
        out.entries.push_back(std::move(e));
    }
    std::sort(out.entries.begin(), out.entries.end(), [&](const LanguageEntry& a, const LanguageEntry& b) {
        if (a.string.size() != b.string.size()) return a.string.size() < b.string.size();
        return g.to_text(a.string) < g.to_text(b.string);
    });
    return out;
}

// General rewriting for non-context-free grammars: strings only.
LanguageEnumeration enumerate_general(const Grammar& g, size_t max_len, size_t max_count) {
    LanguageEnumeration out;
    std::set<std::vector<Symbol>> found;
    std::set<std::vector<Symbol>> visited;
    std::deque<std::vector<Symbol>> queue;
    queue.push_back({g.start()});
    visited.insert(queue.front());

    size_t work = 0;
    const size_t work_cap = std::max<size_t>(1'000'000, max_count * 64);
    const size_t form_cap = max_len + 4;

    while (!queue.empty()) {
        if (++work > work_cap) {
            out.truncated = true;
            break;
        }
        std::vector<Symbol> form = std::move(queue.front());
        queue.pop_front();

        bool all_terminal = std::all_of(form.begin(), form.end(),
                                        [&](Symbol s) { return g.is_terminal(s); });
        if (all_terminal) {
            if (form.size() <= max_len) {
                found.insert(form);
                if (found.size() >= max_count && !queue.empty()) {
                    out.truncated = true;
                    break;
                }
            }
            continue;
        }
        for (const Rule& rule : g.rules()) {
            if (rule.lhs.size() > form.size()) continue;
            for (size_t p = 0; p + rule.lhs.size() <= form.size(); ++p) {
                if (!std::equal(rule.lhs.begin(), rule.lhs.end(), form.begin() + static_cast<std::ptrdiff_t>(p)))
                    continue;
                std::vector<Symbol> next;
                next.reserve(form.size() - rule.lhs.size() + rule.rhs.size());
                next.insert(next.end(), form.begin(), form.begin() + static_cast<std::ptrdiff_t>(p));
                next.insert(next.end(), rule.rhs.begin(), rule.rhs.end());
                next.insert(next.end(), form.begin() + static_cast<std::ptrdiff_t>(p + rule.lhs.size()),
                            form.end());
                if (next.size() > form_cap) {
                    out.truncated = true;
                    continue;
                }
                if (visited.insert(next).second) queue.push_back(std::move(next));
            }
        }
    }

    for (const auto& str : found) out.entries.push_back(LanguageEntry{str, std::nullopt});
    std::sort(out.entries.begin(), out.entries.end(), [&](const LanguageEntry& a, const LanguageEntry& b) {
        if (a.string.size() != b.string.size()) return a.string.size() < b.string.size();
        return g.to_text(a.string) < g.to_text(b.string);
    });
    return out;
}

} // namespace

LanguageEnumeration enumerate_language(const Grammar& g, size_t max_len, size_t max_count) {
    if (classify(g) == GrammarClass::ContextFree) return enumerate_context_free(g, max_len, max_count);
    return enumerate_general(g, max_len, max_count);
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::string tree_to_text(const Grammar& g, const ParseNode& node) {
    if (node.symbol == kEpsilon) return "eps";
    std::string out = g.name(node.symbol);
    if (!node.children.empty()) {
        out += '(';
        for (size_t i = 0; i < node.children.size(); ++i) {
            if (i) out += ',';
            out += tree_to_text(g, node.children[i]);
        }
        out += ')';
    }
    return out;
}

std::string frontier_text(const Grammar& g, const ParseNode& node) {
    std::vector<Symbol> leaves;
    std::function<void(const ParseNode&)> walk = [&](const ParseNode& n) {
        if (n.children.empty()) {
            if (n.symbol != kEpsilon && g.is_terminal(n.symbol)) leaves.push_back(n.symbol);
            return;
        }
        for (const ParseNode& c : n.children) walk(c);
    };
    walk(node);
    return g.to_text(leaves);
}

} // namespace threatlang
