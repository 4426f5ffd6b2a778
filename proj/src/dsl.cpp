#include "threatlang/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace threatlang {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace {

enum class Tok {
    Ident,
    Number,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Dot,
    DotDot,
    Pipe,
    Amp,
    Hash,
    Arrow,
    BiArrow,
    Star,
    End,
};

const char* tok_name(Tok t) {
    switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Dot: return "'.'";
    case Tok::DotDot: return "'..'";
    case Tok::Pipe: return "'|'";
    case Tok::Amp: return "'&'";
    case Tok::Hash: return "'#'";
    case Tok::Arrow: return "'->'";
    case Tok::BiArrow: return "'<->'";
    case Tok::Star: return "'*'";
    case Tok::End: return "end of input";
    }
    return "?";
}

struct Token {
    Tok kind;
    std::string text;
    SourcePos pos;
};

std::vector<Token> lex(const std::string& text) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    auto push = [&](Tok kind, std::string t, int l, int c) { out.push_back({kind, std::move(t), {l, c}}); };

    while (i < text.size()) {
        char c = text[i];
        int l = line, co = col;
        if (c == '\n') {
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++col;
            ++i;
            continue;
        }
        if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
            while (i < text.size() && text[i] != '\n') ++i;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
                ++j;
            push(Tok::Ident, text.substr(i, j - i), l, co);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        auto scan_number = [&](size_t start) {
            size_t j = start;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            // fraction only when a single dot is followed by a digit; ".."
            // belongs to multiplicity ranges
            if (j < text.size() && text[j] == '.' && j + 1 < text.size() &&
                std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
                ++j;
                while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            }
            return j;
        };
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t j = scan_number(i);
            push(Tok::Number, text.substr(i, j - i), l, co);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        if (c == '-' && i + 1 < text.size() && text[i + 1] == '>') {
            push(Tok::Arrow, "->", l, co);
            i += 2;
            col += 2;
            continue;
        }
        if (c == '-' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
            size_t j = scan_number(i + 1);
            push(Tok::Number, text.substr(i, j - i), l, co);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        if (c == '<' && i + 2 < text.size() && text[i + 1] == '-' && text[i + 2] == '>') {
            push(Tok::BiArrow, "<->", l, co);
            i += 3;
            col += 3;
            continue;
        }
        if (c == '.' && i + 1 < text.size() && text[i + 1] == '.') {
            push(Tok::DotDot, "..", l, co);
            i += 2;
            col += 2;
            continue;
        }
        Tok kind;
        switch (c) {
        case '{': kind = Tok::LBrace; break;
        case '}': kind = Tok::RBrace; break;
        case '[': kind = Tok::LBracket; break;
        case ']': kind = Tok::RBracket; break;
        case '(': kind = Tok::LParen; break;
        case ')': kind = Tok::RParen; break;
        case ',': kind = Tok::Comma; break;
        case '.': kind = Tok::Dot; break;
        case '|': kind = Tok::Pipe; break;
        case '&': kind = Tok::Amp; break;
        case '#': kind = Tok::Hash; break;
        case '*': kind = Tok::Star; break;
        default:
            throw SyntaxError(std::string("unexpected character '") + c + "'", {l, co});
        }
        push(kind, std::string(1, c), l, co);
        ++i;
        ++col;
    }
    out.push_back({Tok::End, "", {line, col}});
    return out;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
public:
    explicit Parser(const std::string& text) : tokens_(lex(text)) {}

    LanguageSpec parse() {
        LanguageSpec spec;
        while (peek().kind != Tok::End) {
            const Token& t = peek();
            if (t.kind == Tok::Ident && t.text == "asset") {
                parse_asset(spec);
            } else if (t.kind == Tok::Ident && t.text == "assoc") {
                parse_assoc(spec);
            } else {
                throw SyntaxError("expected 'asset' or 'assoc', found " + describe(t), t.pos);
            }
        }
        validate(spec);
        return spec;
    }

private:
    const Token& peek(size_t ahead = 0) const { return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)]; }
    Token next() { return tokens_[std::min(pos_++, tokens_.size() - 1)]; }

    static std::string describe(const Token& t) {
        if (t.kind == Tok::End) return "end of input";
        return "'" + t.text + "'";
    }

    Token expect(Tok kind) {
        Token t = next();
        if (t.kind != kind)
            throw SyntaxError(std::string("expected ") + tok_name(kind) + ", found " + describe(t), t.pos);
        return t;
    }

    TtcDistribution parse_dist() {
        Token name = expect(Tok::Ident);
        expect(Tok::LParen);
        std::vector<double> params;
        if (peek().kind != Tok::RParen) {
            for (;;) {
                Token num = expect(Tok::Number);
                params.push_back(std::stod(num.text));
                if (peek().kind == Tok::Comma) {
                    next();
                    continue;
                }
                break;
            }
        }
        expect(Tok::RParen);
        std::string text = name.text + "(";
        for (size_t i = 0; i < params.size(); ++i) {
            if (i) text += ',';
            std::ostringstream os;
            os.precision(17);
            os << params[i];
            text += os.str();
        }
        text += ')';
        try {
            return TtcDistribution::parse(text);
        } catch (const InvalidParameters& e) {
            throw SyntaxError(e.what(), name.pos);
        }
    }

    StepRef parse_ref() {
        Token first = expect(Tok::Ident);
        StepRef ref;
        ref.pos = first.pos;
        if (peek().kind == Tok::Dot) {
            next();
            Token second = expect(Tok::Ident);
            ref.role = first.text;
            ref.step = second.text;
        } else {
            ref.step = first.text;
        }
        return ref;
    }

    std::vector<StepRef> parse_ref_list() {
        std::vector<StepRef> refs;
        refs.push_back(parse_ref());
        while (peek().kind == Tok::Comma) {
            next();
            refs.push_back(parse_ref());
        }
        return refs;
    }

    void parse_asset(LanguageSpec& spec) {
        next(); // asset
        Token name = expect(Tok::Ident);
        if (spec.assets.count(name.text))
            throw DuplicateName("asset '" + name.text + "' declared twice", name.pos);
        AssetType asset;
        asset.name = name.text;
        expect(Tok::LBrace);
        while (peek().kind != Tok::RBrace) {
            const Token& t = peek();
            if (t.kind == Tok::Pipe || t.kind == Tok::Amp) {
                next();
                StepDecl step;
                step.kind = t.kind == Tok::Pipe ? StepKind::Or : StepKind::And;
                Token sname = expect(Tok::Ident);
                step.name = sname.text;
                step.pos = sname.pos;
                if (peek().kind == Tok::LBracket) {
                    next();
                    step.ttc = parse_dist();
                    if (step.ttc.family() == DistFamily::Bernoulli)
                        throw SyntaxError("Bernoulli is reserved for defense enablement", sname.pos);
                    expect(Tok::RBracket);
                }
                if (peek().kind == Tok::Arrow) {
                    next();
                    step.children = parse_ref_list();
                }
                asset.steps.push_back(std::move(step));
            } else if (t.kind == Tok::Hash) {
                next();
                DefenseDecl def;
                Token dname = expect(Tok::Ident);
                def.name = dname.text;
                def.pos = dname.pos;
                if (peek().kind == Tok::LBracket) {
                    next();
                    TtcDistribution dist = parse_dist();
                    if (dist.family() != DistFamily::Bernoulli)
                        throw SyntaxError("defense enablement must be Bernoulli(p)", dname.pos);
                    def.enablement = dist.params()[0];
                    expect(Tok::RBracket);
                }
                expect(Tok::Arrow);
                def.protects = parse_ref_list();
                asset.defenses.push_back(std::move(def));
            } else {
                throw SyntaxError("expected '|', '&', '#' or '}', found " + describe(t), t.pos);
            }
        }
        expect(Tok::RBrace);
        spec.assets.emplace(asset.name, std::move(asset));
    }

    Multiplicity parse_mult() {
        Token num = expect(Tok::Number);
        if (num.text == "1" && peek().kind != Tok::DotDot) return Multiplicity::One;
        if (peek().kind != Tok::DotDot)
            throw SyntaxError("multiplicity must be 1, 0..1, 0..* or 1..*", num.pos);
        next();
        if (num.text == "0") {
            if (peek().kind == Tok::Star) {
                next();
                return Multiplicity::ZeroOrMany;
            }
            Token hi = expect(Tok::Number);
            if (hi.text == "1") return Multiplicity::ZeroOrOne;
            throw SyntaxError("multiplicity must be 1, 0..1, 0..* or 1..*", hi.pos);
        }
        if (num.text == "1") {
            expect(Tok::Star);
            return Multiplicity::OneOrMany;
        }
        throw SyntaxError("multiplicity must be 1, 0..1, 0..* or 1..*", num.pos);
    }

    void parse_assoc(LanguageSpec& spec) {
        next(); // assoc
        Token name = expect(Tok::Ident);
        if (spec.associations.count(name.text))
            throw DuplicateName("association '" + name.text + "' declared twice", name.pos);
        Association assoc;
        assoc.name = name.text;
        expect(Tok::LBracket);
        assoc.left.asset = expect(Tok::Ident).text;
        assoc.left.mult = parse_mult();
        expect(Tok::RBracket);
        Token lrole = expect(Tok::Ident);
        assoc.left.role = lrole.text;
        expect(Tok::BiArrow);
        expect(Tok::LBracket);
        assoc.right.asset = expect(Tok::Ident).text;
        assoc.right.mult = parse_mult();
        expect(Tok::RBracket);
        Token rrole = expect(Tok::Ident);
        assoc.right.role = rrole.text;
        if (assoc.left.role == assoc.right.role)
            throw DuplicateName("association roles must differ: " + assoc.left.role, rrole.pos);
        spec.associations.emplace(assoc.name, std::move(assoc));
    }

    // ---- semantic checks: name uniqueness, role visibility, resolution ----

    struct RoleTarget {
        std::string asset;
    };

    static std::map<std::string, std::string> visible_roles(const LanguageSpec& spec,
                                                            const std::string& asset,
                                                            bool* ambiguous = nullptr,
                                                            std::string* dup_role = nullptr) {
        std::map<std::string, std::string> roles; // role -> target asset
        auto add = [&](const std::string& role, const std::string& target) {
            auto [it, fresh] = roles.emplace(role, target);
            if (!fresh && ambiguous) {
                *ambiguous = true;
                if (dup_role) *dup_role = role;
            }
        };
        for (const auto& [name, assoc] : spec.associations) {
            if (assoc.left.asset == asset) add(assoc.right.role, assoc.right.asset);
            if (assoc.right.asset == asset) add(assoc.left.role, assoc.left.asset);
        }
        return roles;
    }

    static std::string candidates_of(const AssetType& asset) {
        std::string out;
        size_t shown = 0;
        for (const StepDecl& s : asset.steps) {
            if (shown++ == 5) break;
            if (!out.empty()) out += ", ";
            out += s.name;
        }
        return out.empty() ? "none" : out;
    }

    void validate(const LanguageSpec& spec) {
        for (const auto& [name, assoc] : spec.associations) {
            for (const AssociationEnd* end : {&assoc.left, &assoc.right}) {
                if (!spec.assets.count(end->asset))
                    throw ResolutionError("association '" + name + "' references undeclared asset '" +
                                              end->asset + "'",
                                          {0, 0});
            }
        }
        for (const auto& [aname, asset] : spec.assets) {
            std::map<std::string, SourcePos> names;
            for (const StepDecl& s : asset.steps) {
                if (names.count(s.name))
                    throw DuplicateName("duplicate declaration '" + s.name + "' in asset " + aname, s.pos);
                names.emplace(s.name, s.pos);
            }
            for (const DefenseDecl& d : asset.defenses) {
                if (names.count(d.name))
                    throw DuplicateName("duplicate declaration '" + d.name + "' in asset " + aname, d.pos);
                names.emplace(d.name, d.pos);
            }

            bool ambiguous = false;
            std::string dup_role;
            auto roles = visible_roles(spec, aname, &ambiguous, &dup_role);
            if (ambiguous)
                throw DuplicateName("role '" + dup_role + "' is ambiguous for asset " + aname, {0, 0});

            auto has_step = [&](const AssetType& a, const std::string& step) {
                return std::any_of(a.steps.begin(), a.steps.end(),
                                   [&](const StepDecl& s) { return s.name == step; });
            };
            auto resolve = [&](const StepRef& ref, const char* what) {
                if (ref.role.empty()) {
                    if (!has_step(asset, ref.step))
                        throw ResolutionError(std::string(what) + " references unknown step '" + ref.step +
                                                  "' in asset " + aname +
                                                  " (candidates: " + candidates_of(asset) + ")",
                                              ref.pos);
                    return;
                }
                auto it = roles.find(ref.role);
                if (it == roles.end())
                    throw ResolutionError(std::string(what) + " uses unknown role '" + ref.role +
                                              "' on asset " + aname,
                                          ref.pos);
                const AssetType& other = spec.assets.at(it->second);
                if (!has_step(other, ref.step))
                    throw ResolutionError(std::string(what) + " references unknown step '" + ref.step +
                                              "' in asset " + other.name +
                                              " (candidates: " + candidates_of(other) + ")",
                                          ref.pos);
            };
            for (const StepDecl& s : asset.steps) {
                for (const StepRef& ref : s.children) resolve(ref, "step child");
            }
            for (const DefenseDecl& d : asset.defenses) {
                if (d.protects.empty())
                    throw ResolutionError("defense '" + d.name + "' protects nothing", d.pos);
                for (const StepRef& ref : d.protects) resolve(ref, "defense");
            }
        }
    }

    std::vector<Token> tokens_;
    size_t pos_ = 0;
};

} // namespace

LanguageSpec parse_language(const std::string& text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Merge
// ---------------------------------------------------------------------------

namespace {

std::string first_difference(const AssetType& a, const AssetType& b) {
    if (a.steps.size() != b.steps.size())
        return "step count differs (" + std::to_string(a.steps.size()) + " vs " +
               std::to_string(b.steps.size()) + ")";
    for (size_t i = 0; i < a.steps.size(); ++i) {
        const StepDecl &x = a.steps[i], &y = b.steps[i];
        if (x.name != y.name) return "step #" + std::to_string(i) + " name: " + x.name + " vs " + y.name;
        if (x.kind != y.kind) return "step '" + x.name + "' kind differs";
        if (!(x.ttc == y.ttc))
            return "step '" + x.name + "' TTC: " + x.ttc.to_string() + " vs " + y.ttc.to_string();
        if (!(x.children == y.children)) return "step '" + x.name + "' children differ";
    }
    if (a.defenses.size() != b.defenses.size())
        return "defense count differs (" + std::to_string(a.defenses.size()) + " vs " +
               std::to_string(b.defenses.size()) + ")";
    for (size_t i = 0; i < a.defenses.size(); ++i) {
        const DefenseDecl &x = a.defenses[i], &y = b.defenses[i];
        if (x.name != y.name)
            return "defense #" + std::to_string(i) + " name: " + x.name + " vs " + y.name;
        if (!(x == y)) return "defense '" + x.name + "' differs";
    }
    return "bodies differ";
}

} // namespace

LanguageSpec merge_languages(const std::vector<LanguageSpec>& specs) {
    LanguageSpec out;
    for (const LanguageSpec& spec : specs) {
        for (const auto& [name, asset] : spec.assets) {
            auto it = out.assets.find(name);
            if (it == out.assets.end()) {
                out.assets.emplace(name, asset);
            } else if (!(it->second == asset)) {
                throw ConflictError("asset '" + name + "' conflicts across inputs: " +
                                    first_difference(it->second, asset));
            }
        }
        for (const auto& [name, assoc] : spec.associations) {
            auto it = out.associations.find(name);
            if (it == out.associations.end()) {
                out.associations.emplace(name, assoc);
            } else if (!(it->second == assoc)) {
                throw ConflictError("association '" + name + "' conflicts across inputs");
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canonical renderer
// ---------------------------------------------------------------------------

std::string multiplicity_text(Multiplicity m) {
    switch (m) {
    case Multiplicity::One: return "1";
    case Multiplicity::ZeroOrOne: return "0..1";
    case Multiplicity::ZeroOrMany: return "0..*";
    case Multiplicity::OneOrMany: return "1..*";
    }
    return "?";
}

namespace {

std::string ref_text(const StepRef& ref) {
    return ref.role.empty() ? ref.step : ref.role + "." + ref.step;
}

std::string ref_list_text(const std::vector<StepRef>& refs) {
    std::string out;
    for (size_t i = 0; i < refs.size(); ++i) {
        if (i) out += ", ";
        out += ref_text(refs[i]);
    }
    return out;
}

} // namespace

std::string render_language(const LanguageSpec& spec) {
    std::string out;
    const TtcDistribution zero = TtcDistribution::constant(0);
    for (const auto& [name, asset] : spec.assets) {
        out += "asset " + name + " {\n";
        for (const StepDecl& s : asset.steps) {
            out += std::string("  ") + (s.kind == StepKind::Or ? "|" : "&") + " " + s.name;
            if (!(s.ttc == zero)) out += " [" + s.ttc.to_string() + "]";
            if (!s.children.empty()) out += " -> " + ref_list_text(s.children);
            out += "\n";
        }
        for (const DefenseDecl& d : asset.defenses) {
            out += "  # " + d.name;
            if (d.enablement) out += " [" + TtcDistribution::bernoulli(*d.enablement).to_string() + "]";
            out += " -> " + ref_list_text(d.protects) + "\n";
        }
        out += "}\n";
    }
    for (const auto& [name, assoc] : spec.associations) {
        out += "assoc " + name + " [" + assoc.left.asset + " " + multiplicity_text(assoc.left.mult) +
               "] " + assoc.left.role + " <-> [" + assoc.right.asset + " " +
               multiplicity_text(assoc.right.mult) + "] " + assoc.right.role + "\n";
    }
    return out;
}

} // namespace threatlang
