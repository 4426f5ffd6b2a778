#pragma once

#include <stdexcept>
#include <string>

namespace threatlang {

// Base class for all domain errors raised by the toolkit. The CLI maps
// these to exit code 1; anything else is a bug.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct SourcePos {
    int line = 0;
    int col = 0;
};

// ---- grammar engine ----

class InvalidGrammar : public Error {
public:
    explicit InvalidGrammar(const std::string& msg, int rule_index = -1)
        : Error(msg), rule_index(rule_index) {}
    int rule_index;
};

class NotContextFree : public Error {
public:
    using Error::Error;
};

class NotNormalized : public Error {
public:
    using Error::Error;
};

class DepthExceeded : public Error {
public:
    using Error::Error;
};

class LimitExceeded : public Error {
public:
    using Error::Error;
};

class UnknownSymbol : public Error {
public:
    using Error::Error;
};

// ---- DSL frontend ----

class SyntaxError : public Error {
public:
    SyntaxError(const std::string& msg, SourcePos pos)
        : Error(msg + " at " + std::to_string(pos.line) + ":" + std::to_string(pos.col)),
          pos(pos) {}
    SourcePos pos;
};

class ResolutionError : public Error {
public:
    ResolutionError(const std::string& msg, SourcePos pos)
        : Error(msg + " at " + std::to_string(pos.line) + ":" + std::to_string(pos.col)),
          pos(pos) {}
    SourcePos pos;
};

class DuplicateName : public Error {
public:
    DuplicateName(const std::string& msg, SourcePos pos)
        : Error(msg + " at " + std::to_string(pos.line) + ":" + std::to_string(pos.col)),
          pos(pos) {}
    SourcePos pos;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class UnknownAsset : public Error {
public:
    using Error::Error;
};

class UnknownDefense : public Error {
public:
    using Error::Error;
};

class BadLink : public Error {
public:
    using Error::Error;
};

class UnresolvedEntry : public Error {
public:
    using Error::Error;
};

class ExpansionError : public Error {
public:
    using Error::Error;
};

// ---- attack graph / analyses ----

class GraphError : public Error {
public:
    using Error::Error;
};

class Unreachable : public Error {
public:
    using Error::Error;
};

class NoCut : public Error {
public:
    using Error::Error;
};

class StateSpaceExceeded : public Error {
public:
    using Error::Error;
};

class UnsupportedFormat : public Error {
public:
    using Error::Error;
};

// ---- TTC engine ----

class InvalidParameters : public Error {
public:
    using Error::Error;
};

class NegativeLocal : public Error {
public:
    using Error::Error;
};

class MissingLocal : public Error {
public:
    using Error::Error;
};

class NoEntry : public Error {
public:
    using Error::Error;
};

class UnknownStep : public Error {
public:
    using Error::Error;
};

class NoAnnotatedTargets : public Error {
public:
    using Error::Error;
};

// ---- catalog ingest ----

class SchemaError : public Error {
public:
    using Error::Error;
};

class DuplicateTechnique : public Error {
public:
    using Error::Error;
};

class DanglingPrerequisite : public Error {
public:
    using Error::Error;
};

class EmptyCatalog : public Error {
public:
    using Error::Error;
};

class IdentifierCollision : public Error {
public:
    using Error::Error;
};

} // namespace threatlang
