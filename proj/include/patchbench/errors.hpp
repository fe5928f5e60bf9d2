// Error taxonomy shared by all modules. Tool dispatch and engines catch
// Error subclasses and convert them into observations; anything else is a bug.
#pragma once

#include <stdexcept>
#include <string>

namespace patchbench {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Manifest / config problems: a named field is missing or malformed.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what) : Error(what) {}
};

// A referenced filesystem path does not exist or has the wrong kind.
class PathError : public Error {
public:
    explicit PathError(const std::string& what) : Error(what) {}
};

// Text could not be parsed; carries a 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, long line = 0)
        : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// A patch payload could not be applied to the workspace.
class ApplyError : public Error {
public:
    explicit ApplyError(const std::string& what) : Error(what) {}
};

// An operation tried to reach outside the workspace sandbox.
class SandboxError : public Error {
public:
    explicit SandboxError(const std::string& what) : Error(what) {}
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& what) : Error(what) {}
};

class NothingToUndoError : public Error {
public:
    explicit NothingToUndoError(const std::string& what) : Error(what) {}
};

// All gateway backends were exhausted; carries the last cause text.
class GatewayError : public Error {
public:
    explicit GatewayError(const std::string& what) : Error(what) {}
};

// A backend reply violated the wire protocol (fatal, never retried).
class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& what) : Error(what) {}
};

// The scripted backend ran out of entries; fails the run deterministically.
class ScriptExhaustedError : public Error {
public:
    explicit ScriptExhaustedError(const std::string& what) : Error(what) {}
};

// An API was called outside its contract (caller bug, not input data).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace patchbench
