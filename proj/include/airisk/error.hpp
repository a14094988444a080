#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace airisk {

/// Base of every error the library throws. `code()` is a stable, machine-readable
/// name that the CLI and HTTP layers surface verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Structurally malformed document (wrong types, missing or unknown fields).
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& message) : Error("SchemaError", message) {}
};

/// Well-formed document that violates one or more invariants. Every violation is listed.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error("ValidationError", join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "registry validation failed:";
        for (const auto& s : v) {
            out += "\n  - ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> violations_;
};

class UnknownId : public Error {
public:
    explicit UnknownId(const std::string& id) : Error("UnknownId", "unknown id: " + id), id_(id) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class DegenerateInterval : public Error {
public:
    explicit DegenerateInterval(const std::string& m) : Error("DegenerateInterval", m) {}
};

class NonPositiveBound : public Error {
public:
    explicit NonPositiveBound(const std::string& m) : Error("NonPositiveBound", m) {}
};

class InvalidInterval : public Error {
public:
    explicit InvalidInterval(const std::string& m) : Error("InvalidInterval", m) {}
};

class InvalidTrialCount : public Error {
public:
    explicit InvalidTrialCount(const std::string& m) : Error("InvalidTrialCount", m) {}
};

class TrialCountMismatch : public Error {
public:
    explicit TrialCountMismatch(const std::string& m) : Error("TrialCountMismatch", m) {}

protected:
    TrialCountMismatch(std::string code, const std::string& m) : Error(std::move(code), m) {}
};

class EmptyPortfolio : public TrialCountMismatch {
public:
    explicit EmptyPortfolio(const std::string& m) : TrialCountMismatch("EmptyPortfolio", m) {}
};

class InvalidConfidence : public Error {
public:
    explicit InvalidConfidence(const std::string& m) : Error("InvalidConfidence", m) {}
};

class InapplicableControl : public Error {
public:
    explicit InapplicableControl(const std::string& m) : Error("InapplicableControl", m) {}
};

class DeadlineExceeded : public Error {
public:
    explicit DeadlineExceeded(const std::string& m) : Error("DeadlineExceeded", m) {}
};

class UnsupportedFormat : public Error {
public:
    explicit UnsupportedFormat(const std::string& format)
        : Error("UnsupportedFormat", "unsupported format: " + format) {}
};

}  // namespace airisk
