#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vulneval {

// Root of every error the library throws. `kind()` is a stable machine-readable
// tag used by the CLI and the REST layer to map errors onto exit codes and
// HTTP statuses.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class MalformedFeed : public Error {
public:
    // `unit` names what `position` counts ("byte" for JSON, "line" for XML).
    MalformedFeed(const std::string& what, std::size_t position, const char* unit = "byte")
        : Error("MalformedFeed", what + " (at " + unit + " " + std::to_string(position) + ")"),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class UnsupportedFormat : public Error {
public:
    explicit UnsupportedFormat(const std::string& what) : Error("UnsupportedFormat", what) {}
};

class MalformedVector : public Error {
public:
    MalformedVector(std::string token, const std::string& why)
        : Error("MalformedVector", "malformed CVSS vector token '" + token + "': " + why),
          token_(std::move(token)) {}

    const std::string& token() const noexcept { return token_; }

private:
    std::string token_;
};

class MissingPart : public Error {
public:
    explicit MissingPart(const std::string& part)
        : Error("MissingPart", "vector has no " + part + " metrics") {}
};

class UnparsableDescription : public Error {
public:
    explicit UnparsableDescription(std::vector<std::string> sentences)
        : Error("UnparsableDescription", join(sentences)), sentences_(std::move(sentences)) {}

    const std::vector<std::string>& sentences() const noexcept { return sentences_; }

private:
    static std::string join(const std::vector<std::string>& s) {
        std::string out = "unrecognized vector description sentence(s):";
        for (const auto& x : s) out += " [" + x + "]";
        return out;
    }
    std::vector<std::string> sentences_;
};

class IncompleteContext : public Error {
public:
    explicit IncompleteContext(std::vector<std::string> fields)
        : Error("IncompleteContext", join(fields)), fields_(std::move(fields)) {}

    const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    static std::string join(const std::vector<std::string>& f) {
        std::string out = "prompt context missing:";
        for (const auto& x : f) out += " " + x;
        return out;
    }
    std::vector<std::string> fields_;
};

class UnknownReference : public Error {
public:
    explicit UnknownReference(const std::string& what) : Error("UnknownReference", what) {}
};

class NotFound : public Error {
public:
    explicit NotFound(const std::string& what) : Error("NotFound", what) {}
};

class VersionConflict : public Error {
public:
    explicit VersionConflict(const std::string& what) : Error("VersionConflict", what) {}
};

class InvalidRecord : public Error {
public:
    explicit InvalidRecord(const std::string& what) : Error("InvalidRecord", what) {}
};

class LengthMismatch : public Error {
public:
    LengthMismatch(std::size_t a, std::size_t b)
        : Error("LengthMismatch", "prediction/gold length mismatch: " + std::to_string(a) +
                                     " vs " + std::to_string(b)) {}
};

class AlignmentFailure : public Error {
public:
    explicit AlignmentFailure(std::vector<std::string> orphans)
        : Error("AlignmentFailure", join(orphans)), orphans_(std::move(orphans)) {}

    const std::vector<std::string>& orphans() const noexcept { return orphans_; }

private:
    static std::string join(const std::vector<std::string>& o) {
        std::string out = "unaligned evaluation pairs:";
        for (const auto& x : o) out += " " + x;
        return out;
    }
    std::vector<std::string> orphans_;
};

class BackendUnavailable : public Error {
public:
    explicit BackendUnavailable(const std::string& what) : Error("BackendUnavailable", what) {}
};

class UnknownEvaluation : public Error {
public:
    explicit UnknownEvaluation(const std::string& id)
        : Error("UnknownEvaluation", "no evaluation with id " + id) {}
};

class AlreadyReviewed : public Error {
public:
    explicit AlreadyReviewed(const std::string& id)
        : Error("AlreadyReviewed", "evaluation " + id + " was already reviewed") {}
};

class InvariantViolation : public Error {
public:
    explicit InvariantViolation(const std::string& what) : Error("InvariantViolation", what) {}
};

class InvalidReview : public Error {
public:
    explicit InvalidReview(const std::string& what) : Error("InvalidReview", what) {}
};

class Busy : public Error {
public:
    explicit Busy(const std::string& what) : Error("Busy", what) {}
};

}  // namespace vulneval
