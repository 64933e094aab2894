#pragma once

#include <stdexcept>
#include <string>

namespace sqlo1 {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration value outside its documented range.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Database file does not exist on disk.
class FileNotFoundError : public Error {
public:
    explicit FileNotFoundError(const std::string& path)
        : Error("file not found: " + path) {}
};

/// File exists but is not a SQLite database.
class NotADatabaseError : public Error {
public:
    explicit NotADatabaseError(const std::string& path)
        : Error("not a sqlite database: " + path) {}
};

/// Result comparison requested while one side is an execution error.
class ComparisonOnError : public Error {
public:
    ComparisonOnError() : Error("cannot compare results: one side failed to execute") {}
};

/// Oracle-mode scoring requested for a task that carries no gold query.
class MissingGoldError : public Error {
public:
    explicit MissingGoldError(const std::string& task_id)
        : Error("task has no gold query: " + task_id) {}
};

/// Tokenizer rejected the input (unterminated string or comment).
class TokenizeError : public Error {
public:
    TokenizeError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Policy produced zero candidate continuations for a state.
class EmptyBeamError : public Error {
public:
    explicit EmptyBeamError(const std::string& state_hint)
        : Error("policy returned no continuation for state: " + state_hint) {}
};

/// Policy backend unreachable after the configured retries.
class PolicyUnavailableError : public Error {
public:
    explicit PolicyUnavailableError(const std::string& what)
        : Error("policy backend unavailable: " + what) {}
};

/// A log-probability was NaN or infinite.
class NonFiniteLogprobError : public Error {
public:
    NonFiniteLogprobError() : Error("log-probability is not finite") {}
};

/// The policy cannot assign a likelihood to the requested sequence.
class UnscorableSequenceError : public Error {
public:
    explicit UnscorableSequenceError(const std::string& what)
        : Error("sequence cannot be scored: " + what) {}
};

/// Pruning asked to score an empty candidate set.
class EmptyCandidateSetError : public Error {
public:
    EmptyCandidateSetError() : Error("candidate set is empty") {}
};

/// A prediction references a task id absent from the task list.
class UnknownTaskIdError : public Error {
public:
    explicit UnknownTaskIdError(const std::string& id)
        : Error("unknown task id: " + id) {}
};

} // namespace sqlo1
