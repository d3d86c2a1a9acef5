#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridcf {

// Root of every error raised by the library. The CLI and the gateway map
// concrete subclasses to exit codes / HTTP statuses.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// caseio
class SyntaxError : public Error { public: using Error::Error; };
class SemanticError : public Error { public: using Error::Error; };
class IndexError : public Error { public: using Error::Error; };

// shared
class DimensionError : public Error { public: using Error::Error; };

// lpcore
class IterationLimit : public Error { public: using Error::Error; };

// dcopf
class InfeasibleInput : public Error { public: using Error::Error; };
class StructurallyInfeasible : public Error { public: using Error::Error; };

// datagen
class QuotaTimeout : public Error { public: using Error::Error; };
class TooSmall : public Error { public: using Error::Error; };

// learn
class DegenerateData : public Error { public: using Error::Error; };

// cfx / pipeline
class InputAlreadyFeasible : public Error { public: using Error::Error; };
class EmptyInput : public Error { public: using Error::Error; };

class RecoveryFailed : public Error {
public:
    RecoveryFailed(const std::string& what, std::size_t retries_used)
        : Error(what), retries_used_(retries_used) {}
    std::size_t retries_used() const noexcept { return retries_used_; }

private:
    std::size_t retries_used_;
};

// Wraps an error escaping one stage of run_experiment.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace gridcf
