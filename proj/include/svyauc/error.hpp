#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace svyauc {

/// Broad failure class; the CLI maps each to a distinct exit code.
enum class ErrorKind { input, numerical, degenerate };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

// --- survey data ---

class MissingColumnError : public InputError {
public:
    explicit MissingColumnError(const std::string& column)
        : InputError("missing column '" + column + "'"), column_(column) {}
    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

class NonNumericValueError : public InputError {
public:
    NonNumericValueError(const std::string& column, std::size_t row)
        : InputError("non-numeric " + column + " at row " + std::to_string(row)), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class NonPositiveWeightError : public InputError {
public:
    explicit NonPositiveWeightError(std::size_t row)
        : InputError("non-positive weight at row " + std::to_string(row)), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class NonFiniteValueError : public InputError {
public:
    NonFiniteValueError(const std::string& column, std::size_t row)
        : InputError("non-finite " + column + " at row " + std::to_string(row)), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class InvalidOutcomeError : public InputError {
public:
    explicit InvalidOutcomeError(std::size_t row)
        : InputError("outcome outside {0,1} at row " + std::to_string(row)), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class RaggedRowError : public InputError {
public:
    RaggedRowError(std::size_t row, std::size_t expected, std::size_t got)
        : InputError("ragged row " + std::to_string(row) + ": expected " + std::to_string(expected) +
                     " fields, got " + std::to_string(got)),
          row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class SingletonPsuError : public InputError {
public:
    explicit SingletonPsuError(const std::string& strata)
        : InputError("strata with a single PSU: " + strata) {}
};

class DimensionMismatchError : public InputError {
public:
    explicit DimensionMismatchError(const std::string& what) : InputError("dimension mismatch: " + what) {}
};

class InvalidArgumentError : public InputError {
public:
    explicit InvalidArgumentError(const std::string& what) : InputError(what) {}
};

// --- model fitting ---

class RankDeficientError : public NumericalError {
public:
    explicit RankDeficientError(const std::string& what) : NumericalError("rank-deficient design: " + what) {}
};

class SeparationError : public NumericalError {
public:
    explicit SeparationError(std::size_t coefficient)
        : NumericalError("quasi-complete separation detected (coefficient " + std::to_string(coefficient) +
                         " diverged)") {}
};

// --- AUC / inference ---

class DegenerateAucError : public Error {
public:
    DegenerateAucError()
        : Error(ErrorKind::degenerate, "degenerate AUC: need a positive-weight case and control") {}
};

class DegenerateReplicatesError : public Error {
public:
    DegenerateReplicatesError(std::size_t degenerate, std::size_t total)
        : Error(ErrorKind::degenerate, "too many degenerate replicates: " + std::to_string(degenerate) + " of " +
                                           std::to_string(total)) {}
};

class MissingReplicateError : public NumericalError {
public:
    explicit MissingReplicateError(std::size_t replicate)
        : NumericalError("jackknife replicate " + std::to_string(replicate) + " has no AUC") {}
};

class InsufficientReplicatesError : public NumericalError {
public:
    explicit InsufficientReplicatesError(std::size_t usable)
        : NumericalError("need at least 2 usable replicates, got " + std::to_string(usable)) {}
};

class InfiniteStatisticError : public NumericalError {
public:
    InfiniteStatisticError() : NumericalError("zero variance with nonzero difference: test statistic is infinite") {}
};

class MethodMismatchError : public InputError {
public:
    explicit MethodMismatchError(const std::string& what) : InputError("method mismatch: " + what) {}
};

} // namespace svyauc
