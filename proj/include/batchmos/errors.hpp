#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace batchmos {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A tensor or table axis has the wrong extent.
class DimensionError : public Error {
public:
    DimensionError(std::string op, std::string axis, std::size_t got, std::size_t expected)
        : Error(op + ": dimension mismatch on " + axis + " axis (got " + std::to_string(got) + ", expected " +
                std::to_string(expected) + ")"),
          axis_(std::move(axis)) {}
    explicit DimensionError(const std::string& msg) : Error(msg) {}

    const std::string& axis() const noexcept { return axis_; }

private:
    std::string axis_;
};

/// A value lies outside the domain an operation accepts (e.g. a negative probability).
class DomainError : public Error {
public:
    using Error::Error;
};

/// An invalid model or training configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Wrong magic bytes or unsupported format version.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A binary file is truncated or internally inconsistent.
class CorruptionError : public Error {
public:
    CorruptionError(const std::string& what, std::uint64_t offset)
        : Error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// A malformed row in a label file.
class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::size_t row)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// Labels and embeddings disagree (e.g. a labeled clip has no vector).
class DataConsistencyError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(int epoch, std::size_t batch)
        : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch)),
          epoch_(epoch), batch_(batch) {}

    int epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

private:
    int epoch_;
    std::size_t batch_;
};

/// File could not be opened, read, or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace batchmos
