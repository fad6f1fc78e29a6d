#pragma once

#include <stdexcept>
#include <string>

namespace nfg {

// Thrown when an elementwise operation is evaluated outside its domain
// (log of a non-positive value, division by zero).
class DomainError : public std::runtime_error {
public:
    DomainError(std::string opcode, double offending)
        : std::runtime_error("domain error in '" + opcode +
                             "': offending value " + std::to_string(offending)),
          opcode_(std::move(opcode)),
          offending_(offending) {}

    const std::string& opcode() const { return opcode_; }
    double offending_value() const { return offending_; }

private:
    std::string opcode_;
    double offending_;
};

// API misuse: mismatched shapes, wrong variant, vars from a foreign tape.
class UsageError : public std::invalid_argument {
public:
    explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed persisted data (checkpoints, CSV files).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::size_t byte_offset() const { return offset_; }

private:
    std::size_t offset_;
};

// A CIF reached 1 within tolerance, so the sub-distribution hazard is undefined.
class SaturationError : public std::runtime_error {
public:
    explicit SaturationError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss or gradient during optimization, with location diagnostics.
class TrainingError : public std::runtime_error {
public:
    TrainingError(int epoch, int batch, double param_norm)
        : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch) +
                             ", parameter norm " + std::to_string(param_norm)),
          epoch_(epoch), batch_(batch), param_norm_(param_norm) {}

    int epoch() const { return epoch_; }
    int batch() const { return batch_; }
    double param_norm() const { return param_norm_; }

private:
    int epoch_;
    int batch_;
    double param_norm_;
};

}  // namespace nfg
