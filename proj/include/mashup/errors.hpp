#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mashup {

// Two parameter sets (or records) do not share the same layout/metadata.
class CompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A container file is malformed. Carries the byte offset of the problem
// when it is known (npos otherwise).
class FormatError : public std::runtime_error {
 public:
  static constexpr std::uint64_t npos = ~std::uint64_t{0};

  explicit FormatError(const std::string& what, std::uint64_t offset = npos)
      : std::runtime_error(offset == npos ? what
                                          : what + " (offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// Training produced a non-finite loss. Carries the optimizer step index.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int step)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}

  int step() const { return step_; }

 private:
  int step_;
};

// A linear solve or decomposition failed beyond recovery.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An enumeration guard (e.g. oracle combination count) was exceeded.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A benchmark precondition (missing source checkpoint, empty library) failed.
class SetupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mashup
