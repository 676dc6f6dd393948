#pragma once

#include <stdexcept>
#include <string>

namespace js3c {

// Violated precondition or structural invariant (caller bug or inconsistent
// inputs). CLI maps these to the data-error exit code when they originate
// from user-supplied data.
class contract_error : public std::runtime_error {
 public:
  explicit contract_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed bytes or text in an external file format.
class format_error : public std::runtime_error {
 public:
  explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failure (missing file, short write, ...).
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where finite ones are required (diverged optimization).
// Subclasses contract_error so generic handlers still catch it; the CLI maps
// it to its own exit code.
class numerical_error : public contract_error {
 public:
  explicit numerical_error(const std::string& what) : contract_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw contract_error(what);
}

}  // namespace js3c
