#ifndef RATETUNE_ERRORS_HPP
#define RATETUNE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ratetune {

/// A rate needs a denominator (positive or negative mass) that is zero.
class degenerate_denominator : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// No 0/1 batch assignment satisfies the requested goals.
class infeasible_constraints : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evidence assigns zero probability to every classifier configuration.
class inconsistent_evidence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class inference_timeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A marginal came out NaN or infinite.
class numerical_collapse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number of the offending row.
class parse_error : public std::runtime_error {
 public:
  parse_error(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ratetune

#endif  // RATETUNE_ERRORS_HPP
