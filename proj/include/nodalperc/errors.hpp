#ifndef NODALPERC_ERRORS_HPP
#define NODALPERC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nodalperc {

/// Malformed input or configuration (bad table, bad config key, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain where an operation is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Operation requires metadata the object does not carry.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Covariance matrix not positive definite beyond the allowed jitter.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Circulant embedding produced too much negative spectral mass.
class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested work exceeds a configured memory or enumeration budget.
class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Field sample does not line up with the lattice patch it colors.
class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation contract (e.g. non-increasing event given to FKG).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace nodalperc

#endif  // NODALPERC_ERRORS_HPP
