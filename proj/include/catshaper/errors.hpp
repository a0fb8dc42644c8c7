#pragma once

#include <stdexcept>
#include <string>

namespace catshaper {

/// Raised when a truncated Fock expansion cannot hold the requested state to
/// the requested tail tolerance. Callers may retry with a larger n_max.
class truncation_error : public std::runtime_error {
public:
    explicit truncation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a formula is evaluated outside its stated validity domain
/// (the computation is refused rather than silently wrong).
class validity_error : public std::domain_error {
public:
    explicit validity_error(const std::string& what) : std::domain_error(what) {}
};

/// Raised when a conditional quantity is requested for an outcome of
/// probability zero (0/0 has no meaningful value).
class impossible_outcome_error : public std::runtime_error {
public:
    explicit impossible_outcome_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by bracketing searches that cannot establish a bracket.
class bracketing_error : public std::runtime_error {
public:
    explicit bracketing_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace catshaper
