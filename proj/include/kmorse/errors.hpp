#pragma once

#include <stdexcept>
#include <string>

namespace kmorse {

// Invalid user input: out-of-range elements, malformed files, bad flags.
struct domain_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// An internal consistency check failed.  These guard the combinatorial
// constructions: a structural_error means a claimed partition, bijection or
// perfect matching did not hold on the actual data.
struct structural_error : std::logic_error {
    using std::logic_error::logic_error;
};

// A matching violates the matching axioms themselves (pair is not a cover,
// or a face occurs in two pairs).  Distinct from "matching is not acyclic",
// which is a regular verification outcome, not an error.
struct malformed_matching_error : structural_error {
    using structural_error::structural_error;
};

// Work refused because it would exceed a configured size cap.
struct resource_error : std::runtime_error {
    resource_error(const std::string& what, std::size_t estimate_)
        : std::runtime_error(what), estimate(estimate_) {}
    std::size_t estimate;
};

} // namespace kmorse
