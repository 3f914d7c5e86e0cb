#pragma once
#include <stdexcept>
#include <string>

namespace relloc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define RELLOC_ERROR(Name) \
    struct Name : Error { using Error::Error; }

RELLOC_ERROR(DegenerateGeometry);
RELLOC_ERROR(NonUnitDirection);
RELLOC_ERROR(AntipodalDirections);
RELLOC_ERROR(InsufficientMpcs);
RELLOC_ERROR(NonpositiveDistanceHypothesis);
RELLOC_ERROR(SolverNoConverge);
RELLOC_ERROR(PermutationBudgetExceeded);
RELLOC_ERROR(RankDeficient);
RELLOC_ERROR(RejectionBudgetExceeded);
RELLOC_ERROR(ConfigInvalid);
RELLOC_ERROR(ParseError);
RELLOC_ERROR(ValidationError);
RELLOC_ERROR(SchemaError);
RELLOC_ERROR(CountMismatch);
RELLOC_ERROR(IoError);

#undef RELLOC_ERROR

} // namespace relloc
