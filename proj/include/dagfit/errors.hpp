#pragma once

#include <stdexcept>
#include <string>

namespace dagfit {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define DAGFIT_DEFINE_ERROR(NAME)                                    \
    struct NAME : Error {                                            \
        explicit NAME(const std::string& msg) : Error(msg) {}        \
    }

// graph-core
DAGFIT_DEFINE_ERROR(CycleError);
DAGFIT_DEFINE_ERROR(AlreadyBound);
DAGFIT_DEFINE_ERROR(TypeMismatch);
DAGFIT_DEFINE_ERROR(UnboundInput);
DAGFIT_DEFINE_ERROR(EvalError);
DAGFIT_DEFINE_ERROR(FrozenWhileTainted);

// parameters
DAGFIT_DEFINE_ERROR(DuplicateName);
DAGFIT_DEFINE_ERROR(BadBounds);
DAGFIT_DEFINE_ERROR(NegativeSigma);
DAGFIT_DEFINE_ERROR(OutOfBounds);
DAGFIT_DEFINE_ERROR(FixedParameter);
DAGFIT_DEFINE_ERROR(NotPSD);
DAGFIT_DEFINE_ERROR(UnknownMember);
DAGFIT_DEFINE_ERROR(UnknownName);

// transforms
DAGFIT_DEFINE_ERROR(BadEdges);
DAGFIT_DEFINE_ERROR(BadOrder);
DAGFIT_DEFINE_ERROR(BadKnots);
DAGFIT_DEFINE_ERROR(EdgesNotSubset);
DAGFIT_DEFINE_ERROR(NotPositiveDefinite);

// statistics
DAGFIT_DEFINE_ERROR(NonPositivePrediction);

// fitter
DAGFIT_DEFINE_ERROR(MaxEvaluations);
DAGFIT_DEFINE_ERROR(SingularHessian);

// expressions
DAGFIT_DEFINE_ERROR(LexError);
DAGFIT_DEFINE_ERROR(ParseError);
DAGFIT_DEFINE_ERROR(UnknownAxis);
DAGFIT_DEFINE_ERROR(UnboundIndex);

// bundles / config
DAGFIT_DEFINE_ERROR(UnknownBundleKind);
DAGFIT_DEFINE_ERROR(DuplicateKind);
DAGFIT_DEFINE_ERROR(ConfigError);

#undef DAGFIT_DEFINE_ERROR

} // namespace dagfit
