#pragma once

#include <stdexcept>
#include <string>

namespace acx {

// Every failure carries a short kind tag; the CLI maps tags to exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define ACX_ERROR(Name)                                                   \
  struct Name : Error {                                                   \
    explicit Name(const std::string& w = "") : Error(#Name, w) {}         \
  };

ACX_ERROR(NotAlmostComplex)
ACX_ERROR(DegenerateEigenspace)
ACX_ERROR(MixedDegree)
ACX_ERROR(MixedBidegree)
ACX_ERROR(DimensionMismatch)
ACX_ERROR(NegativeWeight)
ACX_ERROR(WrongBidegree)
ACX_ERROR(DomainViolation)
ACX_ERROR(DifferentiationFailure)
ACX_ERROR(NonConvergence)
ACX_ERROR(BidegreeMismatch)
ACX_ERROR(ExtrapolationUnstable)
ACX_ERROR(UnsupportedCurrent)
ACX_ERROR(IntegrandBlowup)
ACX_ERROR(MonotoneFitFailure)
ACX_ERROR(ValidationRequired)
ACX_ERROR(ConfigError)

#undef ACX_ERROR

}  // namespace acx
