#pragma once

#include <stdexcept>
#include <string>

namespace gbt {

// Base for every failure the library reports deliberately. `kind()` is a
// stable machine-readable tag; what() carries the human-readable detail.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define GBT_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
  public:                                                        \
    explicit Name(const std::string& msg) : Error(#Name, msg) {} \
  }

GBT_DEFINE_ERROR(ShapeMismatch);
GBT_DEFINE_ERROR(HeadDivisibility);
GBT_DEFINE_ERROR(RowFullyMasked);
GBT_DEFINE_ERROR(InvalidGateConfig);
GBT_DEFINE_ERROR(InvalidTieConfig);
GBT_DEFINE_ERROR(IdOutOfRange);
GBT_DEFINE_ERROR(InvalidBox);
GBT_DEFINE_ERROR(EmptyRegions);
GBT_DEFINE_ERROR(InvalidDistribution);
GBT_DEFINE_ERROR(NonScalarLoss);
GBT_DEFINE_ERROR(ParseError);
GBT_DEFINE_ERROR(UnknownPreset);
GBT_DEFINE_ERROR(UnknownTensor);
GBT_DEFINE_ERROR(TooLargeForExact);
GBT_DEFINE_ERROR(CorruptManifest);
GBT_DEFINE_ERROR(IoError);
GBT_DEFINE_ERROR(DivergedLoss);
GBT_DEFINE_ERROR(BadArgument);

#undef GBT_DEFINE_ERROR

}  // namespace gbt
