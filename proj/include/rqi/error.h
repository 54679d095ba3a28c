#pragma once

#include <stdexcept>
#include <string>

namespace rqi {

// Base of every domain error raised by the toolkit. The CLI maps these to
// exit code 1; anything else escaping a subcommand is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RQI_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

RQI_DEFINE_ERROR(IoError);
RQI_DEFINE_ERROR(FormatError);
RQI_DEFINE_ERROR(DimensionError);
RQI_DEFINE_ERROR(DegenerateInput);
RQI_DEFINE_ERROR(InsufficientData);
RQI_DEFINE_ERROR(EmptyInput);
RQI_DEFINE_ERROR(ShapeError);
RQI_DEFINE_ERROR(DivergenceError);
RQI_DEFINE_ERROR(ProtocolError);
RQI_DEFINE_ERROR(SchemaError);
RQI_DEFINE_ERROR(ValidationError);
RQI_DEFINE_ERROR(ConflictError);
RQI_DEFINE_ERROR(UnknownStudy);
RQI_DEFINE_ERROR(UnknownRecord);
RQI_DEFINE_ERROR(StaleRecord);

#undef RQI_DEFINE_ERROR

}  // namespace rqi
