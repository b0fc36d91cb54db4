#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repsel {

enum class ErrorCode {
  EmptySource,
  HeaderMissing,
  RowOverflow,
  MalformedCsv,
  DuplicateColumn,
  NoNumericColumns,
  NoUsableTimestamps,
  EmptySeries,
  EmptySequence,
  BandTooNarrow,
  KOutOfRange,
  EmptyMatrix,
  EmptyRepresentativeSet,
  MatrixMissing,
  InvalidParams,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so the
// CLI and HTTP layers can map it to an exit status or a response code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace repsel
