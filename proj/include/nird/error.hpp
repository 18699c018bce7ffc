#pragma once

#include <stdexcept>
#include <string>

namespace nird {

/// Failure raised by a numerical stage of the pipeline.  The stage tag names
/// where the failure happened ("preprocess", "subproblem[3]", "solver", ...)
/// and is propagated unchanged to the CLI exit message.
class NirdError : public std::runtime_error {
 public:
  NirdError(std::string stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace nird
