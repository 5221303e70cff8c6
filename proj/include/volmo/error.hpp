#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace volmo {

/// Every failure the toolkit reports carries one of these codes. The CLI maps
/// each code onto an exit-code class (see `exit_class`).
enum class ErrorCode {
  // jats_corpus
  MalformedXml,
  NotJats,
  // caption_revision
  EmptyCaption,
  EmptyResponse,
  ProviderUnreachable,
  AllAttemptsRejected,
  // instruction_schema
  UnknownCondition,
  UnsupportedDisease,
  LabelOutOfRange,
  MissingImageRef,
  InvalidSplit,
  // case_dialogue
  InvalidProfile,
  // metrics_text
  UnknownPolicy,
  EmptyCandidate,
  EmptySequence,
  DimMismatch,
  EmptyMatrix,
  ZeroVector,
  NotNormalized,
  MissingEmbedding,
  EmbeddingUnavailable,
  // metrics_classification / stats
  LengthMismatch,
  EmptyInput,
  InvalidArgument,
  InsufficientPairs,
  ConfigMismatch,
  // train_manifest
  UnparseableDocument,
  // generic I/O
  Io,
  BadInput,
};

enum class ExitClass { Input = 2, ExternalService = 3 };

std::string_view to_string(ErrorCode code) noexcept;
ExitClass exit_class(ErrorCode code) noexcept;
/// Inverse of to_string.
std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace volmo
