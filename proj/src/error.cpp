#include "volmo/error.hpp"

namespace volmo {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::NotJats: return "NotJats";
    case ErrorCode::EmptyCaption: return "EmptyCaption";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::ProviderUnreachable: return "ProviderUnreachable";
    case ErrorCode::AllAttemptsRejected: return "AllAttemptsRejected";
    case ErrorCode::UnknownCondition: return "UnknownCondition";
    case ErrorCode::UnsupportedDisease: return "UnsupportedDisease";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::MissingImageRef: return "MissingImageRef";
    case ErrorCode::InvalidSplit: return "InvalidSplit";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::UnknownPolicy: return "UnknownPolicy";
    case ErrorCode::EmptyCandidate: return "EmptyCandidate";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::EmbeddingUnavailable: return "EmbeddingUnavailable";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::UnparseableDocument: return "UnparseableDocument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadInput: return "BadInput";
  }
  return "Unknown";
}

ExitClass exit_class(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ProviderUnreachable:
    case ErrorCode::AllAttemptsRejected:
    case ErrorCode::EmptyResponse:
    case ErrorCode::EmbeddingUnavailable:
      return ExitClass::ExternalService;
    default:
      return ExitClass::Input;
  }
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept {
  for (int c = 0; c <= static_cast<int>(ErrorCode::BadInput); ++c) {
    const auto code = static_cast<ErrorCode>(c);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

}  // namespace volmo
