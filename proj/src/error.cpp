#include "cutstudio/error.hpp"

namespace cutstudio {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnknownType: return "UnknownType";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::UnknownPattern: return "UnknownPattern";
    case ErrorCode::EmptyTemplateCorpus: return "EmptyTemplateCorpus";
    case ErrorCode::EmptyIdea: return "EmptyIdea";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmbedderFault: return "EmbedderFault";
    case ErrorCode::UnknownGroundTruth: return "UnknownGroundTruth";
    case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DisconnectedMask: return "DisconnectedMask";
    case ErrorCode::TooFewExemplars: return "TooFewExemplars";
    case ErrorCode::PointOnOppositeClass: return "PointOnOppositeClass";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::OfflineMiss: return "OfflineMiss";
    case ErrorCode::SegmentationFailed: return "SegmentationFailed";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::CrossParentGroup: return "CrossParentGroup";
    case ErrorCode::NotAGroup: return "NotAGroup";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::NotACutout: return "NotACutout";
    case ErrorCode::UnsupportedFeature: return "UnsupportedFeature";
    case ErrorCode::CorruptSession: return "CorruptSession";
    case ErrorCode::StaleState: return "StaleState";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cutstudio
