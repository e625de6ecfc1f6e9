#include "bes/error.hpp"

namespace bes {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NegativePotential: return "NegativePotential";
    case ErrorCode::ZeroPotential: return "ZeroPotential";
    case ErrorCode::IsolatedNodeUnderMu: return "IsolatedNodeUnderMu";
    case ErrorCode::UnstableStep: return "UnstableStep";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::ZeroSignal: return "ZeroSignal";
    case ErrorCode::BadN: return "BadN";
    case ErrorCode::NonPositiveLambdaMax: return "NonPositiveLambdaMax";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::DetachedLoss: return "DetachedLoss";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::BadSize: return "BadSize";
    case ErrorCode::DisconnectedAfterRetries: return "DisconnectedAfterRetries";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::DatasetMissing: return "DatasetMissing";
    case ErrorCode::NaNLoss: return "NaNLoss";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace bes
