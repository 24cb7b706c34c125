#include "fpslab/error.hpp"

namespace fpslab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMeshTooCoarse: return "MeshTooCoarse";
    case ErrorCode::kDegenerateDomain: return "DegenerateDomain";
    case ErrorCode::kSolverFailure: return "SolverFailure";
    case ErrorCode::kVertexOutOfDomain: return "VertexOutOfDomain";
    case ErrorCode::kNotCalibrated: return "NotCalibrated";
    case ErrorCode::kOverlappingBoundarySets: return "OverlappingBoundarySets";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kEmptyComplement: return "EmptyComplement";
    case ErrorCode::kRadiusBelowResolution: return "RadiusBelowResolution";
    case ErrorCode::kVertexInSet: return "VertexInSet";
    case ErrorCode::kConfigViolation: return "ConfigViolation";
    case ErrorCode::kRingOutsideDomain: return "RingOutsideDomain";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kCalibrationFailure: return "CalibrationFailure";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace fpslab
