#include "qcreg/error.hpp"

namespace qcreg {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::parse_error: return "ParseError";
        case ErrorCode::io_error: return "IoError";
        case ErrorCode::degenerate_face: return "DegenerateFace";
        case ErrorCode::non_manifold: return "NonManifold";
        case ErrorCode::index_out_of_range: return "IndexOutOfRange";
        case ErrorCode::duplicate_moving_vertex: return "DuplicateMovingVertex";
        case ErrorCode::mixed_row_formats: return "MixedRowFormats";
        case ErrorCode::invalid_landmark: return "InvalidLandmark";
        case ErrorCode::missing_vertex: return "MissingVertex";
        case ErrorCode::non_finite_value: return "NonFiniteValue";
        case ErrorCode::non_finite_input: return "NonFiniteInput";
        case ErrorCode::non_positive_definite_a: return "NonPositiveDefiniteA";
        case ErrorCode::singular_system: return "SingularSystem";
        case ErrorCode::non_convergence: return "NonConvergence";
        case ErrorCode::not_disk_topology: return "NotDiskTopology";
        case ErrorCode::flipped_faces: return "FlippedFaces";
        case ErrorCode::non_finite_scale: return "NonFiniteScale";
        case ErrorCode::mu_out_of_range: return "MuOutOfRange";
        case ErrorCode::resolution_mismatch: return "ResolutionMismatch";
        case ErrorCode::empty_landmarks: return "EmptyLandmarks";
        case ErrorCode::invalid_argument: return "InvalidArgument";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void raise(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace qcreg
