#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qcreg {

enum class ErrorCode {
    parse_error,
    io_error,
    degenerate_face,
    non_manifold,
    index_out_of_range,
    duplicate_moving_vertex,
    mixed_row_formats,
    invalid_landmark,
    missing_vertex,
    non_finite_value,
    non_finite_input,
    non_positive_definite_a,
    singular_system,
    non_convergence,
    not_disk_topology,
    flipped_faces,
    non_finite_scale,
    mu_out_of_range,
    resolution_mismatch,
    empty_landmarks,
    invalid_argument,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a machine-readable code so that
// front ends can map it onto exit statuses without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace qcreg
