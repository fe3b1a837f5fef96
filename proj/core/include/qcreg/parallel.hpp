#pragma once

#include <cstddef>
#include <functional>

namespace qcreg {

// Upper bound on worker threads used by per-face and per-pixel maps.
// Defaults to 1; front ends raise it (the CLI reads QCREG_THREADS).
void set_max_threads(unsigned count);
[[nodiscard]] unsigned max_threads() noexcept;

// Runs body(begin, end) over contiguous chunks of [0, n). Each index is
// visited exactly once; results are deterministic as long as body only
// writes to slots it owns.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace qcreg
