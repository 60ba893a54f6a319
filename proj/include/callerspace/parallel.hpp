#pragma once

#include <cstddef>
#include <functional>

namespace callerspace {

/// Process-wide cap on worker threads. 0 means "not set": falls back to the
/// CALLERSPACE_THREADS environment variable, then to 1.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is processed exactly once by
/// one worker; callers write results into slot i so the outcome does not
/// depend on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace callerspace
