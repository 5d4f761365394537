#pragma once

namespace qbsde {

/// Serial runs the reference loop; Parallel distributes independent work
/// items over OpenMP threads. Both produce bit-identical results.
enum class ExecPolicy { Serial, Parallel };

/// Sets the OpenMP worker count (no-op without OpenMP).
void set_thread_count(int threads);
int thread_count();

} // namespace qbsde
