#pragma once

#include <cstddef>
#include <functional>

namespace panerf {

/// Process-wide worker count used by parallel_for. Defaults to 1.
void set_num_threads(int threads);
int num_threads();

/// Runs body(task) for task in [0, task_count). Tasks are distributed over
/// num_threads() workers; callers reduce per-task results in task order, so
/// results never depend on the worker count.
void parallel_for(std::size_t task_count, const std::function<void(std::size_t)>& body);

/// Keeps freed heap memory in the process (glibc only; a no-op elsewhere).
/// Training reallocates the same large buffers every iteration, and handing
/// them back to the kernel each time costs more than the arithmetic.
void retain_freed_memory();

}  // namespace panerf
