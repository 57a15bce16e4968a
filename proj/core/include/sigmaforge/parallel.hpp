#pragma once

#include <cstddef>
#include <functional>

namespace sigmaforge {

/// Upper bound on worker threads for every parallel section. Results never
/// depend on this value: work is split into index-addressed tasks whose
/// outputs are written to fixed slots.
void set_max_jobs(std::size_t jobs);
std::size_t max_jobs();

/// Runs task(i) for i in [0, n). Exceptions from tasks are rethrown on the
/// calling thread (the first one by index).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace sigmaforge
