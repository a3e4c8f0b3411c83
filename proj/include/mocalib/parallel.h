#pragma once

#include <cstddef>
#include <functional>

namespace mocalib {

// Worker cap from RPGD_THREADS (unset or 0 = hardware concurrency).
int worker_count();

// Runs task(i) for i in [0, n_tasks) on up to worker_count() threads. Tasks
// must write only to their own slot; the first exception is rethrown here.
// Results must not depend on which thread ran which task.
void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& task);

}  // namespace mocalib
