#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace robayes {

// Worker cap for internal parallel loops. 0 restores the default (ROBAYES_THREADS or
// hardware concurrency). Results never depend on the value.
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Calls fn(i) for i in [0, n) on up to thread_count() workers; nested calls run serially.
// The first exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace robayes
