#pragma once

#include <omp.h>

#include <vector>

namespace invrec {

inline int max_threads() { return omp_get_max_threads(); }
inline int thread_id() { return omp_get_thread_num(); }

/// One scratch object per OpenMP thread, indexed by thread_id().
template <class T>
class PerThread {
public:
    PerThread() : slots_(static_cast<std::size_t>(max_threads())) {}
    T& local() { return slots_[static_cast<std::size_t>(thread_id())]; }

private:
    std::vector<T> slots_;
};

}  // namespace invrec
