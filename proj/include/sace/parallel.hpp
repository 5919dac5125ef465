#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace sace {

/// Replicate loops run either on the calling thread (the serial reference)
/// or across OpenMP threads. Callers write results into per-index slots and
/// reduce afterwards in index order, so both paths give bit-identical output.
enum class Execution { serial, parallel };

int max_threads();
/// Sets the OpenMP thread count for subsequent parallel loops (n >= 1).
void set_max_threads(int n);

template <class Fn>
void for_each_index(std::size_t count, Execution exec, Fn&& fn) {
    std::vector<std::exception_ptr> errors(count);
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < static_cast<long long>(count); ++i) {
            try {
                fn(static_cast<std::size_t>(i));
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace sace
