#pragma once

#include <ctime>

namespace permsel {

/// CPU time consumed by the calling thread, in seconds.
inline double thread_cpu_seconds() {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

class CpuStopwatch {
public:
    CpuStopwatch() : start_(thread_cpu_seconds()) {}
    double elapsed() const { return thread_cpu_seconds() - start_; }

private:
    double start_;
};

}  // namespace permsel
