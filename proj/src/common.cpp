#include "sdan/common.hpp"

#include <cstdlib>
#include <thread>

extern "C" void openblas_set_num_threads(int);

namespace sdan {

namespace {
std::atomic<bool> g_checked{false};
std::atomic<bool> g_deterministic{false};
std::atomic<int> g_threads{0};

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}
}  // namespace

void set_checked_mode(bool on) { g_checked = on; }
bool checked_mode() { return g_checked; }

void set_deterministic(bool on) { g_deterministic = on; }
bool deterministic() { return g_deterministic; }

int thread_count() {
    int t = g_threads.load();
    if (t > 0) return t;
    int n = 0;
    if (const char* env = std::getenv("SDAN_THREADS")) n = std::atoi(env);
    t = resolve_threads(n);
    g_threads = t;
    openblas_set_num_threads(t);
    return t;
}

void set_thread_count(int n) {
    int t = resolve_threads(n);
    g_threads = t;
    openblas_set_num_threads(t);
}

}  // namespace sdan
