#include "hot/memory_stats.hpp"

namespace hot::memory {

namespace detail {
std::atomic<bool> hooked{false};
std::atomic<std::size_t> current{0};
std::atomic<std::size_t> peak{0};
std::atomic<std::size_t> limit{0};
}  // namespace detail

bool instrumented() { return detail::hooked.load(); }
std::size_t current_bytes() { return detail::current.load(); }
std::size_t peak_bytes() { return detail::peak.load(); }
void reset_peak() { detail::peak.store(detail::current.load()); }
void set_cap(std::size_t bytes) { detail::limit.store(bytes); }
std::size_t cap() { return detail::limit.load(); }

}  // namespace hot::memory
