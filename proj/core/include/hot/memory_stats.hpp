#pragma once

#include <atomic>
#include <cstddef>

namespace hot::memory {

// Counters are only fed when hot::alloc_hook is linked into the executable.
bool instrumented();
std::size_t current_bytes();
std::size_t peak_bytes();
void reset_peak();
// Allocations that would push current usage past the cap throw std::bad_alloc; 0 disables.
void set_cap(std::size_t bytes);
std::size_t cap();

namespace detail {
extern std::atomic<bool> hooked;
extern std::atomic<std::size_t> current;
extern std::atomic<std::size_t> peak;
extern std::atomic<std::size_t> limit;
}  // namespace detail

// Restores the previous cap on scope exit.
class ScopedCap {
 public:
  explicit ScopedCap(std::size_t bytes) : prev_(cap()) { set_cap(bytes); }
  ~ScopedCap() { set_cap(prev_); }
  ScopedCap(const ScopedCap&) = delete;
  ScopedCap& operator=(const ScopedCap&) = delete;

 private:
  std::size_t prev_;
};

}  // namespace hot::memory
