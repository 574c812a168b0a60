#include <cstdlib>
#include <new>

#include "hot/memory_stats.hpp"

namespace {

using namespace hot::memory::detail;

// Header large enough to keep max_align_t alignment of the payload.
constexpr std::size_t kHeader = alignof(std::max_align_t);

struct Hooked {
  Hooked() { hooked.store(true); }
} hooked_marker;

bool reserve(std::size_t n) {
  std::size_t lim = limit.load(std::memory_order_relaxed);
  std::size_t now = current.fetch_add(n, std::memory_order_relaxed) + n;
  if (lim != 0 && now > lim) {
    current.fetch_sub(n, std::memory_order_relaxed);
    return false;
  }
  std::size_t p = peak.load(std::memory_order_relaxed);
  while (now > p && !peak.compare_exchange_weak(p, now, std::memory_order_relaxed)) {
  }
  return true;
}

void* do_alloc(std::size_t n, std::size_t align) {
  if (n == 0) n = 1;
  std::size_t header = align > kHeader ? align : kHeader;
  if (!reserve(n)) return nullptr;
  void* raw = align > kHeader ? std::aligned_alloc(align, ((header + n + align - 1) / align) * align)
                              : std::malloc(header + n);
  if (!raw) {
    current.fetch_sub(n, std::memory_order_relaxed);
    return nullptr;
  }
  auto* base = static_cast<unsigned char*>(raw);
  *reinterpret_cast<std::size_t*>(base + header - sizeof(std::size_t)) = n;
  return base + header;
}

void do_free(void* p, std::size_t align) {
  if (!p) return;
  std::size_t header = align > kHeader ? align : kHeader;
  auto* user = static_cast<unsigned char*>(p);
  std::size_t n = *reinterpret_cast<std::size_t*>(user - sizeof(std::size_t));
  current.fetch_sub(n, std::memory_order_relaxed);
  std::free(user - header);
}

void* alloc_or_throw(std::size_t n, std::size_t align) {
  void* p = do_alloc(n, align);
  if (!p) throw std::bad_alloc();
  return p;
}

}  // namespace

void* operator new(std::size_t n) { return alloc_or_throw(n, 0); }
void* operator new[](std::size_t n) { return alloc_or_throw(n, 0); }
void* operator new(std::size_t n, const std::nothrow_t&) noexcept { return do_alloc(n, 0); }
void* operator new[](std::size_t n, const std::nothrow_t&) noexcept { return do_alloc(n, 0); }
void* operator new(std::size_t n, std::align_val_t a) { return alloc_or_throw(n, static_cast<std::size_t>(a)); }
void* operator new[](std::size_t n, std::align_val_t a) { return alloc_or_throw(n, static_cast<std::size_t>(a)); }
void* operator new(std::size_t n, std::align_val_t a, const std::nothrow_t&) noexcept {
  return do_alloc(n, static_cast<std::size_t>(a));
}
void* operator new[](std::size_t n, std::align_val_t a, const std::nothrow_t&) noexcept {
  return do_alloc(n, static_cast<std::size_t>(a));
}

void operator delete(void* p) noexcept { do_free(p, 0); }
void operator delete[](void* p) noexcept { do_free(p, 0); }
void operator delete(void* p, std::size_t) noexcept { do_free(p, 0); }
void operator delete[](void* p, std::size_t) noexcept { do_free(p, 0); }
void operator delete(void* p, const std::nothrow_t&) noexcept { do_free(p, 0); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { do_free(p, 0); }
void operator delete(void* p, std::align_val_t a) noexcept { do_free(p, static_cast<std::size_t>(a)); }
void operator delete[](void* p, std::align_val_t a) noexcept { do_free(p, static_cast<std::size_t>(a)); }
void operator delete(void* p, std::size_t, std::align_val_t a) noexcept { do_free(p, static_cast<std::size_t>(a)); }
void operator delete[](void* p, std::size_t, std::align_val_t a) noexcept { do_free(p, static_cast<std::size_t>(a)); }
void operator delete(void* p, std::align_val_t a, const std::nothrow_t&) noexcept {
  do_free(p, static_cast<std::size_t>(a));
}
void operator delete[](void* p, std::align_val_t a, const std::nothrow_t&) noexcept {
  do_free(p, static_cast<std::size_t>(a));
}
