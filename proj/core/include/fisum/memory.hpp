#pragma once

#include <cstddef>
#include <new>
#include <vector>

namespace fisum {

namespace memory {

/// Bytes currently held by grid buffers (process-wide).
std::size_t live_bytes();
/// High-water mark of live_bytes() since the last reset_peak().
std::size_t peak_bytes();
/// Sets the high-water mark to the current live byte count.
void reset_peak();

void note_alloc(std::size_t bytes);
void note_free(std::size_t bytes);

}  // namespace memory

/// std::allocator that reports its traffic to the memory counters, so the
/// benchmark can measure the working set of a computation.
template <class T>
struct TrackedAllocator {
  using value_type = T;

  TrackedAllocator() = default;
  template <class U>
  TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    memory::note_alloc(n * sizeof(T));
    return std::allocator<T>{}.allocate(n);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    memory::note_free(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }

  template <class U>
  bool operator==(const TrackedAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, TrackedAllocator<double>>;

}  // namespace fisum
