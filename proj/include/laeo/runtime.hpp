#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace laeo {

// Training allocates and frees multi-megabyte im2col buffers per sample.
// Keeping them on the heap instead of fresh mmap pages avoids page-fault
// churn; a no-op outside glibc.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace laeo
