#pragma once

namespace reconnet {

// Number of OpenMP workers used by the data-parallel loops.
int max_threads();

// Caps the worker count; values < 1 are treated as 1.
void set_threads(int threads);

// Restores the previous worker count on scope exit.
class ScopedThreads {
 public:
  explicit ScopedThreads(int threads);
  ~ScopedThreads();
  ScopedThreads(const ScopedThreads&) = delete;
  ScopedThreads& operator=(const ScopedThreads&) = delete;

 private:
  int previous_;
};

}  // namespace reconnet
