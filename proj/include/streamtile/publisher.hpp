#pragma once

#include <memory>
#include <mutex>

namespace streamtile {

// Single-writer snapshot hand-off. The writer publishes immutable copies;
// readers grab the latest shared pointer and keep using it for as long as
// they like. The lock guards only a pointer swap, so the learning thread is
// never blocked behind a slow reader.
template <class T>
class SnapshotPublisher {
 public:
  void publish(std::shared_ptr<const T> snap) {
    std::lock_guard<std::mutex> lock(mutex_);
    current_ = std::move(snap);
  }

  void publish(T value) {
    publish(std::make_shared<const T>(std::move(value)));
  }

  // Latest published snapshot; null until the first publish.
  std::shared_ptr<const T> load() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return current_;
  }

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const T> current_;
};

}  // namespace streamtile
