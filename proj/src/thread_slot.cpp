#include "mvtree/thread_slot.hpp"

#include <bitset>
#include <mutex>
#include <stdexcept>

namespace mvtree {

namespace {

class SlotRegistry {
 public:
  std::size_t claim() {
    std::lock_guard lock{mutex_};
    for (std::size_t i = 0; i < kMaxThreadSlots; ++i) {
      if (!used_[i]) {
        used_[i] = true;
        return i;
      }
    }
    throw std::length_error{"mvtree: all thread slots are in use"};
  }

  void release(std::size_t slot) {
    std::lock_guard lock{mutex_};
    used_[slot] = false;
  }

  std::size_t count() {
    std::lock_guard lock{mutex_};
    return used_.count();
  }

  static SlotRegistry& instance() {
    static SlotRegistry registry;
    return registry;
  }

 private:
  std::mutex mutex_;
  std::bitset<kMaxThreadSlots> used_;
};

struct SlotHolder {
  SlotHolder() : slot{SlotRegistry::instance().claim()} {}
  ~SlotHolder() { SlotRegistry::instance().release(slot); }
  SlotHolder(const SlotHolder&) = delete;
  SlotHolder& operator=(const SlotHolder&) = delete;

  std::size_t slot;
};

}  // namespace

std::size_t this_thread_slot() {
  static thread_local SlotHolder holder;
  return holder.slot;
}

std::size_t registered_thread_count() {
  return SlotRegistry::instance().count();
}

}  // namespace mvtree
