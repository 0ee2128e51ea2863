#pragma once

/// \file
/// Hook policy that logs every event and can park one thread at a chosen
/// point until the controlling thread releases it.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mvtree/hooks.hpp"

namespace mvtree::verify {

const char* hook_point_name(HookPoint point);

class ScriptedHooks {
 public:
  struct Record {
    HookPoint point;
    HookEvent event;
    /// Tag of the thread that hit the point (see set_thread_tag).
    int thread;
    /// Position in the log.
    std::uint64_t sequence;
  };

  /// Copies share one log and one parking state.
  ScriptedHooks() : state_{std::make_shared<State>()} {}

  /// Tags events fired by the calling thread; -1 until set.
  static void set_thread_tag(int tag) noexcept;

  void at(HookPoint point, const HookEvent& event);

  /// The next thread to reach `point` (with `key`, if given) parks there
  /// until release(). One-shot.
  void arm(HookPoint point, std::optional<Key> key = std::nullopt);
  /// Waits until the armed point parked a thread. False on timeout.
  bool wait_until_parked(std::chrono::milliseconds timeout = std::chrono::seconds{30});
  /// The event the parked thread is stopped at.
  [[nodiscard]] std::optional<Record> parked_event() const;
  void release();

  [[nodiscard]] std::vector<Record> events() const;
  void clear_events();
  /// Human-readable log, one event per line.
  [[nodiscard]] std::string trace() const;

 private:
  struct State {
    mutable std::mutex mutex;
    std::condition_variable changed;
    std::vector<Record> log;
    bool armed = false;
    HookPoint armed_point{};
    std::optional<Key> armed_key;
    std::optional<Record> parked;
    bool released = false;
  };
  std::shared_ptr<State> state_;
};

}  // namespace mvtree::verify
