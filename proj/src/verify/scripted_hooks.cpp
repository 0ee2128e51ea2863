#include "mvtree/verify/scripted_hooks.hpp"

#include <sstream>

namespace mvtree::verify {

namespace {
thread_local int tls_thread_tag = -1;
}  // namespace

const char* hook_point_name(HookPoint point) {
  switch (point) {
    case HookPoint::kUpdateVersionRead: return "update-version-read";
    case HookPoint::kUpdateVersionCas: return "update-version-cas";
    case HookPoint::kHelpCas: return "help-cas";
    case HookPoint::kScanPublished: return "scan-published";
    case HookPoint::kScanVersionAssigned: return "scan-version-assigned";
    case HookPoint::kCompactionMinVersion: return "compaction-min-version";
    case HookPoint::kCompactionRemove: return "compaction-remove";
    case HookPoint::kUpdateInstalled: return "update-installed";
  }
  return "?";
}

void ScriptedHooks::set_thread_tag(int tag) noexcept { tls_thread_tag = tag; }

void ScriptedHooks::at(HookPoint point, const HookEvent& event) {
  std::unique_lock lock{state_->mutex};
  auto& s = *state_;
  const Record record{point, event, tls_thread_tag, s.log.size()};
  s.log.push_back(record);
  if (!s.armed || s.armed_point != point) return;
  if (s.armed_key && *s.armed_key != event.key) return;
  s.armed = false;
  s.parked = record;
  s.released = false;
  s.changed.notify_all();
  s.changed.wait(lock, [&] { return s.released; });
  s.parked.reset();
  s.released = false;
}

void ScriptedHooks::arm(HookPoint point, std::optional<Key> key) {
  std::lock_guard lock{state_->mutex};
  state_->armed = true;
  state_->armed_point = point;
  state_->armed_key = key;
}

bool ScriptedHooks::wait_until_parked(std::chrono::milliseconds timeout) {
  std::unique_lock lock{state_->mutex};
  return state_->changed.wait_for(lock, timeout,
                                  [&] { return state_->parked.has_value(); });
}

std::optional<ScriptedHooks::Record> ScriptedHooks::parked_event() const {
  std::lock_guard lock{state_->mutex};
  return state_->parked;
}

void ScriptedHooks::release() {
  std::lock_guard lock{state_->mutex};
  if (!state_->parked) return;
  state_->released = true;
  state_->changed.notify_all();
}

std::vector<ScriptedHooks::Record> ScriptedHooks::events() const {
  std::lock_guard lock{state_->mutex};
  return state_->log;
}

void ScriptedHooks::clear_events() {
  std::lock_guard lock{state_->mutex};
  state_->log.clear();
}

std::string ScriptedHooks::trace() const {
  std::ostringstream out;
  for (const auto& r : events()) {
    out << r.sequence << " T" << r.thread << ' ' << hook_point_name(r.point)
        << " key=" << r.event.key << " version=" << r.event.version
        << " flag=" << r.event.flag << '\n';
  }
  return out.str();
}

}  // namespace mvtree::verify
