#include "msl/caption.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace msl {

void CaptionConfig::validate() const
{
  if (hits < 1 || window < hits) {
    throw std::invalid_argument("caption window must satisfy window >= hits >= 1");
  }
}

CaptionTracker::CaptionTracker(CaptionConfig config, std::vector<std::string> names)
    : config_(config), names_(std::move(names))
{
  config_.validate();
}

CaptionEvent CaptionTracker::close(int class_id, const Open& open) const
{
  CaptionEvent e;
  e.class_id = class_id;
  e.label = class_id >= 0 && static_cast<std::size_t>(class_id) < names_.size()
                ? names_[class_id]
                : std::to_string(class_id);
  e.start_frame = open.start;
  e.end_frame = open.last_present;
  e.mean_score = open.present_frames > 0 ? open.score_sum / open.present_frames : 0.0;
  return e;
}

std::vector<CaptionEvent> CaptionTracker::step(std::int64_t frame_index,
                                               std::span<const Detection> dets)
{
  FrameSlot slot{frame_index, {}};
  for (const auto& d : dets) {
    if (d.score < config_.min_score) {
      continue;
    }
    auto [it, inserted] = slot.best.emplace(d.class_id, d.score);
    if (!inserted) {
      it->second = std::max(it->second, d.score);
    }
  }
  window_.push_back(std::move(slot));
  if (window_.size() > static_cast<std::size_t>(config_.window)) {
    window_.pop_front();
  }
  const FrameSlot& current = window_.back();

  std::set<int> classes;
  for (const auto& s : window_) {
    for (const auto& [c, score] : s.best) {
      classes.insert(c);
    }
  }
  for (const auto& [c, open] : open_) {
    classes.insert(c);
  }

  std::vector<CaptionEvent> events;
  for (int c : classes) {
    int count = 0;
    for (const auto& s : window_) {
      count += static_cast<int>(s.best.count(c));
    }
    auto it = open_.find(c);
    if (it == open_.end()) {
      if (count < config_.hits) {
        continue;
      }
      const auto prev = last_end_.find(c);
      Open open;
      bool first = true;
      for (const auto& s : window_) {
        const auto hit = s.best.find(c);
        if (hit == s.best.end() || (prev != last_end_.end() && s.frame <= prev->second)) {
          continue;
        }
        if (first) {
          open.start = s.frame;
          first = false;
        }
        open.last_present = s.frame;
        open.score_sum += hit->second;
        ++open.present_frames;
      }
      open_.emplace(c, open);
      continue;
    }

    Open& open = it->second;
    if (const auto hit = current.best.find(c); hit != current.best.end()) {
      open.last_present = current.frame;
      open.score_sum += hit->second;
      ++open.present_frames;
    }
    if (2 * count < config_.hits) {
      events.push_back(close(c, open));
      last_end_[c] = open.last_present;
      open_.erase(it);
    }
  }
  return events;
}

std::vector<CaptionEvent> CaptionTracker::flush()
{
  std::vector<CaptionEvent> events;
  for (const auto& [c, open] : open_) {
    events.push_back(close(c, open));
    last_end_[c] = open.last_present;
  }
  open_.clear();
  return events;
}

std::vector<int> CaptionTracker::open_classes() const
{
  std::vector<int> out;
  for (const auto& [c, open] : open_) {
    out.push_back(c);
  }
  return out;
}

}  // namespace msl
