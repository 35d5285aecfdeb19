#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "msl/decode.hpp"

namespace msl {

/// Debounce rule: a caption opens once a class is present in `hits` of the
/// last `window` frames and closes when that count drops below hits / 2.
struct CaptionConfig
{
  int window = 15;
  int hits = 10;
  /// Detections below this score do not count as presence.
  double min_score = 0.0;

  void validate() const;
};

/// One debounced sign occurrence.
struct CaptionEvent
{
  int class_id = 0;
  std::string label;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  double mean_score = 0.0;

  friend bool operator==(const CaptionEvent&, const CaptionEvent&) = default;
};

/// Sliding-window caption state. Feed frames in order with step(); events
/// are emitted when a caption closes, and flush() closes whatever is open.
///
/// An event spans the first present frame of the window that opened it
/// (never earlier than the previous event of that class) to the last present
/// frame before it closed. mean_score averages the per-frame best score of
/// the class over the present frames of that span.
class CaptionTracker
{
public:
  explicit CaptionTracker(CaptionConfig config = {}, std::vector<std::string> names = {});

  std::vector<CaptionEvent> step(std::int64_t frame_index, std::span<const Detection> dets);
  std::vector<CaptionEvent> flush();

  /// Classes with a caption currently open.
  std::vector<int> open_classes() const;

private:
  struct FrameSlot
  {
    std::int64_t frame = 0;
    std::map<int, double> best;  // class -> best score this frame
  };
  struct Open
  {
    std::int64_t start = 0;
    std::int64_t last_present = 0;
    double score_sum = 0.0;
    int present_frames = 0;
  };

  CaptionEvent close(int class_id, const Open& open) const;

  CaptionConfig config_;
  std::vector<std::string> names_;
  std::deque<FrameSlot> window_;
  std::map<int, Open> open_;
  std::map<int, std::int64_t> last_end_;
};

}  // namespace msl
