#pragma once

// On-disk replay fixtures: a frame directory plus one recorded head output
// per frame, with the planted detections each frame should yield.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "msl/decode.hpp"

namespace msl::testing {

struct StreamFixture
{
  std::filesystem::path frames;   // frame_000000.png ...
  std::filesystem::path tensors;  // frame_000000.tensor ...
  std::vector<std::string> names;
  /// Planted objects mapped back to source pixels, per frame.
  std::vector<std::vector<Detection>> expected;
};

/// Writes `count` frames of src_w x src_h under `root`. Model input is
/// 192x128 with 4 classes; class (f / 25) % 4 is planted on every frame so
/// captions open and close, and up to two other objects come and go.
StreamFixture write_stream_fixture(const std::filesystem::path& root, int count,
                                   std::uint64_t seed, int src_w = 300, int src_h = 180);

}  // namespace msl::testing
