#include "fixtures.hpp"

#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>

#include "msl/tensor_file.hpp"
#include "synth.hpp"

namespace msl::testing {

StreamFixture write_stream_fixture(const std::filesystem::path& root, int count,
                                   std::uint64_t seed, int src_w, int src_h)
{
  SynthConfig cfg;
  cfg.input_w = 192;
  cfg.input_h = 128;
  cfg.nc = 4;

  StreamFixture fx;
  fx.frames = root / "frames";
  fx.tensors = root / "tensors";
  fx.names = {"a", "aa", "i", "ii"};
  std::filesystem::create_directories(fx.frames);
  std::filesystem::create_directories(fx.tensors);

  const LetterboxMeta meta = letterbox_params(src_w, src_h, cfg.input_w, cfg.input_h);
  const PixelBox content = map_box({0, 0, static_cast<double>(src_w), static_cast<double>(src_h)},
                                   meta);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> extra(0, 2);

  cv::Mat image(src_h, src_w, CV_8UC3);
  for (int f = 0; f < count; ++f) {
    auto objects = random_objects(rng, 1 + extra(rng), content, cfg, 12.0, 60.0);
    if (objects.empty()) {
      throw std::runtime_error("fixture scene has no objects");
    }
    objects.front().class_id = (f / 25) % cfg.nc;

    std::vector<Detection> expected;
    for (const auto& o : objects) {
      expected.push_back({unmap_box(o.box, meta), o.class_id, o.score});
    }
    fx.expected.push_back(std::move(expected));

    const auto stem = fmt::format("frame_{:06d}", f);
    write_tensor_file(fx.tensors / (stem + ".tensor"),
                      tensor_file_from(synthesize_raw(objects, cfg), cfg.input_w, cfg.input_h));
    image.setTo(cv::Scalar((f * 7) % 256, (f * 13) % 256, (f * 29) % 256));
    if (!cv::imwrite((fx.frames / (stem + ".png")).string(), image)) {
      throw std::runtime_error("cannot write fixture frame");
    }
  }
  return fx;
}

}  // namespace msl::testing
