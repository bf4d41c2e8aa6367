#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "surfer/sim/library.hpp"
#include "surfer/sim/types.hpp"

namespace surfer::sim {

enum class View { Top, Front };

struct RenderConfig {
  double brightness = 1.0;  // must lie in [0.25, 2.0]
};

// Row-major, channel-last, values in [0, 1].
struct Image {
  static constexpr std::size_t kSize = 56;
  static constexpr std::size_t kChannels = 3;

  std::vector<double> pixels = std::vector<double>(kSize * kSize * kChannels, 0.0);

  double& at(std::size_t row, std::size_t col, std::size_t ch) { return pixels[(row * kSize + col) * kChannels + ch]; }
  double at(std::size_t row, std::size_t col, std::size_t ch) const {
    return pixels[(row * kSize + col) * kChannels + ch];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

// Orthographic raster of the scene. The top view covers x in [-32, 32] and
// y in [4, 68] with the far edge on row 0; the front view looks along +y and
// covers z in [-8, 56].
Image render(const World& world, const SceneState& state, View view, const RenderConfig& cfg = {});

// Binary PPM (P6) with 8-bit channels.
std::string to_ppm(const Image& image);
Image from_ppm(const std::string& bytes);

}  // namespace surfer::sim
