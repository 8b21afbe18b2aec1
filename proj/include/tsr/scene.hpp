#ifndef TSR_SCENE_HPP
#define TSR_SCENE_HPP

#include <cstdint>
#include <vector>

namespace tsr {

enum class Shape : std::uint8_t { circle = 0, triangle, square, pentagon, hexagon };
constexpr int kShapeCount = 5;

struct SceneObject {
  Shape shape = Shape::circle;
  double cx = 0.5;       // center, unit canvas coordinates
  double cy = 0.5;
  double size = 0.1;     // circumradius, unit canvas units
  double gray = 1.0;     // fill level in (0,1]
  double rotation = 0.0; // radians
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  bool contains = false;  // some object is nested inside another
  bool contact = false;   // some object pair touches
};

struct RasterImage {
  int width = 64;
  int height = 64;
  std::vector<float> pixels;  // row-major grayscale in [0,1]

  float at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Deterministic scanline rasterization: background 0, objects filled at
// their gray level in listing order (later objects paint over earlier ones),
// pixel-center point tests, no anti-aliasing.
RasterImage render_scene(const SceneSpec& spec, int width = 64, int height = 64);

// Point-in-shape test used by the rasterizer; exposed for test oracles.
bool point_in_object(const SceneObject& obj, double x, double y);

}  // namespace tsr

#endif
