#include "tsr/scene.hpp"

#include <array>
#include <cmath>

namespace tsr {

namespace {

int polygon_sides(Shape s) {
  switch (s) {
    case Shape::triangle: return 3;
    case Shape::square: return 4;
    case Shape::pentagon: return 5;
    case Shape::hexagon: return 6;
    default: return 0;
  }
}

}  // namespace

bool point_in_object(const SceneObject& obj, double x, double y) {
  const double dx = x - obj.cx;
  const double dy = y - obj.cy;
  if (obj.shape == Shape::circle) {
    return dx * dx + dy * dy <= obj.size * obj.size;
  }
  const int n = polygon_sides(obj.shape);
  // Regular n-gon with circumradius size; vertex 0 points up before
  // rotation, except the square which is axis-aligned at rotation 0.
  std::array<double, 12> vx{}, vy{};
  double base = obj.rotation - 1.5707963267948966;
  if (obj.shape == Shape::square) base += 0.7853981633974483;
  for (int i = 0; i < n; ++i) {
    const double a = base + 6.283185307179586 * i / n;
    vx[static_cast<std::size_t>(i)] = obj.size * std::cos(a);
    vy[static_cast<std::size_t>(i)] = obj.size * std::sin(a);
  }
  // Convex polygon: the point must lie on one consistent side of every edge.
  bool any_neg = false, any_pos = false;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const double ex = vx[static_cast<std::size_t>(j)] - vx[static_cast<std::size_t>(i)];
    const double ey = vy[static_cast<std::size_t>(j)] - vy[static_cast<std::size_t>(i)];
    const double cross = ex * (dy - vy[static_cast<std::size_t>(i)]) -
                         ey * (dx - vx[static_cast<std::size_t>(i)]);
    if (cross < 0) any_neg = true;
    if (cross > 0) any_pos = true;
  }
  return !(any_neg && any_pos);
}

RasterImage render_scene(const SceneSpec& spec, int width, int height) {
  RasterImage img;
  img.width = width;
  img.height = height;
  img.pixels.assign(static_cast<std::size_t>(width) * height, 0.0f);
  for (const auto& obj : spec.objects) {
    // Bounding box in pixel space keeps the fill loop tight.
    const int x0 = std::max(0, static_cast<int>(std::floor((obj.cx - obj.size) * width)) - 1);
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil((obj.cx + obj.size) * width)) + 1);
    const int y0 = std::max(0, static_cast<int>(std::floor((obj.cy - obj.size) * height)) - 1);
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil((obj.cy + obj.size) * height)) + 1);
    for (int py = y0; py <= y1; ++py) {
      const double sy = (py + 0.5) / height;
      for (int px = x0; px <= x1; ++px) {
        const double sx = (px + 0.5) / width;
        if (point_in_object(obj, sx, sy)) {
          img.pixels[static_cast<std::size_t>(py) * width + px] = static_cast<float>(obj.gray);
        }
      }
    }
  }
  return img;
}

}  // namespace tsr
