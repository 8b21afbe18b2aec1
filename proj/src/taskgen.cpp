#include "tsr/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tsr/errors.hpp"
#include "tsr/rng.hpp"

namespace tsr {

namespace {

constexpr int kMaxRetries = 100;
constexpr double kBallDt = 0.12;

// Sizes used by the same/different family; every unequal pair differs by at
// least 25%, which keeps negatives solvable at 64x64. The progression is
// deliberately non-arithmetic: with evenly spaced sizes the summed pooled
// statistics of a (lo, hi) pair collide with twice the mid size.
constexpr double kSdSizes[3] = {0.09, 0.13, 0.19};

double inradius_factor(Shape s) {
  switch (s) {
    case Shape::circle: return 1.0;
    case Shape::triangle: return 0.5;
    case Shape::square: return 0.7071067811865476;
    case Shape::pentagon: return 0.8090169943749475;
    case Shape::hexagon: return 0.8660254037844386;
  }
  return 1.0;
}

Shape random_shape(Rng& rng) { return static_cast<Shape>(rng.uniform_int(0, kShapeCount)); }

Shape random_shape_except(Rng& rng, Shape avoid) {
  Shape s;
  do {
    s = random_shape(rng);
  } while (s == avoid);
  return s;
}

// Center snapped to the pixel grid so integer-pixel translations reproduce
// the mask exactly.
double grid_snap(double v) { return std::round(v * 64.0) / 64.0; }

void random_center(Rng& rng, double size, double margin, double* cx, double* cy) {
  const double lo = size + margin;
  const double hi = 1.0 - size - margin;
  *cx = rng.uniform(lo, hi);
  *cy = rng.uniform(lo, hi);
}

// Places `count` non-overlapping objects of a common size.
bool place_disjoint(Rng& rng, int count, double size, std::vector<double>* xs,
                    std::vector<double>* ys) {
  xs->clear();
  ys->clear();
  for (int attempt = 0; attempt < 400 && static_cast<int>(xs->size()) < count; ++attempt) {
    double cx, cy;
    random_center(rng, size, 0.02, &cx, &cy);
    bool ok = true;
    for (std::size_t i = 0; i < xs->size(); ++i) {
      const double dx = cx - (*xs)[i];
      const double dy = cy - (*ys)[i];
      if (std::sqrt(dx * dx + dy * dy) < 2.0 * size + 0.03) {
        ok = false;
        break;
      }
    }
    if (ok) {
      xs->push_back(cx);
      ys->push_back(cy);
    }
  }
  return static_cast<int>(xs->size()) == count;
}

void render_all(const std::vector<SceneSpec>& specs, std::vector<RasterImage>* out) {
  out->clear();
  out->reserve(specs.size());
  for (const auto& s : specs) out->push_back(render_scene(s));
}

// ---------------------------------------------------------------------------
// same / different
// ---------------------------------------------------------------------------

Episode make_same_different(std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  Episode e;
  e.family = TaskFamily::same_different;
  e.seed = seed;

  // Pentagon is omitted here: against a square or hexagon of equal size it
  // is not reliably distinguishable at 64x64.
  const Shape sd_shapes[4] = {Shape::circle, Shape::triangle, Shape::square, Shape::hexagon};
  const bool positive = rng.bernoulli(0.5);
  const int size_idx = static_cast<int>(rng.uniform_int(0, 3));
  const Shape shape_a = sd_shapes[rng.uniform_int(0, 4)];
  double size_a = kSdSizes[size_idx];
  Shape shape_b = shape_a;
  double size_b = size_a;
  if (!positive) {
    if (rng.bernoulli(0.5)) {
      do {
        shape_b = sd_shapes[rng.uniform_int(0, 4)];
      } while (shape_b == shape_a);
      size_b = kSdSizes[rng.uniform_int(0, 3)];
    } else {
      int other;
      do {
        other = static_cast<int>(rng.uniform_int(0, 3));
      } while (other == size_idx);
      size_b = kSdSizes[other];
    }
  }

  SceneSpec spec;
  for (int attempt = 0;; ++attempt) {
    double ax, ay, bx, by;
    random_center(rng, size_a, 0.05, &ax, &ay);
    random_center(rng, size_b, 0.05, &bx, &by);
    ax = grid_snap(ax);
    ay = grid_snap(ay);
    bx = grid_snap(bx);
    by = grid_snap(by);
    const double dx = ax - bx, dy = ay - by;
    if (std::sqrt(dx * dx + dy * dy) >= size_a + size_b + 0.06) {
      spec.objects = {{shape_a, ax, ay, size_a, 1.0, 0.0}, {shape_b, bx, by, size_b, 1.0, 0.0}};
      break;
    }
    if (attempt > kMaxRetries) throw generation_error("same_different: placement failed");
  }

  e.meta.attribute = positive ? "same" : "different";
  e.meta.panel_specs = {spec};
  e.inputs = {render_scene(spec)};
  e.label = positive ? 1 : 0;
  return e;
}

bool same_different_congruent(const SceneSpec& spec) {
  const auto& a = spec.objects.at(0);
  const auto& b = spec.objects.at(1);
  return a.shape == b.shape && std::abs(a.size - b.size) < 1e-9;
}

// ---------------------------------------------------------------------------
// odd one out
// ---------------------------------------------------------------------------

const char* kOddAttributes[9] = {"shape",    "position", "size",  "gray", "rotation",
                                 "flip",     "count",    "inside", "contact"};

// Panel attribute tuple used by the pairwise comparison oracle.
struct PanelAttrs {
  std::vector<int> shapes;  // sorted distinct shape ids
  int count = 0;
  double size0 = 0.0;
  double gray = 0.0;
  double rotation = 0.0;
  double px = 0.0, py = 0.0;
  int flip_sign = 0;  // sign of satellite x-offset, 0 when undefined
  bool inside = false;
  bool contact = false;
};

PanelAttrs extract_attrs(const SceneSpec& spec) {
  PanelAttrs a;
  a.count = static_cast<int>(spec.objects.size());
  for (const auto& o : spec.objects) a.shapes.push_back(static_cast<int>(o.shape));
  std::sort(a.shapes.begin(), a.shapes.end());
  a.shapes.erase(std::unique(a.shapes.begin(), a.shapes.end()), a.shapes.end());
  if (!spec.objects.empty()) {
    const auto& p = spec.objects.front();
    a.size0 = p.size;
    a.gray = p.gray;
    a.rotation = p.rotation;
    a.px = p.cx;
    a.py = p.cy;
  }
  if (spec.objects.size() == 2 &&
      std::abs(spec.objects[0].size - spec.objects[1].size) > 1e-9) {
    // Orientation of a big+satellite arrangement; undefined for equal-size
    // pairs so generic multi-object panels carry no flip value.
    const double dx = spec.objects[1].cx - spec.objects[0].cx;
    if (std::abs(dx) > 1e-9) a.flip_sign = dx > 0 ? 1 : -1;
  }
  a.inside = spec.contains;
  a.contact = spec.contact;
  return a;
}

bool attrs_equal(const PanelAttrs& a, const PanelAttrs& b, const std::string& attribute) {
  if (attribute == "shape") return a.shapes == b.shapes;
  if (attribute == "position") return std::abs(a.px - b.px) < 1e-6 && std::abs(a.py - b.py) < 1e-6;
  if (attribute == "size") return std::abs(a.size0 - b.size0) < 1e-6;
  if (attribute == "gray") return std::abs(a.gray - b.gray) < 1e-6;
  if (attribute == "rotation") return std::abs(a.rotation - b.rotation) < 1e-6;
  if (attribute == "flip") return a.flip_sign == b.flip_sign;
  if (attribute == "count") return a.count == b.count;
  if (attribute == "inside") return a.inside == b.inside;
  if (attribute == "contact") return a.contact == b.contact;
  throw contract_error("unknown odd-one-out attribute: " + attribute);
}

// Index of the single panel differing from the other three in `attribute`,
// or -1 when the 3-vs-1 structure is absent.
int find_outlier(const std::vector<SceneSpec>& specs, const std::string& attribute) {
  std::vector<PanelAttrs> attrs;
  for (const auto& s : specs) attrs.push_back(extract_attrs(s));
  for (int candidate = 0; candidate < 4; ++candidate) {
    bool others_agree = true;
    bool candidate_differs = true;
    for (int i = 0; i < 4; ++i) {
      if (i == candidate) continue;
      for (int j = i + 1; j < 4; ++j) {
        if (j == candidate) continue;
        if (!attrs_equal(attrs[static_cast<std::size_t>(i)], attrs[static_cast<std::size_t>(j)],
                         attribute)) {
          others_agree = false;
        }
      }
      if (attrs_equal(attrs[static_cast<std::size_t>(candidate)],
                      attrs[static_cast<std::size_t>(i)], attribute)) {
        candidate_differs = false;
      }
    }
    if (others_agree && candidate_differs) return candidate;
  }
  return -1;
}

Episode make_odd_one_out_once(std::uint64_t seed, Rng& rng) {
  Episode e;
  e.family = TaskFamily::odd_one_out;
  e.seed = seed;
  const int attr_idx = static_cast<int>(rng.uniform_int(0, 9));
  const std::string attribute = kOddAttributes[attr_idx];
  const int outlier = static_cast<int>(rng.uniform_int(0, 4));

  const Shape shape = random_shape(rng);
  const double size = rng.uniform(0.09, 0.14);
  const double gray = rng.uniform(0.45, 1.0);

  std::vector<SceneSpec> specs(4);

  auto one_object_panel = [&](SceneObject obj, bool random_pos) {
    SceneSpec s;
    if (random_pos) random_center(rng, obj.size, 0.02, &obj.cx, &obj.cy);
    s.objects = {obj};
    return s;
  };

  if (attribute == "shape") {
    const Shape odd_shape = random_shape_except(rng, shape);
    for (int i = 0; i < 4; ++i) {
      SceneObject o{i == outlier ? odd_shape : shape, 0.5, 0.5, size, gray, 0.0};
      specs[static_cast<std::size_t>(i)] = one_object_panel(o, true);
    }
  } else if (attribute == "position") {
    double bx, by, ox, oy;
    random_center(rng, size, 0.02, &bx, &by);
    do {
      random_center(rng, size, 0.02, &ox, &oy);
    } while (std::hypot(ox - bx, oy - by) < 0.3);
    for (int i = 0; i < 4; ++i) {
      SceneObject o{shape, i == outlier ? ox : bx, i == outlier ? oy : by, size, gray, 0.0};
      specs[static_cast<std::size_t>(i)].objects = {o};
    }
  } else if (attribute == "size") {
    const double odd_size = rng.bernoulli(0.5) ? size * 1.4 : size / 1.4;
    for (int i = 0; i < 4; ++i) {
      SceneObject o{shape, 0.5, 0.5, i == outlier ? odd_size : size, gray, 0.0};
      specs[static_cast<std::size_t>(i)] = one_object_panel(o, true);
    }
  } else if (attribute == "gray") {
    // Draw the shared and the outlier gray from two distinct bands; the
    // bands sit at least 0.24 apart.
    const double lo[3] = {0.35, 0.66, 0.93};
    const int band_a = static_cast<int>(rng.uniform_int(0, 3));
    int band_b;
    do {
      band_b = static_cast<int>(rng.uniform_int(0, 3));
    } while (band_b == band_a);
    const double shared_gray = rng.uniform(lo[band_a], lo[band_a] + 0.07);
    const double odd_gray = rng.uniform(lo[band_b], lo[band_b] + 0.07);
    for (int i = 0; i < 4; ++i) {
      SceneObject o{shape, 0.5, 0.5, size, i == outlier ? odd_gray : shared_gray, 0.0};
      specs[static_cast<std::size_t>(i)] = one_object_panel(o, true);
    }
  } else if (attribute == "rotation") {
    const Shape rshape = rng.bernoulli(0.5) ? Shape::triangle : Shape::square;
    const double period = rshape == Shape::triangle ? 2.0943951023931953 : 1.5707963267948966;
    const double rot = rng.uniform(0.0, period);
    const double delta = period * rng.uniform(0.35, 0.65);
    const double odd_rot = std::fmod(rot + delta, period);
    for (int i = 0; i < 4; ++i) {
      SceneObject o{rshape, 0.5, 0.5, size, gray, i == outlier ? odd_rot : rot};
      specs[static_cast<std::size_t>(i)] = one_object_panel(o, true);
    }
  } else if (attribute == "flip") {
    const Shape big = random_shape(rng);
    const Shape small = random_shape_except(rng, big);
    const double off_x = 0.115, off_y = -0.075;
    for (int i = 0; i < 4; ++i) {
      const double sign = (i == outlier) ? -1.0 : 1.0;
      double cx, cy;
      // Keep the whole two-object group inside the canvas.
      const double reach = 0.115 + 0.05;
      cx = rng.uniform(reach + 0.03, 1.0 - reach - 0.03);
      cy = rng.uniform(reach + 0.03, 1.0 - reach - 0.03);
      SceneSpec s;
      s.objects = {{big, cx, cy, 0.10, gray, 0.0},
                   {small, cx + sign * off_x, cy + off_y, 0.05, gray, 0.0}};
      specs[static_cast<std::size_t>(i)] = s;
    }
  } else if (attribute == "count") {
    const int base = static_cast<int>(rng.uniform_int(1, 4));
    int odd_count;
    do {
      odd_count = static_cast<int>(rng.uniform_int(1, 5));
    } while (odd_count == base);
    const double csize = 0.075;
    for (int i = 0; i < 4; ++i) {
      const int k = i == outlier ? odd_count : base;
      std::vector<double> xs, ys;
      if (!place_disjoint(rng, k, csize, &xs, &ys)) {
        throw generation_error("odd_one_out: count placement failed");
      }
      SceneSpec s;
      for (int j = 0; j < k; ++j) s.objects.push_back({shape, xs[static_cast<std::size_t>(j)],
                                                       ys[static_cast<std::size_t>(j)], csize,
                                                       gray, 0.0});
      specs[static_cast<std::size_t>(i)] = s;
    }
  } else if (attribute == "inside") {
    const Shape big = random_shape(rng);
    const Shape small = random_shape_except(rng, big);
    const double big_size = 0.17, small_size = 0.05;
    const double angle = rng.uniform(0.0, 6.283185307179586);
    const double in_r = (inradius_factor(big) * big_size - small_size) * 0.5;
    const double out_r = big_size + small_size + 0.05;
    for (int i = 0; i < 4; ++i) {
      const double r = i == outlier ? out_r : in_r;
      double cx, cy;
      const double reach = r + small_size + 0.02;
      cx = rng.uniform(std::max(big_size, reach) + 0.02, 1.0 - std::max(big_size, reach) - 0.02);
      cy = rng.uniform(std::max(big_size, reach) + 0.02, 1.0 - std::max(big_size, reach) - 0.02);
      SceneSpec s;
      s.objects = {{big, cx, cy, big_size, gray * 0.6, 0.0},
                   {small, cx + r * std::cos(angle), cy + r * std::sin(angle), small_size, 1.0,
                    0.0}};
      s.contains = (i != outlier);
      specs[static_cast<std::size_t>(i)] = s;
    }
  } else {  // contact
    const Shape sa = random_shape(rng);
    const Shape sb = random_shape(rng);
    const double ra = 0.09, rb = 0.07;
    const double angle = rng.uniform(0.0, 6.283185307179586);
    for (int i = 0; i < 4; ++i) {
      const double dist = (i == outlier) ? ra + rb + 0.12 : ra + rb;
      const double reach = dist + rb + 0.02;
      double cx, cy;
      cx = rng.uniform(std::max(ra, reach) + 0.02, 1.0 - std::max(ra, reach) - 0.02);
      cy = rng.uniform(std::max(ra, reach) + 0.02, 1.0 - std::max(ra, reach) - 0.02);
      SceneSpec s;
      s.objects = {{sa, cx, cy, ra, gray, 0.0},
                   {sb, cx + dist * std::cos(angle), cy + dist * std::sin(angle), rb, gray, 0.0}};
      s.contact = (i != outlier);
      specs[static_cast<std::size_t>(i)] = s;
    }
  }

  e.meta.attribute = attribute;
  e.meta.panel_specs = specs;
  render_all(specs, &e.candidates);
  e.meta.candidate_specs = specs;
  e.label = outlier;
  return e;
}

Episode make_odd_one_out(std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    Episode e = make_odd_one_out_once(seed, rng);
    if (find_outlier(e.meta.panel_specs, e.meta.attribute) != e.label) continue;
    bool clean = true;
    for (const char* attr : kOddAttributes) {
      if (e.meta.attribute == attr) continue;
      if (find_outlier(e.meta.panel_specs, attr) >= 0) {
        clean = false;
        break;
      }
    }
    if (clean) return e;
  }
  throw generation_error("odd_one_out: could not build an unambiguous episode");
}

// ---------------------------------------------------------------------------
// grid puzzle
// ---------------------------------------------------------------------------

const char* kGridRules[4] = {"shape_progression", "size_progression", "count_constant",
                             "gray_constant"};

struct GridContext {
  std::string rule;
  Shape shared_shape = Shape::circle;
  double shared_size = 0.12;
  double shared_gray = 0.8;
  int expected_shape = 0;
  double expected_size = 0.12;
  double expected_gray = 0.8;
  int expected_count = 1;
};

SceneSpec grid_panel(Rng& rng, Shape shape, double size, double gray, int count) {
  SceneSpec s;
  if (count == 1) {
    const double cx = 0.5 + rng.uniform(-0.05, 0.05);
    const double cy = 0.5 + rng.uniform(-0.05, 0.05);
    s.objects = {{shape, cx, cy, size, gray, 0.0}};
    return s;
  }
  std::vector<double> xs, ys;
  if (!place_disjoint(rng, count, size, &xs, &ys)) {
    throw generation_error("grid_puzzle: panel placement failed");
  }
  for (int i = 0; i < count; ++i) {
    s.objects.push_back({shape, xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(i)],
                         size, gray, 0.0});
  }
  return s;
}

// Does a candidate panel correctly complete the grid's rule?
bool grid_candidate_ok(const GridContext& g, const SceneSpec& spec) {
  if (static_cast<int>(spec.objects.size()) != g.expected_count) return false;
  for (const auto& o : spec.objects) {
    if (static_cast<int>(o.shape) != g.expected_shape) return false;
    if (std::abs(o.size - g.expected_size) / g.expected_size > 0.10) return false;
    if (std::abs(o.gray - g.expected_gray) > 0.10) return false;
  }
  return true;
}

Episode make_grid_puzzle_once(std::uint64_t seed, Rng& rng) {
  Episode e;
  e.family = TaskFamily::grid_puzzle;
  e.seed = seed;

  GridContext g;
  g.rule = kGridRules[rng.uniform_int(0, 4)];
  g.shared_shape = random_shape(rng);
  g.shared_size = rng.uniform(0.10, 0.14);
  g.shared_gray = rng.uniform(0.5, 1.0);
  g.expected_shape = static_cast<int>(g.shared_shape);
  g.expected_size = g.shared_size;
  g.expected_gray = g.shared_gray;
  g.expected_count = 1;

  // Attribute values per cell, row-major 3x3.
  Shape cell_shape[3][3];
  double cell_size[3][3], cell_gray[3][3];
  int cell_count[3][3];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      cell_shape[r][c] = g.shared_shape;
      cell_size[r][c] = g.shared_size;
      cell_gray[r][c] = g.shared_gray;
      cell_count[r][c] = 1;
    }
  }

  if (g.rule == "shape_progression") {
    for (int r = 0; r < 3; ++r) {
      const int start = static_cast<int>(rng.uniform_int(0, kShapeCount));
      for (int c = 0; c < 3; ++c) {
        cell_shape[r][c] = static_cast<Shape>((start + c) % kShapeCount);
      }
    }
    g.expected_shape = static_cast<int>(cell_shape[2][2]);
  } else if (g.rule == "size_progression") {
    const double ratio = 1.35;
    for (int r = 0; r < 3; ++r) {
      const double base = rng.uniform(0.065, 0.095);
      for (int c = 0; c < 3; ++c) cell_size[r][c] = base * std::pow(ratio, c);
    }
    g.expected_size = cell_size[2][2];
  } else if (g.rule == "count_constant") {
    g.shared_size = 0.075;
    g.expected_size = g.shared_size;
    int counts[3];
    for (int r = 0; r < 3; ++r) counts[r] = static_cast<int>(rng.uniform_int(1, 5));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        cell_size[r][c] = g.shared_size;
        cell_count[r][c] = counts[r];
      }
    }
    g.expected_count = counts[2];
  } else {  // gray_constant
    // One gray per band keeps the three rows at least 0.2 apart.
    double grays[3] = {rng.uniform(0.34, 0.42), rng.uniform(0.62, 0.70), rng.uniform(0.90, 0.98)};
    for (int r = 2; r > 0; --r) {
      std::swap(grays[r], grays[rng.uniform_int(0, r + 1)]);
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) cell_gray[r][c] = grays[r];
    }
    g.expected_gray = grays[2];
  }

  // Context panels: the 3x3 grid minus the bottom-right cell.
  std::vector<SceneSpec> context;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (r == 2 && c == 2) continue;
      context.push_back(grid_panel(rng, cell_shape[r][c], cell_size[r][c], cell_gray[r][c],
                                   cell_count[r][c]));
    }
  }

  SceneSpec answer = grid_panel(rng, static_cast<Shape>(g.expected_shape), g.expected_size,
                                g.expected_gray, g.expected_count);

  // Distractors violate the completion in at least one attribute.
  std::vector<SceneSpec> distractors;
  for (int i = 0; i < 7; ++i) {
    const int kind = static_cast<int>(rng.uniform_int(0, 4));
    Shape shp = static_cast<Shape>(g.expected_shape);
    double sz = g.expected_size;
    double gr = g.expected_gray;
    int cnt = g.expected_count;
    if (kind == 0) {
      shp = random_shape_except(rng, shp);
    } else if (kind == 1) {
      sz = rng.bernoulli(0.5) ? sz * 1.45 : sz / 1.45;
      sz = std::min(sz, 0.19);
    } else if (kind == 2) {
      gr = g.expected_gray > 0.62 ? g.expected_gray - rng.uniform(0.25, 0.32)
                                  : g.expected_gray + rng.uniform(0.25, 0.32);
    } else {
      do {
        cnt = static_cast<int>(rng.uniform_int(1, 5));
      } while (cnt == g.expected_count);
      sz = std::min(sz, 0.085);
    }
    distractors.push_back(grid_panel(rng, shp, sz, gr, cnt));
  }

  const int label = static_cast<int>(rng.uniform_int(0, 8));
  std::vector<SceneSpec> candidates;
  int d = 0;
  for (int i = 0; i < 8; ++i) {
    candidates.push_back(i == label ? answer
                                    : distractors[static_cast<std::size_t>(d++)]);
  }

  e.meta.attribute = g.rule;
  e.meta.panel_specs = context;
  e.meta.candidate_specs = candidates;
  e.meta.expected_panel.objects = {{static_cast<Shape>(g.expected_shape), 0.5, 0.5,
                                    g.expected_size, g.expected_gray, 0.0}};
  // expected_count rides in the object list length convention:
  e.meta.expected_panel.objects.resize(static_cast<std::size_t>(g.expected_count),
                                       e.meta.expected_panel.objects.front());
  render_all(context, &e.inputs);
  render_all(candidates, &e.candidates);
  e.label = label;
  return e;
}

GridContext grid_context_from_meta(const RuleMeta& meta) {
  GridContext g;
  g.rule = meta.attribute;
  const auto& proto = meta.expected_panel.objects.front();
  g.expected_shape = static_cast<int>(proto.shape);
  g.expected_size = proto.size;
  g.expected_gray = proto.gray;
  g.expected_count = static_cast<int>(meta.expected_panel.objects.size());
  return g;
}

Episode make_grid_puzzle(std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    Episode e = make_grid_puzzle_once(seed, rng);
    const GridContext g = grid_context_from_meta(e.meta);
    int accepted = 0;
    int accepted_idx = -1;
    for (std::size_t i = 0; i < e.meta.candidate_specs.size(); ++i) {
      if (grid_candidate_ok(g, e.meta.candidate_specs[i])) {
        ++accepted;
        accepted_idx = static_cast<int>(i);
      }
    }
    if (accepted == 1 && accepted_idx == e.label) return e;
  }
  throw generation_error("grid_puzzle: exactly-one-answer property failed");
}

// ---------------------------------------------------------------------------
// concept contrast
// ---------------------------------------------------------------------------

bool term_satisfied(const ConceptTerm& t, const SceneSpec& spec) {
  const auto& primary = spec.objects.front();
  if (t.kind == "shape") return static_cast<int>(primary.shape) == t.shape;
  if (t.kind == "size_ge") return primary.size >= t.threshold;
  if (t.kind == "size_lt") return primary.size < t.threshold;
  if (t.kind == "gray_ge") return primary.gray >= t.threshold;
  if (t.kind == "gray_lt") return primary.gray < t.threshold;
  if (t.kind == "count_ge") return static_cast<double>(spec.objects.size()) >= t.threshold;
  if (t.kind == "inside") return spec.contains;
  if (t.kind == "left_half") return primary.cx < 0.5;
  if (t.kind == "top_half") return primary.cy < 0.5;
  throw contract_error("unknown concept term: " + t.kind);
}

bool concept_satisfied(const std::vector<ConceptTerm>& terms, const SceneSpec& spec) {
  for (const auto& t : terms) {
    if (!term_satisfied(t, spec)) return false;
  }
  return true;
}

// Concept vocabulary with the dimension each term constrains.
struct TermChoice {
  const char* kind;
  const char* dimension;
};
const TermChoice kTermChoices[] = {
    {"shape", "shape"},     {"size_ge", "size"},   {"size_lt", "size"},
    {"gray_ge", "gray"},    {"gray_lt", "gray"},   {"count_ge", "count"},
    {"inside", "inside"},   {"left_half", "posx"}, {"top_half", "posy"},
};

SceneSpec concept_panel(Rng& rng, const std::vector<ConceptTerm>& terms, bool satisfy) {
  // A negative panel satisfies every term except one chosen violation
  // (violating count_ge may force an inside violation as well).
  int violate_idx = -1;
  if (!satisfy) violate_idx = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(terms.size())));

  bool want_inside = false, has_inside_term = false;
  int count = 1;
  Shape shape = random_shape(rng);
  double size = rng.uniform(0.06, 0.18);
  double gray = rng.uniform(0.35, 1.0);
  bool constrain_left = false, want_left = false;
  bool constrain_top = false, want_top = false;

  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    const bool sat = static_cast<int>(i) != violate_idx;
    if (t.kind == "shape") {
      shape = sat ? static_cast<Shape>(t.shape)
                  : random_shape_except(rng, static_cast<Shape>(t.shape));
    } else if (t.kind == "size_ge") {
      size = sat ? rng.uniform(t.threshold + 0.015, 0.18) : rng.uniform(0.06, t.threshold - 0.015);
    } else if (t.kind == "size_lt") {
      size = sat ? rng.uniform(0.06, t.threshold - 0.015) : rng.uniform(t.threshold + 0.015, 0.18);
    } else if (t.kind == "gray_ge") {
      gray = sat ? rng.uniform(t.threshold + 0.05, 1.0) : rng.uniform(0.35, t.threshold - 0.05);
    } else if (t.kind == "gray_lt") {
      gray = sat ? rng.uniform(0.35, t.threshold - 0.05) : rng.uniform(t.threshold + 0.05, 1.0);
    } else if (t.kind == "count_ge") {
      count = sat ? static_cast<int>(rng.uniform_int(2, 4)) : 1;
    } else if (t.kind == "inside") {
      has_inside_term = true;
      want_inside = sat;
    } else if (t.kind == "left_half") {
      constrain_left = true;
      want_left = sat;
    } else if (t.kind == "top_half") {
      constrain_top = true;
      want_top = sat;
    }
  }

  SceneSpec s;
  if (has_inside_term) {
    // Nested or disjoint pair; the big object is the primary.
    const double big_size = std::max(size, 0.14);
    const Shape small_shape = random_shape_except(rng, shape);
    const double small_size = 0.05;
    const double angle = rng.uniform(0.0, 6.283185307179586);
    const double r = want_inside ? (inradius_factor(shape) * big_size - small_size) * 0.5
                                 : big_size + small_size + 0.05;
    const double reach = r + small_size + 0.02;
    const double lo = std::max(big_size, reach) + 0.02;
    double cx = rng.uniform(lo, 1.0 - lo);
    double cy = rng.uniform(lo, 1.0 - lo);
    if (constrain_left) cx = want_left ? rng.uniform(lo, 0.47) : rng.uniform(0.53, 1.0 - lo);
    if (constrain_top) cy = want_top ? rng.uniform(lo, 0.47) : rng.uniform(0.53, 1.0 - lo);
    s.objects = {{shape, cx, cy, big_size, gray, 0.0},
                 {small_shape, cx + r * std::cos(angle), cy + r * std::sin(angle), small_size,
                  1.0, 0.0}};
    s.contains = want_inside;
    return s;
  }

  double cx, cy;
  random_center(rng, size, 0.02, &cx, &cy);
  if (constrain_left) {
    cx = want_left ? rng.uniform(size + 0.02, 0.46) : rng.uniform(0.54, 1.0 - size - 0.02);
  }
  if (constrain_top) {
    cy = want_top ? rng.uniform(size + 0.02, 0.46) : rng.uniform(0.54, 1.0 - size - 0.02);
  }
  s.objects = {{shape, cx, cy, size, gray, 0.0}};
  for (int i = 1; i < count; ++i) {
    // Secondary objects are small and disjoint from everything placed so far.
    const double extra_size = 0.045;
    for (int attempt = 0; attempt < 200; ++attempt) {
      double ex, ey;
      random_center(rng, extra_size, 0.02, &ex, &ey);
      bool ok = true;
      for (const auto& o : s.objects) {
        if (std::hypot(ex - o.cx, ey - o.cy) < o.size + extra_size + 0.03) {
          ok = false;
          break;
        }
      }
      if (ok) {
        s.objects.push_back({shape, ex, ey, extra_size, gray, 0.0});
        break;
      }
    }
  }
  return s;
}

Episode make_concept_contrast(std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    Episode e;
    e.family = TaskFamily::concept_contrast;
    e.seed = seed;

    const int term_count = rng.bernoulli(0.5) ? 1 : 2;
    std::vector<ConceptTerm> terms;
    std::set<std::string> used_dims;
    while (static_cast<int>(terms.size()) < term_count) {
      const auto& choice = kTermChoices[rng.uniform_int(0, 9)];
      if (used_dims.count(choice.dimension)) continue;
      // The nested-pair layout fixes the primary size and the object count,
      // so `inside` cannot be combined with size or count terms.
      const bool is_inside = std::string(choice.kind) == "inside";
      if (is_inside && (used_dims.count("size") || used_dims.count("count"))) continue;
      if (used_dims.count("inside") &&
          (std::string(choice.dimension) == "size" || std::string(choice.dimension) == "count")) {
        continue;
      }
      used_dims.insert(choice.dimension);
      ConceptTerm t;
      t.kind = choice.kind;
      if (t.kind == "shape") t.shape = static_cast<int>(rng.uniform_int(0, kShapeCount));
      if (t.kind == "size_ge" || t.kind == "size_lt") t.threshold = 0.12;
      if (t.kind == "gray_ge" || t.kind == "gray_lt") t.threshold = 0.65;
      if (t.kind == "count_ge") t.threshold = 2.0;
      terms.push_back(t);
    }

    std::vector<SceneSpec> specs;
    for (int i = 0; i < 6; ++i) specs.push_back(concept_panel(rng, terms, true));
    for (int i = 0; i < 6; ++i) specs.push_back(concept_panel(rng, terms, false));
    const bool query_positive = rng.bernoulli(0.5);
    specs.push_back(concept_panel(rng, terms, query_positive));

    bool ok = true;
    for (int i = 0; i < 6; ++i) ok = ok && concept_satisfied(terms, specs[static_cast<std::size_t>(i)]);
    for (int i = 6; i < 12; ++i) ok = ok && !concept_satisfied(terms, specs[static_cast<std::size_t>(i)]);
    ok = ok && concept_satisfied(terms, specs[12]) == query_positive;
    if (!ok) continue;

    e.meta.concept_terms = terms;
    std::string attr = terms[0].kind;
    for (std::size_t i = 1; i < terms.size(); ++i) attr += "+" + terms[i].kind;
    e.meta.attribute = attr;
    e.meta.panel_specs = specs;
    render_all(specs, &e.inputs);
    e.label = query_positive ? 1 : 0;
    return e;
  }
  throw generation_error("concept_contrast: predicate construction failed");
}

// ---------------------------------------------------------------------------
// ball motion
// ---------------------------------------------------------------------------

void sample_ball_state(Rng& rng, int num_balls, std::vector<double>* pos,
                       std::vector<double>* vel) {
  pos->clear();
  vel->clear();
  for (int b = 0; b < num_balls; ++b) {
    pos->push_back(rng.uniform(0.15, 0.85));
    pos->push_back(rng.uniform(0.15, 0.85));
    const double speed = rng.uniform(0.25, 0.55);
    const double angle = rng.uniform(0.0, 6.283185307179586);
    vel->push_back(speed * std::cos(angle));
    vel->push_back(speed * std::sin(angle));
  }
}

Trajectory to_trajectory(const std::vector<std::vector<double>>& frames, int num_balls) {
  Trajectory t;
  t.num_balls = num_balls;
  t.frames = static_cast<int>(frames.size());
  t.coords.reserve(frames.size() * static_cast<std::size_t>(num_balls) * 2);
  for (const auto& f : frames) {
    for (const double v : f) t.coords.push_back(static_cast<float>(v));
  }
  return t;
}

}  // namespace

const char* family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::grid_puzzle: return "grid_puzzle";
    case TaskFamily::odd_one_out: return "odd_one_out";
    case TaskFamily::same_different: return "same_different";
    case TaskFamily::concept_contrast: return "concept_contrast";
    case TaskFamily::ball_motion: return "ball_motion";
  }
  return "unknown";
}

TaskFamily family_from_name(const std::string& name) {
  for (const TaskFamily f :
       {TaskFamily::grid_puzzle, TaskFamily::odd_one_out, TaskFamily::same_different,
        TaskFamily::concept_contrast, TaskFamily::ball_motion}) {
    if (name == family_name(f)) return f;
  }
  throw config_error("unknown task family: " + name);
}

double ball_sim_dt() { return kBallDt; }

BallSim::BallSim(std::vector<double> positions, std::vector<double> velocities,
                 double restitution)
    : pos_(std::move(positions)), vel_(std::move(velocities)), restitution_(restitution) {}

void BallSim::step(double dt) {
  for (std::size_t i = 0; i < pos_.size(); ++i) {
    pos_[i] += vel_[i] * dt;
    // Mirror reflection keeps every coordinate inside [0,1]; the reflected
    // velocity component is scaled by the restitution.
    while (pos_[i] < 0.0 || pos_[i] > 1.0) {
      if (pos_[i] < 0.0) {
        pos_[i] = -pos_[i];
        vel_[i] = -restitution_ * vel_[i];
      } else {
        pos_[i] = 2.0 - pos_[i];
        vel_[i] = -restitution_ * vel_[i];
      }
    }
  }
}

Trajectory simulate_balls(const std::vector<double>& positions,
                          const std::vector<double>& velocities, int frames, double restitution) {
  BallSim sim(positions, velocities, restitution);
  std::vector<std::vector<double>> out;
  out.push_back(sim.positions());
  for (int t = 1; t < frames; ++t) {
    sim.step(kBallDt);
    out.push_back(sim.positions());
  }
  return to_trajectory(out, static_cast<int>(positions.size() / 2));
}

Trajectory simulate_intervened(const std::vector<double>& positions,
                               const std::vector<double>& velocities,
                               const std::vector<double>& offsets, int frames,
                               double restitution) {
  std::vector<double> moved = positions;
  for (std::size_t i = 0; i < moved.size(); ++i) {
    moved[i] += offsets[i];
    if (moved[i] < 0.0 || moved[i] > 1.0) {
      throw generation_error("ball_motion: intervention pushes a ball outside the box");
    }
  }
  return simulate_balls(moved, velocities, frames, restitution);
}

Episode gen_ball_motion(std::uint64_t seed, const BallTaskConfig& cfg) {
  if (cfg.num_balls < 1 || cfg.num_balls > 6) {
    throw config_error("ball_motion: num_balls must be in [1,6]");
  }
  if (cfg.frames < 2) throw config_error("ball_motion: need at least 2 frames");
  Rng rng(splitmix64(seed));
  Episode e;
  e.family = TaskFamily::ball_motion;
  e.seed = seed;

  std::vector<double> pos, vel;
  sample_ball_state(rng, cfg.num_balls, &pos, &vel);

  std::vector<double> offsets(pos.size());
  for (int b = 0; b < cfg.num_balls; ++b) {
    for (int d = 0; d < 2; ++d) {
      const std::size_t i = static_cast<std::size_t>(b) * 2 + static_cast<std::size_t>(d);
      double off;
      int attempts = 0;
      do {
        off = rng.uniform(-0.2, 0.2);
        if (++attempts > kMaxRetries) {
          throw generation_error("ball_motion: intervention sampling failed");
        }
      } while (pos[i] + off < 0.05 || pos[i] + off > 0.95);
      offsets[i] = off;
    }
  }

  e.observed = simulate_balls(pos, vel, cfg.frames, cfg.restitution);
  e.target = simulate_intervened(pos, vel, offsets, cfg.frames, cfg.restitution);
  e.intervened_init.num_balls = cfg.num_balls;
  e.intervened_init.frames = 1;
  e.intervened_init.coords.assign(e.target.coords.begin(),
                                  e.target.coords.begin() + cfg.num_balls * 2);
  e.meta.restitution = cfg.restitution;
  e.meta.do_offsets = offsets;
  e.meta.attribute = "ball_motion";
  e.label = -1;
  return e;
}

Episode gen_ball_motion(std::uint64_t seed, int num_balls, int frames) {
  BallTaskConfig cfg;
  cfg.num_balls = num_balls;
  cfg.frames = frames;
  return gen_ball_motion(seed, cfg);
}

Episode gen_grid_puzzle(std::uint64_t seed) { return make_grid_puzzle(seed); }
Episode gen_odd_one_out(std::uint64_t seed) { return make_odd_one_out(seed); }
Episode gen_same_different(std::uint64_t seed) { return make_same_different(seed); }
Episode gen_concept_contrast(std::uint64_t seed) { return make_concept_contrast(seed); }

Episode generate_episode(TaskFamily family, std::uint64_t seed, const BallTaskConfig& ball_cfg) {
  switch (family) {
    case TaskFamily::grid_puzzle: return gen_grid_puzzle(seed);
    case TaskFamily::odd_one_out: return gen_odd_one_out(seed);
    case TaskFamily::same_different: return gen_same_different(seed);
    case TaskFamily::concept_contrast: return gen_concept_contrast(seed);
    case TaskFamily::ball_motion: return gen_ball_motion(seed, ball_cfg);
  }
  throw config_error("generate_episode: unknown family");
}

bool verify_episode(const Episode& e) {
  switch (e.family) {
    case TaskFamily::grid_puzzle: {
      if (e.label < 0 || e.label >= static_cast<std::int64_t>(e.candidates.size())) return false;
      if (e.meta.candidate_specs.size() != 8 || e.meta.panel_specs.size() != 8) return false;
      const GridContext g = grid_context_from_meta(e.meta);
      int accepted = 0, idx = -1;
      for (std::size_t i = 0; i < e.meta.candidate_specs.size(); ++i) {
        if (grid_candidate_ok(g, e.meta.candidate_specs[i])) {
          ++accepted;
          idx = static_cast<int>(i);
        }
      }
      return accepted == 1 && idx == e.label;
    }
    case TaskFamily::odd_one_out: {
      if (e.meta.panel_specs.size() != 4) return false;
      if (e.label < 0 || e.label >= 4) return false;
      if (find_outlier(e.meta.panel_specs, e.meta.attribute) != static_cast<int>(e.label)) {
        return false;
      }
      // No other attribute may carry a competing 3-vs-1 split.
      for (const char* attr : kOddAttributes) {
        if (e.meta.attribute == attr) continue;
        if (find_outlier(e.meta.panel_specs, attr) >= 0) return false;
      }
      return true;
    }
    case TaskFamily::same_different: {
      if (e.meta.panel_specs.size() != 1 || e.meta.panel_specs[0].objects.size() != 2) {
        return false;
      }
      const bool congruent = same_different_congruent(e.meta.panel_specs[0]);
      if (congruent != (e.label == 1)) return false;
      if (!congruent) {
        const auto& a = e.meta.panel_specs[0].objects[0];
        const auto& b = e.meta.panel_specs[0].objects[1];
        if (a.shape == b.shape) {
          const double ratio = std::max(a.size, b.size) / std::min(a.size, b.size);
          if (ratio < 1.25) return false;
        }
      }
      return true;
    }
    case TaskFamily::concept_contrast: {
      if (e.meta.panel_specs.size() != 13) return false;
      for (int i = 0; i < 6; ++i) {
        if (!concept_satisfied(e.meta.concept_terms, e.meta.panel_specs[static_cast<std::size_t>(i)])) {
          return false;
        }
      }
      for (int i = 6; i < 12; ++i) {
        if (concept_satisfied(e.meta.concept_terms, e.meta.panel_specs[static_cast<std::size_t>(i)])) {
          return false;
        }
      }
      return concept_satisfied(e.meta.concept_terms, e.meta.panel_specs[12]) == (e.label == 1);
    }
    case TaskFamily::ball_motion: {
      if (e.observed.frames != e.target.frames) return false;
      if (e.observed.num_balls != e.target.num_balls) return false;
      for (const float v : e.observed.coords) {
        if (v < 0.0f || v > 1.0f) return false;
      }
      for (const float v : e.target.coords) {
        if (v < 0.0f || v > 1.0f) return false;
      }
      // The counterfactual start must equal the observed start plus the
      // recorded do-operator offsets.
      for (int b = 0; b < e.target.num_balls; ++b) {
        for (int d = 0; d < 2; ++d) {
          const std::size_t i = static_cast<std::size_t>(b) * 2 + static_cast<std::size_t>(d);
          const double want = static_cast<double>(e.observed.coords[i]) + e.meta.do_offsets[i];
          if (std::abs(static_cast<double>(e.target.coords[i]) - want) > 1e-5) return false;
          if (std::abs(static_cast<double>(e.intervened_init.coords[i]) -
                       static_cast<double>(e.target.coords[i])) > 0.0f) {
            return false;
          }
        }
      }
      return true;
    }
  }
  return false;
}

std::vector<std::uint64_t> split_seeds(std::uint64_t root, TaskFamily family,
                                       const std::string& split, int count) {
  const std::uint64_t base = seed_split(root, family_name(family));
  std::uint64_t offset = 0;
  if (split == "train") {
    offset = 0;
  } else if (split == "val") {
    offset = 1ULL << 30;
  } else if (split == "test") {
    offset = 1ULL << 31;
  } else {
    throw config_error("unknown split: " + split);
  }
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    seeds[static_cast<std::size_t>(i)] = base + offset + static_cast<std::uint64_t>(i);
  }
  return seeds;
}

}  // namespace tsr
