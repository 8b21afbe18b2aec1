#include "tsr/episode_io.hpp"

#include <cstring>
#include <fstream>

#include "tsr/errors.hpp"

namespace tsr {

namespace {

void put_u32(std::string* buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string* buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i64(std::string* buf, std::int64_t v) { put_u64(buf, static_cast<std::uint64_t>(v)); }

void put_f32(std::string* buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

struct Reader {
  const unsigned char* p;
  std::size_t n;
  std::size_t pos = 0;

  void need(std::size_t k, const char* what) const {
    if (pos + k > n) throw io_error(std::string("episode batch truncated reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::size_t remaining() const { return n - pos; }
};

void append_image(std::string* rec, const RasterImage& img) {
  put_u32(rec, static_cast<std::uint32_t>(img.width));
  put_u32(rec, static_cast<std::uint32_t>(img.height));
  for (const float v : img.pixels) put_f32(rec, v);
}

int input_count_for(TaskFamily family) {
  switch (family) {
    case TaskFamily::grid_puzzle: return 8;
    case TaskFamily::odd_one_out: return 0;
    case TaskFamily::same_different: return 1;
    case TaskFamily::concept_contrast: return 13;
    case TaskFamily::ball_motion: return 0;
  }
  return 0;
}

}  // namespace

void write_episode_batch(const std::string& path, TaskFamily family,
                         const std::vector<Episode>& episodes) {
  std::string out;
  out.append("TSRE");
  put_u32(&out, kEpisodeFormatVersion);
  put_u32(&out, static_cast<std::uint32_t>(family));
  put_u32(&out, static_cast<std::uint32_t>(episodes.size()));

  for (const auto& e : episodes) {
    if (e.family != family) throw data_error("write_episode_batch: mixed families in one batch");
    std::string rec;
    put_u64(&rec, e.seed);
    put_i64(&rec, e.label);
    put_u32(&rec, static_cast<std::uint32_t>(e.inputs.size() + e.candidates.size()));
    for (const auto& img : e.inputs) append_image(&rec, img);
    for (const auto& img : e.candidates) append_image(&rec, img);
    if (e.family == TaskFamily::ball_motion) {
      put_u32(&rec, static_cast<std::uint32_t>(e.observed.frames + e.target.frames));
      put_u32(&rec, static_cast<std::uint32_t>(e.observed.num_balls));
      for (const float v : e.observed.coords) put_f32(&rec, v);
      for (const float v : e.target.coords) put_f32(&rec, v);
    }
    put_u32(&out, static_cast<std::uint32_t>(rec.size()));
    out.append(rec);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw io_error("write failed: " + path);
}

std::vector<Episode> read_episode_batch(const std::string& path, TaskFamily* family_out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open episode batch: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), "TSRE", 4) != 0) {
    throw io_error("bad magic in episode batch: " + path);
  }
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != kEpisodeFormatVersion) {
    throw io_error("unsupported episode batch version " + std::to_string(version));
  }
  const auto family = static_cast<TaskFamily>(r.u32("family"));
  if (family_out) *family_out = family;
  const std::uint32_t count = r.u32("count");
  const int n_inputs = input_count_for(family);

  std::vector<Episode> episodes;
  episodes.reserve(count);
  for (std::uint32_t idx = 0; idx < count; ++idx) {
    const std::uint32_t rec_len = r.u32("record length");
    r.need(rec_len, "record body");
    Reader rec{r.p + r.pos, rec_len};
    r.pos += rec_len;

    Episode e;
    e.family = family;
    e.seed = rec.u64("seed");
    e.label = static_cast<std::int64_t>(rec.u64("label"));
    const std::uint32_t image_count = rec.u32("image count");
    std::vector<RasterImage> images;
    images.reserve(image_count);
    for (std::uint32_t i = 0; i < image_count; ++i) {
      RasterImage img;
      img.width = static_cast<int>(rec.u32("image width"));
      img.height = static_cast<int>(rec.u32("image height"));
      const std::size_t npix = static_cast<std::size_t>(img.width) * img.height;
      img.pixels.resize(npix);
      for (std::size_t j = 0; j < npix; ++j) img.pixels[j] = rec.f32("pixel");
      images.push_back(std::move(img));
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (static_cast<int>(i) < n_inputs) {
        e.inputs.push_back(std::move(images[i]));
      } else {
        e.candidates.push_back(std::move(images[i]));
      }
    }
    if (rec.remaining() > 0) {
      const std::uint32_t frames2 = rec.u32("trajectory frames");
      const std::uint32_t nb = rec.u32("trajectory balls");
      if (frames2 % 2 != 0) throw io_error("trajectory frame count must be even");
      const int t = static_cast<int>(frames2 / 2);
      e.observed.frames = t;
      e.observed.num_balls = static_cast<int>(nb);
      e.target.frames = t;
      e.target.num_balls = static_cast<int>(nb);
      const std::size_t per = static_cast<std::size_t>(t) * nb * 2;
      e.observed.coords.resize(per);
      e.target.coords.resize(per);
      for (std::size_t j = 0; j < per; ++j) e.observed.coords[j] = rec.f32("coord");
      for (std::size_t j = 0; j < per; ++j) e.target.coords[j] = rec.f32("coord");
      e.intervened_init.num_balls = static_cast<int>(nb);
      e.intervened_init.frames = 1;
      e.intervened_init.coords.assign(e.target.coords.begin(),
                                      e.target.coords.begin() + nb * 2);
    }
    episodes.push_back(std::move(e));
  }
  return episodes;
}

}  // namespace tsr
