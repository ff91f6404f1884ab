#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "radon/dataset.hpp"

namespace fs = std::filesystem;

namespace radon {

namespace {

constexpr double kBackground = 0.08;

enum class PrimKind { rect, ellipse, stroke };

struct Primitive {
  PrimKind kind;
  double x0, y0;   // rect/ellipse: center; stroke: first endpoint
  double x1, y1;   // stroke: second endpoint
  double rx, ry;   // rect/ellipse: half extents; stroke: rx = half thickness
  double intensity;
};

// Class geometry is fixed by (seed, class); only jitter varies per image.
std::vector<Primitive> make_glyph(uint64_t seed, int class_idx) {
  Rng rng(mix_seed(seed, 0x676c796full, static_cast<uint64_t>(class_idx)));
  const int count = 2 + static_cast<int>(rng_below(rng, 3));
  std::vector<Primitive> prims;
  prims.reserve(count);
  for (int i = 0; i < count; ++i) {
    Primitive p{};
    p.kind = static_cast<PrimKind>(rng_below(rng, 3));
    p.intensity = 0.40 + 0.60 * rng_unit_double(rng);
    if (p.kind == PrimKind::stroke) {
      p.x0 = 0.15 + 0.70 * rng_unit_double(rng);
      p.y0 = 0.15 + 0.70 * rng_unit_double(rng);
      p.x1 = 0.15 + 0.70 * rng_unit_double(rng);
      p.y1 = 0.15 + 0.70 * rng_unit_double(rng);
      p.rx = 0.03 + 0.05 * rng_unit_double(rng);
    } else {
      p.x0 = 0.25 + 0.50 * rng_unit_double(rng);
      p.y0 = 0.25 + 0.50 * rng_unit_double(rng);
      p.rx = 0.08 + 0.22 * rng_unit_double(rng);
      p.ry = 0.08 + 0.22 * rng_unit_double(rng);
    }
    prims.push_back(p);
  }
  return prims;
}

double point_segment_dist2(double px, double py, double x0, double y0, double x1, double y1) {
  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = x0 + t * dx, cy = y0 + t * dy;
  return (px - cx) * (px - cx) + (py - cy) * (py - cy);
}

double glyph_value(const std::vector<Primitive>& prims, double x, double y) {
  double v = kBackground;
  for (const auto& p : prims) {
    bool inside = false;
    switch (p.kind) {
      case PrimKind::rect:
        inside = std::fabs(x - p.x0) <= p.rx && std::fabs(y - p.y0) <= p.ry;
        break;
      case PrimKind::ellipse: {
        const double nx = (x - p.x0) / p.rx, ny = (y - p.y0) / p.ry;
        inside = nx * nx + ny * ny <= 1.0;
        break;
      }
      case PrimKind::stroke:
        inside = point_segment_dist2(x, y, p.x0, p.y0, p.x1, p.y1) <= p.rx * p.rx;
        break;
    }
    if (inside) v = p.intensity;  // painter's order
  }
  return v;
}

struct Jitter {
  double dx, dy;      // translation, fraction of width
  double angle;       // radians
  double scale, off;  // brightness
};

Jitter sample_jitter(Rng& rng) {
  Jitter j{};
  j.dx = (2.0 * rng_unit_double(rng) - 1.0) * 0.10;   // <= 10% of width
  j.dy = (2.0 * rng_unit_double(rng) - 1.0) * 0.10;
  j.angle = (2.0 * rng_unit_double(rng) - 1.0) * (10.0 * M_PI / 180.0);  // <= 10 degrees
  j.scale = 0.90 + 0.20 * rng_unit_double(rng);
  j.off = (2.0 * rng_unit_double(rng) - 1.0) * 0.05;
  return j;
}

std::vector<double> render(const std::vector<Primitive>& prims, int size, const Jitter& j,
                           bool invert) {
  std::vector<double> plane(static_cast<size_t>(size) * size);
  const double ca = std::cos(-j.angle), sa = std::sin(-j.angle);
  for (int py = 0; py < size; ++py) {
    for (int px = 0; px < size; ++px) {
      // pixel center -> unit coords, undo translation, rotate about center
      const double u = (px + 0.5) / size - j.dx;
      const double v = (py + 0.5) / size - j.dy;
      const double rx = 0.5 + ca * (u - 0.5) - sa * (v - 0.5);
      const double ry = 0.5 + sa * (u - 0.5) + ca * (v - 0.5);
      double val = glyph_value(prims, rx, ry);
      if (invert) val = 1.0 - val;
      val = std::clamp(val * j.scale + j.off, 0.0, 1.0);
      plane[static_cast<size_t>(py) * size + px] = val;
    }
  }
  return plane;
}

std::vector<double> box_blur3(const std::vector<double>& in, int size) {
  std::vector<double> out(in.size());
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double acc = 0.0;
      int count = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= size || xx < 0 || xx >= size) continue;
          acc += in[static_cast<size_t>(yy) * size + xx];
          ++count;
        }
      }
      out[static_cast<size_t>(y) * size + x] = acc / count;
    }
  }
  return out;
}

std::vector<uint8_t> quantize(const std::vector<double>& plane) {
  std::vector<uint8_t> out(plane.size());
  for (size_t i = 0; i < plane.size(); ++i) {
    out[i] = static_cast<uint8_t>(std::lround(std::clamp(plane[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

std::string class_name(int idx) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "c%03d", idx);
  return buf;
}

}  // namespace

std::string make_synthetic(const std::string& out_dir, const SyntheticSpec& spec) {
  if (spec.n_classes < 2) {
    throw ValidationError(detail::msg("need at least 2 classes, got ", spec.n_classes));
  }
  if (spec.images_per_class_per_domain < 1) {
    throw ValidationError("images_per_class_per_domain must be >= 1");
  }
  if (spec.image_size < 8) throw ValidationError("image_size must be >= 8");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError(detail::msg("cannot create output directory ", out_dir));
  }

  const fs::path dir(out_dir);
  const std::string manifest_path = (dir / "manifest.csv").string();
  std::ofstream manifest(manifest_path, std::ios::trunc);
  if (!manifest) throw IoError(detail::msg("cannot write manifest ", manifest_path));
  manifest << "image_path,class_id,domain,split\n";

  for (int cls = 0; cls < spec.n_classes; ++cls) {
    const auto prims = make_glyph(spec.seed, cls);
    for (int domain = 0; domain < 2; ++domain) {
      for (int i = 0; i < spec.images_per_class_per_domain; ++i) {
        Rng rng(mix_seed(spec.seed, 0x6a697474ull + domain, static_cast<uint64_t>(cls),
                         static_cast<uint64_t>(i)));
        const Jitter j = sample_jitter(rng);
        auto plane = render(prims, spec.image_size, j, domain == 1);
        if (domain == 1) plane = box_blur3(plane, spec.image_size);
        const std::string file =
            detail::msg(class_name(cls), "_d", domain, "_", i, ".pgm");
        write_pgm((dir / file).string(), spec.image_size, spec.image_size, quantize(plane));
        manifest << file << "," << class_name(cls) << "," << domain << ",\n";
      }
    }
  }
  manifest.close();

  nlohmann::json meta{{"n_classes", spec.n_classes},
                      {"images_per_class_per_domain", spec.images_per_class_per_domain},
                      {"seed", spec.seed},
                      {"image_size", spec.image_size}};
  std::ofstream mf((dir / "synthetic_meta.json").string(), std::ios::trunc);
  mf << meta.dump(2) << "\n";
  return manifest_path;
}

}  // namespace radon
