#include "radon/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace radon {

std::string to_string(Split s) {
  switch (s) {
    case Split::known:
      return "known";
    case Split::novel:
      return "novel";
    default:
      return "";
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void row_error(const std::string& path, size_t line_no, const std::string& why) {
  throw ValidationError(detail::msg(path, ":", line_no, ": ", why));
}

}  // namespace

DatasetIndex DatasetIndex::load(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw IoError(detail::msg("cannot open manifest ", manifest_path));

  DatasetIndex idx;
  idx.manifest_path_ = manifest_path;
  idx.base_dir_ = fs::path(manifest_path).parent_path().string();

  std::string line;
  size_t line_no = 0;
  bool header_seen = false;
  bool header_has_split = false;
  std::map<std::string, size_t> seen_paths;

  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto cols = split_csv_line(line);
    if (!header_seen) {
      if (cols.size() == 4 && cols[0] == "image_path" && cols[1] == "class_id" &&
          cols[2] == "domain" && cols[3] == "split") {
        header_has_split = true;
      } else if (cols.size() == 3 && cols[0] == "image_path" && cols[1] == "class_id" &&
                 cols[2] == "domain") {
        header_has_split = false;
      } else {
        row_error(manifest_path, line_no,
                  "header must be image_path,class_id,domain[,split]");
      }
      header_seen = true;
      continue;
    }

    const size_t want = header_has_split ? 4 : 3;
    if (cols.size() != want) {
      row_error(manifest_path, line_no,
                detail::msg("expected ", want, " columns, got ", cols.size()));
    }
    ImageRecord rec;
    rec.path = cols[0];
    rec.class_id = cols[1];
    if (rec.path.empty()) row_error(manifest_path, line_no, "empty image_path");
    if (rec.class_id.empty()) row_error(manifest_path, line_no, "empty class_id");
    if (cols[2] != "0" && cols[2] != "1") {
      row_error(manifest_path, line_no, detail::msg("domain must be 0 or 1, got '", cols[2], "'"));
    }
    rec.domain = cols[2] == "1" ? 1 : 0;

    Split row_split = Split::unassigned;
    if (header_has_split && !cols[3].empty()) {
      if (cols[3] == "known")
        row_split = Split::known;
      else if (cols[3] == "novel")
        row_split = Split::novel;
      else
        row_error(manifest_path, line_no,
                  detail::msg("split must be empty, 'known' or 'novel', got '", cols[3], "'"));
    }

    if (auto it = seen_paths.find(rec.path); it != seen_paths.end()) {
      row_error(manifest_path, line_no,
                detail::msg("duplicate image_path '", rec.path, "' (first at line ", it->second, ")"));
    }
    seen_paths[rec.path] = line_no;

    const fs::path resolved =
        fs::path(rec.path).is_absolute() ? fs::path(rec.path) : fs::path(idx.base_dir_) / rec.path;
    if (!fs::exists(resolved)) {
      row_error(manifest_path, line_no, detail::msg("file not found: ", resolved.string()));
    }

    auto split_it = idx.split_.find(rec.class_id);
    if (split_it == idx.split_.end()) {
      idx.split_[rec.class_id] = row_split;
    } else if (split_it->second != row_split) {
      row_error(manifest_path, line_no,
                detail::msg("class '", rec.class_id, "' has inconsistent split assignments"));
    }

    const int rec_idx = static_cast<int>(idx.records_.size());
    idx.images_by_class_domain_[rec.domain][rec.class_id].push_back(rec_idx);
    idx.records_.push_back(std::move(rec));
  }
  if (!header_seen) throw ValidationError(detail::msg(manifest_path, ": empty manifest"));
  if (idx.records_.empty()) throw ValidationError(detail::msg(manifest_path, ": no data rows"));

  idx.classes_.reserve(idx.split_.size());
  for (const auto& [c, s] : idx.split_) idx.classes_.push_back(c);
  return idx;
}

void DatasetIndex::split_classes(int novel_count, uint64_t seed) {
  const int total = static_cast<int>(classes_.size());
  if (novel_count <= 0 || novel_count >= total) {
    throw ValidationError(detail::msg("novel_count must be in (0, ", total, "), got ",
                                      novel_count));
  }
  std::vector<std::string> pool = classes_;  // sorted, deterministic base order
  Rng rng(mix_seed(seed, 0x73706c69ull));
  // partial Fisher-Yates: the first novel_count slots become the novel set
  for (int i = 0; i < novel_count; ++i) {
    const size_t j = i + static_cast<size_t>(rng_below(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  for (auto& [c, s] : split_) s = Split::known;
  for (int i = 0; i < novel_count; ++i) split_[pool[i]] = Split::novel;
}

void DatasetIndex::write_manifest(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(detail::msg("cannot write manifest ", path));
  f << "image_path,class_id,domain,split\n";
  for (const auto& r : records_) {
    f << r.path << "," << r.class_id << "," << r.domain << ","
      << to_string(split_.at(r.class_id)) << "\n";
  }
  if (!f) throw IoError(detail::msg("short write on manifest ", path));
}

std::string DatasetIndex::resolve_path(size_t record_index) const {
  const auto& p = records_.at(record_index).path;
  if (fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir_) / p).string();
}

Split DatasetIndex::class_split(const std::string& class_id) const {
  auto it = split_.find(class_id);
  if (it == split_.end()) throw ValidationError(detail::msg("unknown class '", class_id, "'"));
  return it->second;
}

bool DatasetIndex::has_split() const {
  for (const auto& [c, s] : split_) {
    if (s == Split::unassigned) return false;
  }
  return true;
}

const std::vector<int>& DatasetIndex::images(const std::string& class_id, int domain) const {
  static const std::vector<int> empty;
  if (domain != 0 && domain != 1) throw ValidationError("domain must be 0 or 1");
  auto it = images_by_class_domain_[domain].find(class_id);
  return it == images_by_class_domain_[domain].end() ? empty : it->second;
}

std::vector<std::string> DatasetIndex::positive_capable_classes(std::optional<Split> filter) const {
  std::vector<std::string> out;
  for (const auto& c : classes_) {
    if (filter && split_.at(c) != *filter) continue;
    if (!images(c, 0).empty() && !images(c, 1).empty()) out.push_back(c);
  }
  return out;
}

std::vector<std::string> DatasetIndex::classes_of(Split s) const {
  std::vector<std::string> out;
  for (const auto& c : classes_) {
    if (split_.at(c) == s) out.push_back(c);
  }
  return out;
}

// --- PNM io -------------------------------------------------------------------

namespace {

int read_pnm_token(std::istream& in, const std::string& path) {
  // skips whitespace and '#' comments, then reads a decimal token
  int c = in.get();
  for (;;) {
    while (c != EOF && std::isspace(c)) c = in.get();
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    break;
  }
  if (c == EOF || !std::isdigit(c)) {
    throw IoError(detail::msg(path, ": malformed PNM header"));
  }
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > 1 << 20) throw IoError(detail::msg(path, ": absurd PNM header value"));
    c = in.get();
  }
  if (c != EOF) in.unget();
  return static_cast<int>(v);
}

}  // namespace

RawImage read_pnm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(detail::msg("cannot open image ", path));
  char m0 = 0, m1 = 0;
  f.get(m0);
  f.get(m1);
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) {
    throw IoError(detail::msg(path, ": unsupported image format (need binary PGM P5 or PPM P6)"));
  }
  RawImage img;
  img.channels = m1 == '6' ? 3 : 1;
  img.width = read_pnm_token(f, path);
  img.height = read_pnm_token(f, path);
  const int maxval = read_pnm_token(f, path);
  if (img.width < 1 || img.height < 1) throw IoError(detail::msg(path, ": empty image"));
  if (maxval != 255) {
    throw IoError(detail::msg(path, ": only maxval 255 is supported, got ", maxval));
  }
  f.get();  // single whitespace byte after maxval
  const size_t n = static_cast<size_t>(img.width) * img.height * img.channels;
  img.pixels.resize(n);
  f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(f.gcount()) != n) {
    throw IoError(detail::msg(path, ": truncated pixel payload"));
  }
  return img;
}

void write_pgm(const std::string& path, int width, int height,
               const std::vector<uint8_t>& pixels) {
  if (pixels.size() != static_cast<size_t>(width) * height) {
    throw ValidationError("write_pgm: pixel count does not match dimensions");
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(detail::msg("cannot write image ", path));
  f << "P5\n" << width << " " << height << "\n255\n";
  f.write(reinterpret_cast<const char*>(pixels.data()),
          static_cast<std::streamsize>(pixels.size()));
  if (!f) throw IoError(detail::msg("short write on image ", path));
}

// --- preprocessing --------------------------------------------------------------

Tensor preprocess_image(const RawImage& img, const PreprocessSpec& spec) {
  if (spec.crop_top_fraction <= 0.0 || spec.crop_top_fraction > 1.0) {
    throw ConfigError(detail::msg("crop_top_fraction must be in (0,1], got ",
                                  spec.crop_top_fraction));
  }
  if (spec.output_height < 1 || spec.output_width < 1) {
    throw ConfigError("preprocess output dims must be >= 1");
  }
  const int crop_h = static_cast<int>(std::floor(img.height * spec.crop_top_fraction));
  if (crop_h < 1) {
    throw ValidationError(detail::msg("crop of fraction ", spec.crop_top_fraction, " over ",
                                      img.height, " rows is empty"));
  }

  // channel planes in [0,255], cropped
  const int out_c = spec.grayscale ? 1 : 3;
  std::vector<std::vector<float>> planes(out_c,
                                         std::vector<float>(static_cast<size_t>(crop_h) * img.width));
  for (int y = 0; y < crop_h; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const size_t src = (static_cast<size_t>(y) * img.width + x) * img.channels;
      const size_t dst = static_cast<size_t>(y) * img.width + x;
      if (spec.grayscale) {
        float v;
        if (img.channels == 3) {
          v = static_cast<float>(0.299 * img.pixels[src] + 0.587 * img.pixels[src + 1] +
                                 0.114 * img.pixels[src + 2]);
        } else {
          v = img.pixels[src];
        }
        planes[0][dst] = v;
      } else {
        for (int c = 0; c < 3; ++c) {
          planes[c][dst] = img.channels == 3 ? img.pixels[src + c] : img.pixels[src];
        }
      }
    }
  }

  const int oh = spec.output_height, ow = spec.output_width;
  std::vector<float> out(static_cast<size_t>(out_c) * oh * ow);
  for (int c = 0; c < out_c; ++c) {
    for (int y = 0; y < oh; ++y) {
      const int sy = static_cast<int>(static_cast<int64_t>(y) * crop_h / oh);
      for (int x = 0; x < ow; ++x) {
        const int sx = static_cast<int>(static_cast<int64_t>(x) * img.width / ow);
        const float v = planes[c][static_cast<size_t>(sy) * img.width + sx];
        out[(static_cast<size_t>(c) * oh + y) * ow + x] = (v / 255.0f - 0.5f) * 2.0f;
      }
    }
  }
  return Tensor::from_data({out_c, oh, ow}, std::move(out));
}

Tensor load_image(const std::string& path, const PreprocessSpec& spec) {
  return preprocess_image(read_pnm(path), spec);
}

}  // namespace radon
