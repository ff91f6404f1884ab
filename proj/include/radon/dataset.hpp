#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "radon/tensor.hpp"

namespace radon {

enum class Split { unassigned, known, novel };

std::string to_string(Split s);

struct ImageRecord {
  std::string path;  // as written in the manifest
  std::string class_id;
  int domain = 0;  // 0 or 1
};

struct PreprocessSpec {
  double crop_top_fraction = 1.0;  // keep the top fraction of rows
  int output_height = 64;
  int output_width = 64;
  bool grayscale = true;
  // normalization is fixed: (x/255 - 0.5) * 2 into [-1, 1]
};

/// One training/eval unit: a domain-0 image, a domain-1 image, match label.
struct PairSample {
  Tensor tensor_a;  // domain 0
  Tensor tensor_b;  // domain 1
  int label = 0;    // 1 iff class_a == class_b
  std::string class_a;
  std::string class_b;
};

/// Immutable view of a manifest: records, per-class/domain image lists and
/// the known/novel split assignment.
class DatasetIndex {
 public:
  /// Parses and validates manifest CSV (image_path,class_id,domain[,split]).
  /// Rows are checked for domain flags, duplicate paths, dangling file
  /// references and split consistency; errors cite the offending line.
  static DatasetIndex load(const std::string& manifest_path);

  /// Uniformly samples novel_count classes (seeded, without replacement)
  /// as the novel set; everything else becomes known.
  void split_classes(int novel_count, uint64_t seed);

  /// Rewrites the manifest with the split column filled in.
  void write_manifest(const std::string& path) const;

  const std::vector<ImageRecord>& records() const { return records_; }
  const std::string& manifest_path() const { return manifest_path_; }
  std::string resolve_path(size_t record_index) const;

  const std::vector<std::string>& classes() const { return classes_; }  // sorted
  size_t class_count() const { return classes_.size(); }
  Split class_split(const std::string& class_id) const;
  bool has_split() const;

  /// Record indices of a class's images in one domain (may be empty).
  const std::vector<int>& images(const std::string& class_id, int domain) const;
  /// Classes with at least one image in each domain, optionally filtered
  /// by split flag; sorted.
  std::vector<std::string> positive_capable_classes(std::optional<Split> filter = {}) const;

  std::vector<std::string> classes_of(Split s) const;  // sorted

 private:
  std::string manifest_path_;
  std::string base_dir_;
  std::vector<ImageRecord> records_;
  std::vector<std::string> classes_;
  std::map<std::string, Split> split_;
  std::map<std::string, std::vector<int>> images_by_class_domain_[2];
};

struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 (PGM) or 3 (PPM)
  std::vector<uint8_t> pixels;  // row-major, interleaved channels
};

/// Binary PGM (P5) / PPM (P6), 8-bit maxval only.
RawImage read_pnm(const std::string& path);
void write_pgm(const std::string& path, int width, int height, const std::vector<uint8_t>& pixels);

/// Crop top rows, optional luma conversion, nearest-neighbour resize,
/// normalize to [-1,1]. Returns [C, H, W].
Tensor load_image(const std::string& path, const PreprocessSpec& spec);
Tensor preprocess_image(const RawImage& img, const PreprocessSpec& spec);

struct SyntheticSpec {
  int n_classes = 16;
  int images_per_class_per_domain = 10;
  uint64_t seed = 1;
  int image_size = 64;
};

/// Two-domain synthetic benchmark: one procedural glyph per class.
/// Domain 0 renders it grayscale with translation/rotation/brightness
/// jitter; domain 1 renders the same geometry intensity-inverted and
/// 3x3 box blurred, with independent jitter. Returns the manifest path.
std::string make_synthetic(const std::string& out_dir, const SyntheticSpec& spec);

}  // namespace radon
