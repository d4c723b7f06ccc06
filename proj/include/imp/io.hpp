#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "imp/segments.hpp"
#include "imp/types.hpp"

namespace imp {

/// Class table and evaluation conventions for one dataset. Loaded from a
/// JSON file; see docs/formats.md for the keys.
struct DatasetConfig {
  std::vector<std::string> class_names;
  std::uint16_t ignore = kDefaultIgnore;
  bool include_background = false;  // background row/column enters mIOU/mAcc
  int scale = 4;
  MaskDims mask_dims{28, 28};

  int num_classes() const { return static_cast<int>(class_names.size()); }
  LabelSpace label_space() const { return {num_classes(), ignore}; }
  /// Class id for a name; throws UnknownClassName.
  int class_id(std::string_view name) const;
  void validate() const;
};

DatasetConfig parse_dataset_config(std::string_view text);
DatasetConfig load_dataset_config(const std::filesystem::path& path);
std::string dataset_config_to_json(const DatasetConfig& config);

/// All detections of one image plus the image size they are projected onto.
struct ImageDetections {
  std::string image_id;
  int height = 0;
  int width = 0;
  std::vector<Detection> detections;
};

struct DetectionFileOptions {
  /// Used for images that are not declared in an "images" table. Zero means
  /// "must be declared".
  int default_height = 0;
  int default_width = 0;
  /// Base for relative png_path masks.
  std::filesystem::path base_dir;
};

/// Parses the detection interchange format. Images come out sorted by id;
/// detection indices follow file order within each image. Errors:
/// ParseError (message carries the byte offset), ValidationError (names the
/// record index, cause() has the field-level code), UnknownClassName.
std::vector<ImageDetections> parse_detections(std::string_view text, const DatasetConfig& config,
                                              const DetectionFileOptions& options = {});
std::vector<ImageDetections> load_detections(const std::filesystem::path& path,
                                             const DatasetConfig& config,
                                             DetectionFileOptions options = {});

enum class MaskEncoding { Dense, Rle };

/// Writes the object form {"images": [...], "detections": [...]}. RLE
/// encoding binarizes masks at 0.5.
std::string detections_to_json(const std::vector<ImageDetections>& images,
                               const DatasetConfig& config,
                               MaskEncoding encoding = MaskEncoding::Dense);

/// COCO-style uncompressed RLE: column-major run lengths, starting with a
/// (possibly empty) run of zeros. `mask` is row-major h x w, nonzero = set.
std::vector<std::uint32_t> encode_rle(const std::vector<std::uint8_t>& mask, int h, int w);
std::vector<std::uint8_t> decode_rle(const std::vector<std::uint32_t>& counts, int h, int w);

/// Single-channel 8- or 16-bit PNG; pixel values are label ids verbatim.
/// Values above background that are not `space.ignore` raise LabelOutOfRange.
LabelMap load_labelmap(const std::filesystem::path& path, const LabelSpace& space);
/// 8-bit when every possible label fits, otherwise 16-bit.
void save_labelmap(const LabelMap& labels, const std::filesystem::path& path);

/// Grayscale 8-bit PNG mask, value / 255.
InstanceMask load_mask_png(const std::filesystem::path& path);

/// Raw canvas dump: three little-endian uint32 (C, Hc, Wc) followed by
/// C*Hc*Wc little-endian IEEE-754 float32 values, row-major.
void write_canvas_dump(const Tensor3<float>& canvas, const std::filesystem::path& path);
Tensor3<float> read_canvas_dump(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace imp
