#include "imp/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace imp {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

namespace {

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError,
                "malformed JSON at byte offset " + std::to_string(e.byte) + ": " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset config

int DatasetConfig::class_id(std::string_view name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == name) return static_cast<int>(i);
  throw Error(ErrorCode::UnknownClassName, "unknown class name '" + std::string(name) + "'");
}

void DatasetConfig::validate() const {
  if (class_names.empty()) throw Error(ErrorCode::ParseError, "config: 'classes' is empty");
  std::set<std::string> unique(class_names.begin(), class_names.end());
  if (unique.size() != class_names.size())
    throw Error(ErrorCode::ParseError, "config: class names must be unique");
  validate_label_space(label_space());
  if (scale < 1) throw Error(ErrorCode::ParseError, "config: 'scale' must be >= 1");
  if (!mask_dims.native() && (mask_dims.h < 1 || mask_dims.w < 1))
    throw Error(ErrorCode::ParseError, "config: 'mask_dims' must be positive");
}

DatasetConfig parse_dataset_config(std::string_view text) {
  const json j = parse_json(text);
  DatasetConfig config;
  try {
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "config: expected a JSON object");
    config.class_names = j.at("classes").get<std::vector<std::string>>();
    config.ignore = j.value("ignore_label", static_cast<int>(kDefaultIgnore));
    config.include_background = j.value("include_background", false);
    config.scale = j.value("scale", 4);
    if (j.contains("mask_dims")) {
      const auto dims = j.at("mask_dims").get<std::vector<int>>();
      if (dims.size() != 2) throw Error(ErrorCode::ParseError, "config: 'mask_dims' needs [h, w]");
      config.mask_dims = {dims[0], dims[1]};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  config.validate();
  return config;
}

DatasetConfig load_dataset_config(const fs::path& path) {
  return parse_dataset_config(read_text_file(path));
}

std::string dataset_config_to_json(const DatasetConfig& config) {
  json j;
  j["classes"] = config.class_names;
  j["ignore_label"] = config.ignore;
  j["include_background"] = config.include_background;
  j["scale"] = config.scale;
  j["mask_dims"] = {config.mask_dims.h, config.mask_dims.w};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// RLE

std::vector<std::uint32_t> encode_rle(const std::vector<std::uint8_t>& mask, int h, int w) {
  if (mask.size() != static_cast<std::size_t>(h) * w)
    throw Error(ErrorCode::ShapeMismatch, "rle: mask size does not match dims");
  std::vector<std::uint32_t> counts;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      const std::uint8_t v = mask[static_cast<std::size_t>(y) * w + x] ? 1 : 0;
      if (v != current) {
        counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  counts.push_back(run);
  return counts;
}

std::vector<std::uint8_t> decode_rle(const std::vector<std::uint32_t>& counts, int h, int w) {
  const std::uint64_t total = static_cast<std::uint64_t>(h) * w;
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  if (sum != total)
    throw Error(ErrorCode::RunSumMismatch, "rle: runs sum to " + std::to_string(sum) +
                                               ", expected " + std::to_string(total));
  std::vector<std::uint8_t> mask(total, 0);
  std::uint64_t pos = 0;
  std::uint8_t value = 0;
  for (auto c : counts) {
    for (std::uint32_t k = 0; k < c; ++k, ++pos) {
      const std::uint64_t x = pos / h;
      const std::uint64_t y = pos % h;
      mask[y * w + x] = value;
    }
    value ^= 1;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct PngResult {
  bool ok = false;
  int rows = 0;
  int cols = 0;
  int depth = 0;
  std::string error;
};

void png_error_to_jmp(png_structp png, png_const_charp) { std::longjmp(png_jmpbuf(png), 1); }

// libpng reports errors by longjmp; no object with a destructor may be
// created between setjmp and the end of the guarded region.
PngResult read_gray_png(const char* path, std::vector<std::uint16_t>& out) {
  PngResult result;
  FILE* fp = std::fopen(path, "rb");
  if (!fp) {
    result.error = "cannot open";
    return result;
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(png ? &png : nullptr, nullptr, nullptr);
    std::fclose(fp);
    result.error = "libpng init failed";
    return result;
  }
  png_set_error_fn(png, nullptr, &png_error_to_jmp, nullptr);
  std::vector<png_bytep>* volatile rows_ptr = nullptr;
  std::uint8_t* volatile pixels = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete rows_ptr;
    delete[] pixels;
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    result.ok = false;
    if (result.error.empty()) result.error = "corrupt or unsupported PNG";
    return result;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    result.error = "not a single-channel grayscale PNG";
    return result;
  }
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  out.assign(static_cast<std::size_t>(width) * height, 0);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  pixels = new std::uint8_t[rowbytes * height];
  rows_ptr = new std::vector<png_bytep>(height);
  for (png_uint_32 y = 0; y < height; ++y) (*rows_ptr)[y] = pixels + y * rowbytes;
  png_read_image(png, rows_ptr->data());
  png_read_end(png, nullptr);
  delete rows_ptr;
  rows_ptr = nullptr;
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  for (png_uint_32 y = 0; y < height; ++y) {
    const std::uint8_t* src = pixels + y * rowbytes;
    for (png_uint_32 x = 0; x < width; ++x) {
      std::uint16_t v;
      if (depth == 16) std::memcpy(&v, src + 2 * x, 2);
      else v = src[x];
      out[static_cast<std::size_t>(y) * width + x] = v;
    }
  }
  delete[] pixels;
  result.ok = true;
  result.rows = static_cast<int>(height);
  result.cols = static_cast<int>(width);
  result.depth = depth;
  return result;
}

bool write_gray_png(const char* path, const std::vector<std::uint8_t>& buffer, int rows, int cols,
                    int depth) {
  FILE* fp = std::fopen(path, "wb");
  if (!fp) return false;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(png ? &png : nullptr, nullptr);
    std::fclose(fp);
    return false;
  }
  png_set_error_fn(png, nullptr, &png_error_to_jmp, nullptr);
  std::vector<png_bytep>* volatile rows_ptr = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete rows_ptr;
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = static_cast<std::size_t>(cols) * (depth / 8);
  rows_ptr = new std::vector<png_bytep>(rows);
  for (int y = 0; y < rows; ++y)
    (*rows_ptr)[y] = const_cast<png_bytep>(buffer.data() + y * rowbytes);
  png_write_image(png, rows_ptr->data());
  png_write_end(png, nullptr);
  delete rows_ptr;
  png_destroy_write_struct(&png, &info);
  return std::fclose(fp) == 0;
}

}  // namespace

LabelMap load_labelmap(const fs::path& path, const LabelSpace& space) {
  std::vector<std::uint16_t> values;
  const PngResult r = read_gray_png(path.string().c_str(), values);
  if (!r.ok)
    throw Error(r.error == "cannot open" ? ErrorCode::IoError : ErrorCode::UnsupportedFormat,
                path.string() + ": " + r.error);
  LabelMap lm;
  lm.rows = r.rows;
  lm.cols = r.cols;
  lm.space = space;
  lm.labels = std::move(values);
  for (std::size_t i = 0; i < lm.labels.size(); ++i) {
    if (!space.valid(lm.labels[i]))
      throw Error(ErrorCode::LabelOutOfRange,
                  path.string() + ": value " + std::to_string(lm.labels[i]) + " at pixel " +
                      std::to_string(i) + " is neither a class, background (" +
                      std::to_string(space.background()) + ") nor ignore (" +
                      std::to_string(space.ignore) + ")");
  }
  return lm;
}

void save_labelmap(const LabelMap& labels, const fs::path& path) {
  const bool wide = labels.space.background() > 255 || labels.space.ignore > 255;
  const int depth = wide ? 16 : 8;
  std::vector<std::uint8_t> buffer(labels.size() * (wide ? 2 : 1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint16_t v = labels.labels[i];
    if (wide) {
      buffer[2 * i] = static_cast<std::uint8_t>(v >> 8);  // PNG is big-endian
      buffer[2 * i + 1] = static_cast<std::uint8_t>(v & 0xFF);
    } else {
      if (v > 255)
        throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(v) + " exceeds 8 bits");
      buffer[i] = static_cast<std::uint8_t>(v);
    }
  }
  if (!write_gray_png(path.string().c_str(), buffer, labels.rows, labels.cols, depth))
    throw Error(ErrorCode::IoError, "failed to write " + path.string());
}

InstanceMask load_mask_png(const fs::path& path) {
  std::vector<std::uint16_t> values;
  const PngResult r = read_gray_png(path.string().c_str(), values);
  if (!r.ok)
    throw Error(r.error == "cannot open" ? ErrorCode::IoError : ErrorCode::UnsupportedFormat,
                path.string() + ": " + r.error);
  InstanceMask mask(r.rows, r.cols);
  const float full = r.depth == 16 ? 65535.f : 255.f;
  for (std::size_t i = 0; i < values.size(); ++i)
    mask.values[i] = static_cast<float>(values[i]) / full;
  return mask;
}

// ---------------------------------------------------------------------------
// Canvas dump

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + k])) << (8 * k);
  return v;
}

}  // namespace

void write_canvas_dump(const Tensor3<float>& canvas, const fs::path& path) {
  std::string out;
  out.reserve(12 + canvas.data.size() * 4);
  put_u32(out, static_cast<std::uint32_t>(canvas.channels));
  put_u32(out, static_cast<std::uint32_t>(canvas.rows));
  put_u32(out, static_cast<std::uint32_t>(canvas.cols));
  for (float v : canvas.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  write_text_file(path, out);
}

Tensor3<float> read_canvas_dump(const fs::path& path) {
  const std::string in = read_text_file(path);
  if (in.size() < 12) throw Error(ErrorCode::UnsupportedFormat, path.string() + ": truncated header");
  Tensor3<float> t(static_cast<int>(get_u32(in, 0)), static_cast<int>(get_u32(in, 4)),
                   static_cast<int>(get_u32(in, 8)));
  if (in.size() != 12 + t.data.size() * 4)
    throw Error(ErrorCode::UnsupportedFormat, path.string() + ": payload size mismatch");
  for (std::size_t i = 0; i < t.data.size(); ++i)
    t.data[i] = std::bit_cast<float>(get_u32(in, 12 + 4 * i));
  return t;
}

// ---------------------------------------------------------------------------
// Detection JSON

namespace {

std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(ErrorCode::ParseError, "image_id must be a string or integer");
}

InstanceMask parse_mask(const json& m, const DetectionFileOptions& options) {
  if (!m.is_object()) throw Error(ErrorCode::ParseError, "'mask' must be an object");
  if (m.contains("png_path")) {
    fs::path p = m.at("png_path").get<std::string>();
    if (p.is_relative()) p = options.base_dir / p;
    InstanceMask mask = load_mask_png(p);
    if ((m.contains("h") && m.at("h").get<int>() != mask.h) ||
        (m.contains("w") && m.at("w").get<int>() != mask.w))
      throw Error(ErrorCode::ShapeMismatch, "mask png dims differ from declared h/w");
    return mask;
  }
  const int h = m.at("h").get<int>();
  const int w = m.at("w").get<int>();
  if (h < 1 || w < 1)
    throw Error(ErrorCode::ValidationError, ErrorCode::InvalidMaskValue,
                "mask: h and w must be >= 1");
  InstanceMask mask(h, w);
  if (m.contains("rle")) {
    const auto bits = decode_rle(m.at("rle").get<std::vector<std::uint32_t>>(), h, w);
    for (std::size_t i = 0; i < bits.size(); ++i) mask.values[i] = bits[i] ? 1.f : 0.f;
  } else if (m.contains("data")) {
    const auto& data = m.at("data");
    if (!data.is_array() || data.size() != static_cast<std::size_t>(h) * w)
      throw Error(ErrorCode::ShapeMismatch, "mask data length differs from h*w");
    for (std::size_t i = 0; i < data.size(); ++i)
      mask.values[i] = static_cast<float>(data[i].get<double>());
  } else {
    throw Error(ErrorCode::ParseError, "mask needs one of 'rle', 'png_path' or 'data'");
  }
  return mask;
}

}  // namespace

std::vector<ImageDetections> parse_detections(std::string_view text, const DatasetConfig& config,
                                              const DetectionFileOptions& options) {
  const json root = parse_json(text);
  std::map<std::string, ImageDetections> images;
  const json* records = nullptr;
  if (root.is_array()) {
    records = &root;
  } else if (root.is_object()) {
    try {
      if (root.contains("images")) {
        for (const auto& im : root.at("images")) {
          ImageDetections entry;
          entry.image_id = id_string(im.at("image_id"));
          entry.height = im.at("height").get<int>();
          entry.width = im.at("width").get<int>();
          if (entry.height < 1 || entry.width < 1)
            throw Error(ErrorCode::ParseError,
                        "image '" + entry.image_id + "': height and width must be >= 1");
          if (!images.emplace(entry.image_id, entry).second)
            throw Error(ErrorCode::ParseError, "image '" + entry.image_id + "' declared twice");
        }
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("images table: ") + e.what());
    }
    if (!root.contains("detections") || !root.at("detections").is_array())
      throw Error(ErrorCode::ParseError, "expected a 'detections' array");
    records = &root.at("detections");
  } else {
    throw Error(ErrorCode::ParseError, "expected a detection array or object");
  }

  for (std::size_t r = 0; r < records->size(); ++r) {
    const json& rec = (*records)[r];
    const std::string where = "record " + std::to_string(r) + ": ";
    try {
      if (!rec.is_object()) throw Error(ErrorCode::ParseError, "expected an object");
      const std::string image_id = id_string(rec.at("image_id"));
      auto it = images.find(image_id);
      if (it == images.end()) {
        if (options.default_height < 1 || options.default_width < 1)
          throw Error(ErrorCode::ValidationError,
                      "image '" + image_id + "' has no declared size");
        ImageDetections entry{image_id, options.default_height, options.default_width, {}};
        it = images.emplace(image_id, entry).first;
      }
      Detection d;
      const json& cls = rec.at("class");
      if (cls.is_string()) d.class_id = config.class_id(cls.get<std::string>());
      else d.class_id = cls.get<int>();
      d.score = static_cast<float>(rec.at("score").get<double>());
      const auto box = rec.at("bbox").get<std::vector<double>>();
      if (box.size() != 4) throw Error(ErrorCode::ParseError, "bbox needs 4 numbers");
      d.bbox = BBox{static_cast<float>(box[0]), static_cast<float>(box[1]),
                    static_cast<float>(box[2]), static_cast<float>(box[3])};
      d.mask = parse_mask(rec.at("mask"), options);
      d.index = static_cast<int>(it->second.detections.size());
      const CanvasSpec spec{config.num_classes(), it->second.height, it->second.width,
                            config.scale};
      try {
        validate_detection(d, spec);
      } catch (const Error& e) {
        throw Error(ErrorCode::ValidationError, e.code(), e.what());
      }
      it->second.detections.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, where + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), e.cause(), where + e.what());
    }
  }

  std::vector<ImageDetections> out;
  out.reserve(images.size());
  for (auto& [id, entry] : images) out.push_back(std::move(entry));
  return out;
}

std::vector<ImageDetections> load_detections(const fs::path& path, const DatasetConfig& config,
                                             DetectionFileOptions options) {
  if (options.base_dir.empty()) options.base_dir = path.parent_path();
  return parse_detections(read_text_file(path), config, options);
}

std::string detections_to_json(const std::vector<ImageDetections>& images,
                               const DatasetConfig& config, MaskEncoding encoding) {
  json out;
  out["images"] = json::array();
  out["detections"] = json::array();
  for (const auto& im : images) {
    out["images"].push_back({{"image_id", im.image_id}, {"height", im.height}, {"width", im.width}});
    for (const auto& d : im.detections) {
      json mask{{"h", d.mask.h}, {"w", d.mask.w}};
      if (encoding == MaskEncoding::Rle) {
        std::vector<std::uint8_t> bits(d.mask.values.size());
        for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = d.mask.values[i] >= 0.5f;
        mask["rle"] = encode_rle(bits, d.mask.h, d.mask.w);
      } else {
        json data = json::array();
        for (float v : d.mask.values) data.push_back(static_cast<double>(v));
        mask["data"] = std::move(data);
      }
      const std::string cls = d.class_id >= 0 && d.class_id < config.num_classes()
                                  ? config.class_names[d.class_id]
                                  : std::to_string(d.class_id);
      out["detections"].push_back({{"image_id", im.image_id},
                                   {"class", cls},
                                   {"score", static_cast<double>(d.score)},
                                   {"bbox",
                                    {static_cast<double>(d.bbox.x0), static_cast<double>(d.bbox.y0),
                                     static_cast<double>(d.bbox.x1), static_cast<double>(d.bbox.y1)}},
                                   {"mask", std::move(mask)}});
    }
  }
  return out.dump(1);
}

}  // namespace imp
