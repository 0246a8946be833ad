#include "vqaflow/imaging.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "vqaflow/errors.hpp"

namespace vqaflow {

namespace {

Image from_bgr_mat(const cv::Mat& mat) {
  if (mat.empty()) throw Error(ErrorKind::Format, "undecodable image bytes");
  if (mat.type() != CV_8UC3) throw Error(ErrorKind::Format, "unexpected decoded pixel format");
  Image img;
  img.width = mat.cols;
  img.height = mat.rows;
  img.rgb.resize(static_cast<std::size_t>(mat.cols) * mat.rows * 3);
  for (int y = 0; y < mat.rows; ++y) {
    const std::uint8_t* src = mat.ptr<std::uint8_t>(y);
    std::uint8_t* dst = img.rgb.data() + static_cast<std::size_t>(y) * mat.cols * 3;
    for (int x = 0; x < mat.cols; ++x) {
      dst[3 * x + 0] = src[3 * x + 2];
      dst[3 * x + 1] = src[3 * x + 1];
      dst[3 * x + 2] = src[3 * x + 0];
    }
  }
  return img;
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[5],
                  const std::vector<std::uint8_t>& data) {
  put_u32_be(out, static_cast<std::uint32_t>(data.size()));
  std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + data.size()));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

Image Image::blank(int width, int height, std::uint8_t fill) {
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidInput, "image dimensions must be >= 1");
  Image img;
  img.width = width;
  img.height = height;
  img.rgb.assign(static_cast<std::size_t>(width) * height * 3, fill);
  return img;
}

Image load_image(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::Io, "image file not found: " + path);
  }
  cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
  if (mat.empty()) throw Error(ErrorKind::Format, "cannot decode image: " + path);
  return from_bgr_mat(mat);
}

Image decode_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.empty()) throw Error(ErrorKind::Format, "empty image payload");
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat mat = cv::imdecode(raw, cv::IMREAD_COLOR);
  return from_bgr_mat(mat);
}

Image load_image(const ImageRef& ref) {
  return ref.is_path() ? load_image(ref.path) : decode_image(ref.bytes);
}

BoundingBox padded_region(const Image& image, const BoundingBox& box, double pad_frac) {
  if (pad_frac < 0) throw Error(ErrorKind::InvalidInput, "pad_frac must be >= 0");
  if (!box.valid_for(image.width, image.height)) {
    throw Error(ErrorKind::InvalidInput, "box violates image bounds");
  }
  double px = pad_frac * box.width();
  double py = pad_frac * box.height();
  BoundingBox region;
  region.x_min = std::max(0, static_cast<int>(std::floor(box.x_min - px)));
  region.y_min = std::max(0, static_cast<int>(std::floor(box.y_min - py)));
  region.x_max = std::min(image.width, static_cast<int>(std::ceil(box.x_max + px)));
  region.y_max = std::min(image.height, static_cast<int>(std::ceil(box.y_max + py)));
  return region;
}

Image crop(const Image& image, const BoundingBox& box, double pad_frac) {
  BoundingBox region = padded_region(image, box, pad_frac);
  Image out;
  out.width = region.width();
  out.height = region.height();
  out.rgb.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  for (int y = 0; y < out.height; ++y) {
    const std::uint8_t* src = image.pixel(region.x_min, region.y_min + y);
    std::memcpy(out.rgb.data() + static_cast<std::size_t>(y) * out.width * 3, src,
                static_cast<std::size_t>(out.width) * 3);
  }
  return out;
}

BoundingBox clamp_box(int x_min, int y_min, int x_max, int y_max, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidInput, "image dimensions must be >= 1");
  if (x_min > x_max) std::swap(x_min, x_max);
  if (y_min > y_max) std::swap(y_min, y_max);
  if (x_min > width || x_max < 0 || y_min > height || y_max < 0) {
    throw Error(ErrorKind::UnsalvageableBox, "box lies entirely outside the image");
  }
  BoundingBox box;
  box.x_min = std::max(0, x_min);
  box.y_min = std::max(0, y_min);
  box.x_max = std::min(width, x_max);
  box.y_max = std::min(height, y_max);
  // widen degenerate sides by one pixel where room exists
  if (box.x_min == box.x_max) {
    if (box.x_max < width) {
      ++box.x_max;
    } else {
      --box.x_min;
    }
  }
  if (box.y_min == box.y_max) {
    if (box.y_max < height) {
      ++box.y_max;
    } else {
      --box.y_min;
    }
  }
  return box;
}

std::vector<std::uint8_t> encode_canonical(const Image& image) {
  if (image.width < 1 || image.height < 1 ||
      image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw Error(ErrorKind::InvalidInput, "malformed image buffer");
  }

  // raw scanlines, filter byte 0 per row
  std::size_t row_bytes = static_cast<std::size_t>(image.width) * 3;
  std::vector<std::uint8_t> raw;
  raw.reserve((row_bytes + 1) * image.height);
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const std::uint8_t* row = image.rgb.data() + static_cast<std::size_t>(y) * row_bytes;
    raw.insert(raw.end(), row, row + row_bytes);
  }

  uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(compressed_size);
  // fixed level keeps the byte stream canonical
  if (compress2(compressed.data(), &compressed_size, raw.data(), static_cast<uLong>(raw.size()),
                6) != Z_OK) {
    throw Error(ErrorKind::Format, "zlib compression failed");
  }
  compressed.resize(compressed_size);

  static const std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> out(kSignature, kSignature + 8);

  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(image.width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor RGB
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});
  return out;
}

}  // namespace vqaflow
