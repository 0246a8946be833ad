#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqaflow/types.hpp"

namespace vqaflow {

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  static Image blank(int width, int height, std::uint8_t fill = 0);

  std::uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Decode a PNG or JPEG file into 8-bit RGB. Alpha dropped, grayscale
/// expanded. Missing file -> Io error; undecodable bytes -> Format error.
Image load_image(const std::string& path);

/// Same decoding rules over an in-memory payload.
Image decode_image(const std::vector<std::uint8_t>& bytes);

/// Resolve an ImageRef to pixels.
Image load_image(const ImageRef& ref);

/// Expand the box by pad_frac of its own dimension on each side (rounded
/// outward), clamp to the image, and return the pixel-exact sub-image.
/// The box must satisfy its invariants relative to the image.
Image crop(const Image& image, const BoundingBox& box, double pad_frac);

/// The region crop() extracts, exposed for callers that need the geometry.
BoundingBox padded_region(const Image& image, const BoundingBox& box, double pad_frac);

/// Clamp raw detector output into a valid box for a width x height image.
/// Degenerate boxes are widened by one pixel where room exists; a box with
/// no overlap at all -> UnsalvageableBox error. Inverted coordinates are
/// swapped before clamping.
BoundingBox clamp_box(int x_min, int y_min, int x_max, int y_max, int width, int height);

/// Deterministic lossless PNG encoding (fixed filter and compression), so
/// identical pixels always produce identical bytes and therefore stable
/// request fingerprints.
std::vector<std::uint8_t> encode_canonical(const Image& image);

}  // namespace vqaflow
