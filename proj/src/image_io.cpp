#include "reconnet/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "reconnet/binary_io.hpp"
#include "reconnet/error.hpp"

namespace reconnet {

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("netpbm: " + what + " at byte offset " + std::to_string(pos_));
  }

  void skip_separators() {
    while (pos_ < bytes_.size()) {
      const auto ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(ch)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* field) {
    skip_separators();
    if (pos_ >= bytes_.size()) fail(std::string("truncated header before ") + field);
    if (!std::isdigit(bytes_[pos_])) fail(std::string("expected digits for ") + field);
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 24)) fail(std::string(field) + " too large");
      ++pos_;
    }
    return value;
  }

  std::size_t& pos() { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageFile decode_netpbm(std::span<const std::uint8_t> bytes) {
  HeaderParser p(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    p.fail("expected P5 or P6 magic");
  ImageFile img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  p.pos() = 2;
  if (p.pos() < bytes.size() && !std::isspace(bytes[p.pos()]) && bytes[p.pos()] != '#')
    p.fail("missing separator after magic");
  const std::size_t width_at = p.pos();
  img.width = p.number("width");
  img.height = p.number("height");
  if (img.width == 0 || img.height == 0) {
    p.pos() = width_at;
    p.fail("degenerate dimensions " + std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  const std::size_t maxval = p.number("maxval");
  if (maxval != 255) p.fail("unsupported maxval " + std::to_string(maxval));
  if (p.pos() >= bytes.size() || !std::isspace(bytes[p.pos()])) p.fail("missing separator before raster");
  ++p.pos();
  const std::size_t count = img.width * img.height * img.channels;
  if (bytes.size() - p.pos() < count)
    p.fail("truncated raster: need " + std::to_string(count) + " bytes, have " +
           std::to_string(bytes.size() - p.pos()));
  img.samples.assign(bytes.begin() + static_cast<std::ptrdiff_t>(p.pos()),
                     bytes.begin() + static_cast<std::ptrdiff_t>(p.pos() + count));
  return img;
}

std::vector<std::uint8_t> encode_netpbm(const ImageFile& image) {
  if (image.channels != 1 && image.channels != 3) throw ArgumentError("netpbm supports 1 or 3 channels");
  if (image.width == 0 || image.height == 0) throw ArgumentError("cannot encode an empty image");
  if (image.samples.size() != image.width * image.height * image.channels)
    throw ArgumentError("sample count does not match image dimensions");
  const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(image.width) +
                             " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.samples.begin(), image.samples.end());
  return out;
}

ImageFile load_image(const std::filesystem::path& path) {
  try {
    return decode_netpbm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_image(const ImageFile& image, const std::filesystem::path& path) {
  write_file(path, encode_netpbm(image));
}

std::vector<Plane> planes_from_image(const ImageFile& image) {
  std::vector<Plane> planes(image.channels, Plane(image.height, image.width));
  for (std::size_t p = 0; p < image.width * image.height; ++p)
    for (std::size_t ch = 0; ch < image.channels; ++ch)
      planes[ch].data[p] = image.samples[p * image.channels + ch] / 255.0;
  return planes;
}

ImageFile image_from_planes(std::span<const Plane> planes) {
  if (planes.size() != 1 && planes.size() != 3) throw ArgumentError("expected 1 or 3 planes");
  ImageFile img{planes[0].width, planes[0].height, planes.size(), {}};
  for (const auto& plane : planes)
    if (plane.width != img.width || plane.height != img.height) throw ArgumentError("plane sizes differ");
  img.samples.resize(img.width * img.height * img.channels);
  for (std::size_t p = 0; p < img.width * img.height; ++p)
    for (std::size_t ch = 0; ch < img.channels; ++ch)
      img.samples[p * img.channels + ch] =
          static_cast<std::uint8_t>(std::lround(std::clamp(planes[ch].data[p], 0.0, 1.0) * 255.0));
  return img;
}

Plane luminance(const ImageFile& image) {
  if (image.channels != 1 && image.channels != 3) throw ArgumentError("luminance expects 1 or 3 channels");
  Plane out(image.height, image.width);
  for (std::size_t p = 0; p < image.width * image.height; ++p) {
    if (image.channels == 1) {
      out.data[p] = image.samples[p] / 255.0;
    } else {
      const std::uint8_t* px = &image.samples[p * 3];
      out.data[p] = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
    }
  }
  return out;
}

}  // namespace reconnet
