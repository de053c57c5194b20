#include "ptomo/image.hpp"

namespace ptomo {

Image crop(const Image& img, int w, int h) {
  require(w <= img.width && h <= img.height, "crop larger than image");
  Image out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) out(c, r) = img(c, r);
  }
  return out;
}

Image pad(const Image& img, int w, int h) {
  require(w >= img.width && h >= img.height, "pad smaller than image");
  Image out(w, h, 0.0);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) out(c, r) = img(c, r);
  }
  return out;
}

}  // namespace ptomo
