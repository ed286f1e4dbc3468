#include "addl/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "addl/common.hpp"

namespace addl {

void ImagePlane::validate() const {
  if (width <= 0 || height <= 0 || samples.size() != static_cast<std::size_t>(width) * height) {
    throw ValueError("image plane: inconsistent dimensions");
  }
  for (double s : samples) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValueError("image plane: sample outside [0,1]");
  }
}

Tensor ImagePlane::to_tensor() const {
  return Tensor::from_data({1, 1, height, width}, samples);
}

ImagePlane ImagePlane::from_tensor(const Tensor& t) {
  if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 1) {
    throw ValueError("from_tensor: expected (1,1,H,W), got " + shape_str(t.shape()));
  }
  ImagePlane img(t.dim(3), t.dim(2));
  img.samples = t.data();
  return img;
}

ImagePlane read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw FormatError(path + ": not a binary PGM (P5)");
  auto next_int = [&f, &path]() {
    // skip whitespace and '#' comments
    for (;;) {
      int c = f.peek();
      if (c == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(c)) {
        f.get();
      } else {
        break;
      }
    }
    long v = -1;
    f >> v;
    if (!f || v < 0) throw FormatError(path + ": malformed PGM header");
    return v;
  };
  const long w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16) throw FormatError(path + ": bad dimensions");
  if (maxval != 255) throw FormatError(path + ": only maxval 255 supported");
  f.get();  // single whitespace after maxval
  ImagePlane img(static_cast<int>(w), static_cast<int>(h));
  std::vector<std::uint8_t> raw(img.size());
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(f.gcount()) != raw.size()) {
    throw FormatError(path + ": truncated pixel data");
  }
  for (std::size_t i = 0; i < raw.size(); ++i) img.samples[i] = raw[i] / 255.0;
  return img;
}

void write_pgm(const std::string& path, const ImagePlane& img) {
  img.validate();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValueError("cannot open " + path + " for writing");
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> raw(img.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::round(img.samples[i] * 255.0);
    raw[i] = static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, v)));
  }
  f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw ValueError("failed writing " + path);
}

namespace {

inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Keys cubic-convolution kernel, a = -0.5.
inline double cubic(double t) {
  t = std::abs(t);
  if (t <= 1.0) return 1.0 + t * t * (1.5 * t - 2.5);
  if (t < 2.0) return 2.0 + t * (-4.0 + t * (2.5 - 0.5 * t));
  return 0.0;
}

// One separable pass along an axis; `scale` = out/in.  When shrinking, the
// kernel is stretched by 1/scale for antialiasing; weights are normalized.
std::vector<double> resample_axis(const std::vector<double>& src, int in_n, int out_n,
                                  int lines, int src_stride_axis, int src_stride_line) {
  const double scale = static_cast<double>(out_n) / in_n;
  const double support = scale < 1.0 ? 2.0 / scale : 2.0;
  const double kscale = scale < 1.0 ? scale : 1.0;
  std::vector<double> dst(static_cast<std::size_t>(out_n) * lines);

  std::vector<int> idx;
  std::vector<double> wgt;
  std::vector<int> starts(out_n), counts(out_n);
  for (int o = 0; o < out_n; ++o) {
    const double center = (o + 0.5) / scale - 0.5;
    const int lo = static_cast<int>(std::ceil(center - support));
    const int hi = static_cast<int>(std::floor(center + support));
    starts[o] = static_cast<int>(idx.size());
    double sum = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double w = cubic((i - center) * kscale);
      if (w == 0.0) continue;
      idx.push_back(reflect_index(i, in_n));
      wgt.push_back(w);
      sum += w;
    }
    counts[o] = static_cast<int>(idx.size()) - starts[o];
    if (sum != 0.0) {
      for (int k = starts[o]; k < starts[o] + counts[o]; ++k) wgt[k] /= sum;
    }
  }

  for (int line = 0; line < lines; ++line) {
    const double* s = src.data() + static_cast<std::size_t>(line) * src_stride_line;
    double* d = dst.data() + static_cast<std::size_t>(line) * out_n;
    for (int o = 0; o < out_n; ++o) {
      double acc = 0.0;
      for (int k = starts[o]; k < starts[o] + counts[o]; ++k) {
        acc += wgt[k] * s[static_cast<std::size_t>(idx[k]) * src_stride_axis];
      }
      d[o] = acc;
    }
  }
  return dst;
}

}  // namespace

ImagePlane bicubic_resize(const ImagePlane& img, double factor) {
  if (factor != 2.0 && factor != 0.5) throw ValueError("bicubic_resize: factor must be 2 or 1/2");
  const int out_w = factor == 2.0 ? img.width * 2 : img.width / 2;
  const int out_h = factor == 2.0 ? img.height * 2 : img.height / 2;
  if (out_w < 1 || out_h < 1) throw ValueError("bicubic_resize: image too small");
  if (factor == 0.5 && (img.width % 2 != 0 || img.height % 2 != 0)) {
    throw ValueError("bicubic_resize: halving requires even dims");
  }

  // rows: horizontal pass produces (out_w x height) stored row-major
  std::vector<double> horiz =
      resample_axis(img.samples, img.width, out_w, img.height, 1, img.width);
  // columns: vertical pass over the transposed view
  std::vector<double> vert(static_cast<std::size_t>(out_w) * out_h);
  {
    // walk each column as a "line"
    std::vector<double> tmp = resample_axis(horiz, img.height, out_h, out_w, out_w, 1);
    // tmp is column-major (line = column); transpose back
    for (int x = 0; x < out_w; ++x) {
      for (int y = 0; y < out_h; ++y) {
        vert[static_cast<std::size_t>(y) * out_w + x] = tmp[static_cast<std::size_t>(x) * out_h + y];
      }
    }
  }
  ImagePlane out(out_w, out_h);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = std::min(1.0, std::max(0.0, vert[i]));
  }
  return out;
}

double mse(const ImagePlane& a, const ImagePlane& b) {
  if (a.width != b.width || a.height != b.height) throw ValueError("mse: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double d = a.samples[i] - b.samples[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.samples.size());
}

double psnr(const ImagePlane& a, const ImagePlane& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return 99.0;
  const double v = 10.0 * std::log10(1.0 / m);
  return v > 99.0 ? 99.0 : v;
}

ImagePlane pad_to_even(const ImagePlane& img) {
  const int w = img.width + (img.width % 2);
  const int h = img.height + (img.height % 2);
  if (w == img.width && h == img.height) return img;
  ImagePlane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.at(y, x) = img.at(reflect_index(y, img.height), reflect_index(x, img.width));
    }
  }
  return out;
}

ImagePlane crop_plane(const ImagePlane& img, int w, int h) {
  if (w > img.width || h > img.height || w <= 0 || h <= 0) throw ValueError("crop_plane: bad size");
  ImagePlane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(y, x) = img.at(y, x);
  }
  return out;
}

}  // namespace addl
