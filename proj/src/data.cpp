#include "edl/data.hpp"

#include "edl/error.hpp"
#include "edl/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace edl::data {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  if (image_size <= 0 || image_size % 16 != 0)
    throw InvalidInput("image_size must be a positive multiple of 16, got " + std::to_string(image_size));
  if (channels != 1 && channels != 2) throw InvalidInput("channels must be 1 or 2");
  if (sample_count < 1) throw InvalidInput("sample_count must be at least 1");
  if (min_blobs < 1 || max_blobs < min_blobs) throw InvalidInput("blob count range must satisfy 1 <= min <= max");
  if (!(noise_sigma >= 0.0) || !(blur_sigma >= 0.0) || !std::isfinite(noise_sigma) || !std::isfinite(blur_sigma))
    throw InvalidInput("noise and blur sigmas must be finite and non-negative");
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) total += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= total;
  return k;
}

struct Ellipse {
  double cx, cy, a, b, cos_t, sin_t;
  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = (dx * cos_t + dy * sin_t) / a;
    const double v = (-dx * sin_t + dy * cos_t) / b;
    return u * u + v * v <= 1.0;
  }
};

/// Smooth background: two random plane waves. Amplitudes sum to 0.14, which
/// keeps the noiseless foreground and background bands disjoint.
Image texture(int n, SplitMix64& rng) {
  Image t = Image::Zero(n, n);
  const double amp[2] = {0.08, 0.06};
  for (double a : amp) {
    const double freq = rng.uniform(0.5, 2.0) * 2.0 * std::numbers::pi / n;
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double fx = freq * std::cos(theta), fy = freq * std::sin(theta);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) t(y, x) += a * std::sin(fx * x + fy * y + phase);
  }
  return t;
}

std::string sample_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%04d", index);
  return buf;
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  Image tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * img(y, std::clamp(x + i, 0, w - 1));
      tmp(y, x) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(std::clamp(y + i, 0, h - 1), x);
      out(y, x) = acc;
    }
  return out;
}

Sample generate_sample(const SynthConfig& cfg, int index) {
  cfg.validate();
  SplitMix64 rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  const int n = cfg.image_size;

  const int blobs = cfg.min_blobs + static_cast<int>(rng.below(cfg.max_blobs - cfg.min_blobs + 1));
  std::vector<Ellipse> shapes;
  for (int i = 0; i < blobs; ++i) {
    const double theta = rng.uniform(0.0, std::numbers::pi);
    Ellipse e{rng.uniform(0.25, 0.75) * n, rng.uniform(0.25, 0.75) * n, rng.uniform(0.10, 0.22) * n,
              rng.uniform(0.10, 0.22) * n, std::cos(theta), std::sin(theta)};
    shapes.push_back(e);
  }

  Sample s;
  s.id = sample_id(index);
  s.mask = Mask::Zero(n, n);
  Image hard = Image::Zero(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (const auto& e : shapes)
        if (e.contains(x + 0.5, y + 0.5)) {
          s.mask(y, x) = 1;
          hard(y, x) = 1.0;
          break;
        }
  const Image soft = gaussian_blur(hard, cfg.blur_sigma);

  // Channel 0 is bright-on-dark; channel 1 is a dimmer inverted view with its
  // own texture and noise.
  const double base[2] = {0.30, 0.70};
  const double contrast[2] = {0.40, -0.35};
  for (int c = 0; c < cfg.channels; ++c) {
    Image img = base[c] + texture(n, rng) + contrast[c] * soft;
    if (cfg.noise_sigma > 0.0)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) img(y, x) += cfg.noise_sigma * rng.normal();
    s.channels.push_back(img.cwiseMax(0.0).cwiseMin(1.0));
  }
  return s;
}

Dataset generate(const SynthConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.reserve(cfg.sample_count);
  for (int i = 0; i < cfg.sample_count; ++i) ds.push_back(generate_sample(cfg, i));
  return ds;
}

double foreground_fraction(const Sample& s) {
  return s.mask.cast<double>().mean();
}

// ---------------------------------------------------------------------------
// PGM

void write_pgm(const fs::path& path, const Eigen::Ref<const Eigen::ArrayXXd>& values, int maxval,
               const std::string& comment) {
  if (maxval != 255 && maxval != 65535) throw InvalidInput("PGM maxval must be 255 or 65535");
  const int h = static_cast<int>(values.rows()), w = static_cast<int>(values.cols());
  std::string bytes = "P5\n";
  if (!comment.empty()) bytes += "# " + comment + "\n";
  bytes += std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = std::clamp(values(y, x), 0.0, 1.0);
      const auto q = static_cast<unsigned>(std::lround(v * maxval));
      if (maxval == 65535) bytes.push_back(static_cast<char>(q >> 8));
      bytes.push_back(static_cast<char>(q & 0xFF));
    }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParseError("failed writing " + path.string());
}

namespace {

class PgmReader {
 public:
  PgmReader(const fs::path& path, std::string bytes) : path_(path), b_(std::move(bytes)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_.string() + ": " + what + " at byte offset " + std::to_string(pos_));
  }

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int header_int() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1'000'000) fail("header value too large");
      ++pos_;
    }
    if (pos_ == start) fail("expected an integer");
    return static_cast<int>(v);
  }

  PgmImage parse() {
    if (b_.size() < 2 || b_[0] != 'P' || b_[1] != '5') fail("missing P5 magic");
    pos_ = 2;
    PgmImage img;
    img.width = header_int();
    img.height = header_int();
    img.maxval = header_int();
    if (img.width <= 0 || img.height <= 0) fail("non-positive dimensions");
    if (img.maxval <= 0 || img.maxval > 65535) fail("maxval out of range");
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) fail("expected whitespace");
    ++pos_;
    const std::size_t bps = img.maxval > 255 ? 2 : 1;
    const std::size_t count = static_cast<std::size_t>(img.width) * img.height;
    if (b_.size() - pos_ < count * bps) {
      pos_ = b_.size();
      fail("truncated raster, expected " + std::to_string(count * bps) + " bytes");
    }
    img.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      unsigned v = static_cast<unsigned char>(b_[pos_++]);
      if (bps == 2) v = (v << 8) | static_cast<unsigned char>(b_[pos_++]);
      if (v > static_cast<unsigned>(img.maxval)) {
        pos_ -= bps;
        fail("sample exceeds maxval");
      }
      img.samples[i] = static_cast<std::uint16_t>(v);
    }
    return img;
  }

 private:
  fs::path path_;
  std::string b_;
  std::size_t pos_ = 0;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file at byte offset 0");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PgmImage read_pgm(const fs::path& path) {
  return PgmReader(path, slurp(path)).parse();
}

// ---------------------------------------------------------------------------
// Dataset directories

void save_dataset(const Dataset& ds, const fs::path& dir, const std::string& provenance) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ParseError("cannot create directory " + dir.string());
  std::string index;
  for (const auto& s : ds) {
    for (std::size_t c = 0; c < s.channels.size(); ++c)
      write_pgm(dir / (s.id + "_c" + std::to_string(c) + ".pgm"), s.channels[c], 65535, provenance);
    write_pgm(dir / (s.id + "_mask.pgm"), s.mask.cast<double>(), 255, provenance);
    index += s.id + "\n";
  }
  std::ofstream out(dir / "index.txt", std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write " + (dir / "index.txt").string());
  out << index;
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path index_path = dir / "index.txt";
  const std::string index = slurp(index_path);
  Dataset ds;
  std::size_t line_start = 0;
  while (line_start < index.size()) {
    std::size_t end = index.find('\n', line_start);
    if (end == std::string::npos) end = index.size();
    const std::string id = index.substr(line_start, end - line_start);
    if (id.empty() || id.find_first_of(" \t\r/\\") != std::string::npos)
      throw ParseError(index_path.string() + ": malformed sample id at byte offset " + std::to_string(line_start));

    Sample s;
    s.id = id;
    const PgmImage m = read_pgm(dir / (id + "_mask.pgm"));
    s.mask = Mask(m.height, m.width);
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
      if (m.samples[i] != 0 && m.samples[i] != m.maxval)
        throw ParseError((dir / (id + "_mask.pgm")).string() + ": non-binary mask value at pixel " +
                         std::to_string(i));
      s.mask.data()[i] = m.samples[i] != 0 ? 1 : 0;
    }
    for (int c = 0; fs::exists(dir / (id + "_c" + std::to_string(c) + ".pgm")); ++c) {
      const fs::path p = dir / (id + "_c" + std::to_string(c) + ".pgm");
      const PgmImage img = read_pgm(p);
      if (img.width != m.width || img.height != m.height)
        throw ParseError(p.string() + ": size differs from mask at byte offset 0");
      Image v(img.height, img.width);
      for (std::size_t i = 0; i < img.samples.size(); ++i) v.data()[i] = img.samples[i] / double(img.maxval);
      s.channels.push_back(std::move(v));
    }
    if (s.channels.empty())
      throw ParseError((dir / (id + "_c0.pgm")).string() + ": missing channel file at byte offset 0");
    if (!ds.empty() && (s.channels.size() != ds.front().channels.size() || s.height() != ds.front().height() ||
                        s.width() != ds.front().width()))
      throw ParseError((dir / (id + "_c0.pgm")).string() + ": inconsistent channel count or size at byte offset 0");
    ds.push_back(std::move(s));
    line_start = end + 1;
  }
  if (ds.empty()) throw ParseError(index_path.string() + ": no sample ids at byte offset 0");
  return ds;
}

// ---------------------------------------------------------------------------
// Splits and batching

Split split(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw InvalidInput("split fractions must be finite and non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("split fractions must sum to 1");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  // Largest remainder; ties go to the earlier partition.
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = fractions[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  std::array<int, 3> rank{0, 1, 2};
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int i = 0; assigned < n; ++i, ++assigned) ++sizes[rank[i % 3]];

  Split out;
  auto it = order.begin();
  out.train.assign(it, it + sizes[0]);
  it += sizes[0];
  out.val.assign(it, it + sizes[1]);
  it += sizes[1];
  out.test.assign(it, order.end());
  return out;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= ds.size()) throw InvalidInput("subset index out of range");
    out.push_back(ds[i]);
  }
  return out;
}

namespace {

template <typename F>
void for_each_selected(const Dataset& ds, std::span<const std::size_t> indices, F&& f) {
  if (indices.empty()) {
    for (std::size_t i = 0; i < ds.size(); ++i) f(i, ds[i]);
  } else {
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (indices[k] >= ds.size()) throw InvalidInput("sample index out of range");
      f(k, ds[indices[k]]);
    }
  }
}

}  // namespace

template <typename Scalar>
nn::Tensor<Scalar> stack_images(const Dataset& ds, std::span<const std::size_t> indices) {
  if (ds.empty()) throw InvalidInput("empty dataset");
  const std::size_t count = indices.empty() ? ds.size() : indices.size();
  const auto& first = ds.front();
  nn::Tensor<Scalar> t(static_cast<nn::Index>(count), static_cast<nn::Index>(first.channels.size()), first.height(),
                       first.width());
  for_each_selected(ds, indices, [&](std::size_t k, const Sample& s) {
    if (s.channels.size() != first.channels.size() || s.height() != first.height() || s.width() != first.width())
      throw InvalidInput("samples differ in shape");
    for (std::size_t c = 0; c < s.channels.size(); ++c)
      t.mat().col(c).segment(k * t.plane(), t.plane()) =
          Eigen::Map<const Eigen::ArrayXd>(s.channels[c].data(), t.plane()).template cast<Scalar>().matrix();
  });
  return t;
}

template nn::Tensor<float> stack_images(const Dataset&, std::span<const std::size_t>);
template nn::Tensor<double> stack_images(const Dataset&, std::span<const std::size_t>);

Eigen::ArrayXXd stack_labels(const Dataset& ds, std::span<const std::size_t> indices) {
  if (ds.empty()) throw InvalidInput("empty dataset");
  const std::size_t count = indices.empty() ? ds.size() : indices.size();
  const Eigen::Index plane = ds.front().mask.size();
  Eigen::ArrayXXd y(static_cast<Eigen::Index>(count) * plane, 2);
  for_each_selected(ds, indices, [&](std::size_t k, const Sample& s) {
    if (s.mask.size() != plane) throw InvalidInput("samples differ in shape");
    for (Eigen::Index i = 0; i < plane; ++i) {
      const double v = s.mask.data()[i] ? 1.0 : 0.0;
      y(k * plane + i, 0) = 1.0 - v;
      y(k * plane + i, 1) = v;
    }
  });
  return y;
}

}  // namespace edl::data
