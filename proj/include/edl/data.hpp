#pragma once

#include "edl/tensor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <array>
#include <span>
#include <string>
#include <vector>

namespace edl::data {

/// Row-major so the flat buffer is indexed y * W + x.
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SynthConfig {
  int image_size = 32;
  int channels = 1;
  int sample_count = 64;
  int min_blobs = 1;
  int max_blobs = 3;
  double noise_sigma = 0.12;
  double blur_sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Sample {
  std::string id;
  std::vector<Image> channels;  ///< intensities in [0, 1]
  Mask mask;                    ///< 0 background, 1 foreground

  int height() const { return static_cast<int>(mask.rows()); }
  int width() const { return static_cast<int>(mask.cols()); }
};

using Dataset = std::vector<Sample>;

/// Sample `index` of the synthetic scene family. Depends only on (cfg, index).
Sample generate_sample(const SynthConfig& cfg, int index);
Dataset generate(const SynthConfig& cfg);

/// Separable Gaussian blur, kernel radius ceil(3 sigma), replicated borders.
Image gaussian_blur(const Image& img, double sigma);

/// Writes index.txt plus imgNNNN_cC.pgm (16-bit) and imgNNNN_mask.pgm (8-bit).
/// `provenance` goes into a comment line of every PGM header.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir, const std::string& provenance = {});
/// Reads a directory written by save_dataset. Throws ParseError naming the
/// offending file; never returns a partial dataset.
Dataset load_dataset(const std::filesystem::path& dir);

/// 16-bit (maxval 65535) or 8-bit (maxval 255) binary PGM.
void write_pgm(const std::filesystem::path& path, const Eigen::Ref<const Eigen::ArrayXXd>& values, int maxval,
               const std::string& comment = {});
/// Returns samples (row-major) as integers; throws ParseError with the path and
/// byte offset on malformed input.
struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> samples;
};
PgmImage read_pgm(const std::filesystem::path& path);

struct Split {
  std::vector<std::size_t> train, val, test;
};

/// Seeded shuffle of [0, n) cut by fractions (train, val, test). Sizes use
/// largest-remainder rounding so each differs from n * fraction by < 1.
Split split(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed);

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

/// Images of the selected samples (all samples when `indices` is empty)
/// stacked into an N x C x H x W tensor.
template <typename Scalar>
nn::Tensor<Scalar> stack_images(const Dataset& ds, std::span<const std::size_t> indices);

/// One-hot labels (pixels x 2, column 1 = foreground) in tensor row order.
Eigen::ArrayXXd stack_labels(const Dataset& ds, std::span<const std::size_t> indices);

double foreground_fraction(const Sample& s);

}  // namespace edl::data
