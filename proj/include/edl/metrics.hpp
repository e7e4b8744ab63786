#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace edl::metrics {

using BinaryField = Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>;
using RealField = Eigen::ArrayXd;
/// One row per pixel, one column per class.
using ProbField = Eigen::ArrayXXd;

/// 2|P & T| / (|P| + |T|); 1 when both masks are empty.
double dice(const BinaryField& pred, const BinaryField& truth);
double accuracy(const BinaryField& pred, const BinaryField& truth);
/// Mean over pixels of sum_j (p_j - y_j)^2 (the unhalved multiclass form).
double brier(const ProbField& p, const ProbField& y);
/// Mean over pixels of -log(max(p_true, 1e-12)).
double nll(const ProbField& p, const ProbField& y);

/// (P(bg), P(fg)) columns from a foreground probability, and the matching
/// one-hot labels from a mask.
ProbField binary_probs(const RealField& p_fg);
ProbField one_hot(const BinaryField& mask);

/// Pearson correlation of a 0/1 flag with u, population standard deviation.
/// Empty when either group is empty or u is constant.
std::optional<double> point_biserial(const BinaryField& flags, const RealField& u);
std::optional<double> pearson(const RealField& x, const RealField& y);
/// Pearson correlation of average ranks. Empty for constant input.
std::optional<double> spearman(const RealField& x, const RealField& y);
/// Average (1-based) ranks; tied values share the mean of their ranks.
RealField average_ranks(const RealField& x);

struct ConfusionSplit {
  std::vector<Eigen::Index> tp, tn, fp, fn;
};
ConfusionSplit confusion_split(const BinaryField& pred, const BinaryField& truth);

/// sup |F_a - F_b| evaluated at every sample point. Empty if either side is empty.
std::optional<double> ks_statistic(const std::vector<double>& a, const std::vector<double>& b);

struct Ecdf {
  std::vector<double> values;   ///< sorted ascending
  std::vector<double> heights;  ///< k / n at values[k-1]
};
Ecdf make_ecdf(std::vector<double> samples);

/// eCDFs of u restricted to TP, TN, FP and FN, in that order.
std::array<Ecdf, 4> ecdf_dump(const ConfusionSplit& split, const RealField& u);

enum class UncertaintyKind { dempster, epistemic, aleatoric, entropy, stddev };
std::string to_string(UncertaintyKind k);
UncertaintyKind parse_uncertainty_kind(const std::string& s);

/// Per-pixel outputs of a method on one 2-D slice.
struct SlicePrediction {
  std::string id;
  RealField p_fg;
  BinaryField pred;
  BinaryField truth;
  std::map<UncertaintyKind, RealField> uncertainty;
};

struct KindStats {
  std::optional<double> pt_biserial;
  std::optional<double> ks;
  double mean_u = 0.0;
};

struct SliceReport {
  std::string id;
  double dice = 0.0;
  double accuracy = 0.0;
  double brier = 0.0;
  double nll = 0.0;
  std::map<UncertaintyKind, KindStats> kinds;
};

SliceReport slice_report(const SlicePrediction& p);

struct KindSummary {
  std::optional<double> pt_biserial;  ///< mean over valid slices
  std::optional<double> ks;
  std::size_t pt_biserial_slices = 0;
  std::size_t ks_slices = 0;
  double mean_u = 0.0;
  /// Spearman rank correlation across slices between mean uncertainty and
  /// each per-slice score.
  std::optional<double> spearman_brier, spearman_nll, spearman_dice, spearman_accuracy;
};

struct Summary {
  std::size_t slices = 0;
  double dice = 0.0, accuracy = 0.0, brier = 0.0, nll = 0.0;
  std::map<UncertaintyKind, KindSummary> kinds;
};

/// Dataset means. With `exclude_invalid` (the default) flagged slice values
/// are left out of each metric's mean; otherwise they count as zero.
Summary summarize(const std::vector<SliceReport>& reports, bool exclude_invalid = true);

/// CSV with one row per slice; invalid values are written as NA. Every file
/// starts with `provenance` as a '#' comment line when it is non-empty.
void write_slice_csv(const std::filesystem::path& path, const std::vector<SliceReport>& reports,
                     const std::string& provenance);
void write_summary(const std::filesystem::path& path, const Summary& s, const std::string& provenance);
void write_ecdf(const std::filesystem::path& path, const Ecdf& e, const std::string& provenance);

/// Shortest round-tripping text for a double.
std::string format_number(double v);

}  // namespace edl::metrics
