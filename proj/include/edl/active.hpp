#pragma once

#include "edl/data.hpp"
#include "edl/metrics.hpp"
#include "edl/trainer.hpp"
#include "edl/unet.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace edl::active {

enum class QueryKind { random, entropy, dempster, epistemic, aleatoric };
std::string to_string(QueryKind k);
QueryKind parse_query_kind(const std::string& s);

/// Random and entropy sampling drive a softmax-head model; the three
/// evidential kinds drive an evidential one.
nn::Head head_for(QueryKind k);

struct AcquisitionRecord {
  int round = 0;
  std::vector<std::size_t> acquired;  ///< pool indices, in acquisition order
  double mean_score = 0.0;            ///< mean score of the acquired samples
  bool exhausted = false;             ///< fewer than requested were left
};

/// Labeled / unlabeled partition of a pool of `size` samples. Both index
/// lists are kept sorted.
struct PoolState {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::vector<AcquisitionRecord> history;

  static PoolState with_initial(std::size_t size, std::size_t initial_count, std::uint64_t seed);
  std::size_t size() const { return labeled.size() + unlabeled.size(); }
  /// Throws StateError if the partition invariant is broken.
  void check() const;
};

/// Per-image mean of the selected uncertainty over each sample of `pool`.
/// Random scores are seeded uniforms. Throws StateError for an empty pool
/// and InvalidInput when the model head does not fit the kind.
std::vector<double> score_unlabeled(const nn::UNet<float>& model, const data::Dataset& pool, QueryKind kind,
                                    std::uint64_t seed);

/// Moves the top-`n` unlabeled samples by score (aligned with
/// pool.unlabeled; ties go to the lower index) into the labeled set.
void acquire(PoolState& pool, const std::vector<double>& scores, std::size_t n, int round);

struct ActiveConfig {
  QueryKind query_kind = QueryKind::dempster;
  int n_acquire = 8;
  int epochs_per_round = 10;
  int rounds = 25;
  /// 0 selects 10% of the pool (at least one sample).
  int initial_labeled_count = 0;
  std::uint64_t seed = 0;
  nn::UNetConfig net;
  train::TrainConfig train;

  void validate() const;
};

struct RoundRecord {
  int round = 0;
  std::size_t labeled_count = 0;
  double dice = 0.0;
  /// Pt-biserial and KS of each uncertainty the model provides.
  std::map<metrics::UncertaintyKind, metrics::KindSummary> kinds;
};

struct ActiveResult {
  std::vector<RoundRecord> rounds;
  PoolState pool;
  std::vector<metrics::SliceReport> final_report;
  /// Set when the pool ran dry before the last round: the report at the
  /// first round that labeled every sample.
  std::optional<std::vector<metrics::SliceReport>> exhaustion_report;
};

/// Overrides how unlabeled samples are scored; used to test that all query
/// kinds share every other state transition.
using Scorer = std::function<std::vector<double>(const nn::UNet<float>&, const data::Dataset&, int round)>;

/// Each round scores D_U with the current model, acquires min(N_u, |D_U|)
/// samples, continues training on D_L for epochs_per_round epochs and
/// evaluates on `eval`.
ActiveResult run_active_loop(const ActiveConfig& cfg, const data::Dataset& pool, const data::Dataset& eval,
                             const Scorer& scorer = {});

/// Slice predictions of a model with whichever uncertainties its head provides.
std::vector<metrics::SlicePrediction> predict_any(const nn::UNet<float>& model, const data::Dataset& ds);

void write_history_csv(const std::filesystem::path& path, const std::vector<RoundRecord>& rounds,
                       const std::string& provenance);

}  // namespace edl::active
