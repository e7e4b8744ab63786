#include "edl/active.hpp"

#include "edl/baselines.hpp"
#include "edl/error.hpp"
#include "edl/predict.hpp"
#include "edl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace edl::active {

std::string to_string(QueryKind k) {
  switch (k) {
    case QueryKind::random: return "random";
    case QueryKind::entropy: return "entropy";
    case QueryKind::dempster: return "dempster";
    case QueryKind::epistemic: return "epistemic";
    case QueryKind::aleatoric: return "aleatoric";
  }
  return "unknown";
}

QueryKind parse_query_kind(const std::string& s) {
  for (auto k : {QueryKind::random, QueryKind::entropy, QueryKind::dempster, QueryKind::epistemic,
                 QueryKind::aleatoric})
    if (to_string(k) == s) return k;
  throw InvalidInput("unknown query kind '" + s + "'");
}

nn::Head head_for(QueryKind k) {
  return k == QueryKind::random || k == QueryKind::entropy ? nn::Head::softmax : nn::Head::evidential;
}

PoolState PoolState::with_initial(std::size_t size, std::size_t initial_count, std::uint64_t seed) {
  if (initial_count < 1 || initial_count > size) throw InvalidInput("initial labeled count must be in [1, pool size]");
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  // Partial Fisher-Yates: the first initial_count entries are a uniform sample.
  for (std::size_t i = 0; i < initial_count; ++i) std::swap(order[i], order[i + rng.below(size - i)]);
  PoolState p;
  p.labeled.assign(order.begin(), order.begin() + initial_count);
  p.unlabeled.assign(order.begin() + initial_count, order.end());
  std::sort(p.labeled.begin(), p.labeled.end());
  std::sort(p.unlabeled.begin(), p.unlabeled.end());
  return p;
}

void PoolState::check() const {
  std::vector<std::size_t> all(labeled);
  all.insert(all.end(), unlabeled.begin(), unlabeled.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i] != i) throw StateError("pool partition is not a disjoint cover of the pool");
}

std::vector<double> score_unlabeled(const nn::UNet<float>& model, const data::Dataset& pool, QueryKind kind,
                                    std::uint64_t seed) {
  if (pool.empty()) throw StateError("no unlabeled samples to score");
  std::vector<double> scores(pool.size());
  if (kind == QueryKind::random) {
    SplitMix64 rng(seed);
    for (double& s : scores) s = rng.uniform();
    return scores;
  }
  if (model.config().head != head_for(kind))
    throw InvalidInput("query kind " + to_string(kind) + " needs a " + nn::to_string(head_for(kind)) + " head");
  const auto preds = kind == QueryKind::entropy ? baselines::predict_softmax(model, pool) : predict::predict_edl(model, pool);
  const auto ukind = kind == QueryKind::entropy     ? metrics::UncertaintyKind::entropy
                     : kind == QueryKind::dempster  ? metrics::UncertaintyKind::dempster
                     : kind == QueryKind::epistemic ? metrics::UncertaintyKind::epistemic
                                                    : metrics::UncertaintyKind::aleatoric;
  for (std::size_t i = 0; i < preds.size(); ++i) scores[i] = preds[i].uncertainty.at(ukind).mean();
  return scores;
}

void acquire(PoolState& pool, const std::vector<double>& scores, std::size_t n, int round) {
  if (scores.size() != pool.unlabeled.size()) throw InvalidInput("one score per unlabeled sample required");
  AcquisitionRecord rec;
  rec.round = round;
  rec.exhausted = n > pool.unlabeled.size();
  const std::size_t take = std::min(n, pool.unlabeled.size());
  std::vector<std::size_t> rank(scores.size());
  std::iota(rank.begin(), rank.end(), 0);
  // unlabeled is sorted, so position order equals sample-index order.
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<bool> taken(scores.size(), false);
  double total = 0.0;
  for (std::size_t i = 0; i < take; ++i) {
    taken[rank[i]] = true;
    rec.acquired.push_back(pool.unlabeled[rank[i]]);
    total += scores[rank[i]];
  }
  rec.mean_score = take > 0 ? total / static_cast<double>(take) : 0.0;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < pool.unlabeled.size(); ++i)
    if (!taken[i]) rest.push_back(pool.unlabeled[i]);
  pool.unlabeled = std::move(rest);
  pool.labeled.insert(pool.labeled.end(), rec.acquired.begin(), rec.acquired.end());
  std::sort(pool.labeled.begin(), pool.labeled.end());
  pool.history.push_back(std::move(rec));
}

void ActiveConfig::validate() const {
  if (n_acquire < 1) throw InvalidInput("n_acquire must be at least 1");
  if (rounds < 1) throw InvalidInput("rounds must be at least 1");
  if (epochs_per_round < 0) throw InvalidInput("epochs_per_round must be non-negative");
  if (initial_labeled_count < 0) throw InvalidInput("initial_labeled_count must be non-negative");
  net.validate();
  train.validate();
}

std::vector<metrics::SlicePrediction> predict_any(const nn::UNet<float>& model, const data::Dataset& ds) {
  return model.config().head == nn::Head::evidential ? predict::predict_edl(model, ds)
                                                     : baselines::predict_softmax(model, ds);
}

ActiveResult run_active_loop(const ActiveConfig& cfg, const data::Dataset& pool, const data::Dataset& eval,
                             const Scorer& scorer) {
  cfg.validate();
  if (pool.empty()) throw InvalidInput("active learning pool is empty");
  if (eval.empty()) throw InvalidInput("active learning evaluation set is empty");
  const std::size_t initial =
      cfg.initial_labeled_count > 0
          ? static_cast<std::size_t>(cfg.initial_labeled_count)
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(pool.size()))));

  ActiveResult res;
  res.pool = PoolState::with_initial(pool.size(), initial, stream_seed(cfg.seed, 0));
  nn::UNetConfig net = cfg.net;
  net.head = head_for(cfg.query_kind);
  nn::UNet<float> model(net);
  train::Trainer<float> trainer(model, cfg.train);

  auto report = [&] {
    std::vector<metrics::SliceReport> reps;
    for (const auto& p : predict_any(model, eval)) reps.push_back(metrics::slice_report(p));
    return reps;
  };

  for (int round = 1; round <= cfg.rounds; ++round) {
    if (!res.pool.unlabeled.empty()) {
      const data::Dataset unl = data::subset(pool, res.pool.unlabeled);
      const auto scores = scorer ? scorer(model, unl, round)
                                 : score_unlabeled(model, unl, cfg.query_kind,
                                                   stream_seed(cfg.seed, static_cast<std::uint64_t>(round)));
      acquire(res.pool, scores, static_cast<std::size_t>(cfg.n_acquire), round);
      res.pool.check();
    }
    const data::Dataset labeled = data::subset(pool, res.pool.labeled);
    trainer.fit(labeled, nullptr, cfg.epochs_per_round);

    auto reps = report();
    const auto summary = metrics::summarize(reps);
    RoundRecord rec;
    rec.round = round;
    rec.labeled_count = res.pool.labeled.size();
    rec.dice = summary.dice;
    rec.kinds = summary.kinds;
    res.rounds.push_back(std::move(rec));

    if (round == cfg.rounds) {
      res.final_report = std::move(reps);
    } else if (res.pool.unlabeled.empty() && !res.exhaustion_report) {
      res.exhaustion_report = std::move(reps);
    }
  }
  return res;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<RoundRecord>& rounds,
                       const std::string& provenance) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "round,labeled_count,dice";
  if (!rounds.empty())
    for (const auto& [kind, k] : rounds.front().kinds)
      out << ",pt_biserial_" << metrics::to_string(kind) << ",ks_" << metrics::to_string(kind);
  out << "\n";
  auto opt = [](const std::optional<double>& v) { return v ? metrics::format_number(*v) : std::string("NA"); };
  for (const auto& r : rounds) {
    out << r.round << "," << r.labeled_count << "," << metrics::format_number(r.dice);
    for (const auto& [kind, k] : r.kinds) out << "," << opt(k.pt_biserial) << "," << opt(k.ks);
    out << "\n";
  }
  if (!out) throw ParseError("failed writing " + path.string());
}

}  // namespace edl::active
