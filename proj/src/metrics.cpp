#include "edl/metrics.hpp"

#include "edl/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

namespace edl::metrics {

namespace {

void check_same(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) throw InvalidInput(std::string(what) + ": size mismatch (" + std::to_string(a) + " vs " +
                                 std::to_string(b) + ")");
}

void check_probs(const ProbField& p, const ProbField& y, const char* what) {
  if (p.rows() != y.rows() || p.cols() != y.cols())
    throw InvalidInput(std::string(what) + ": probability field is " + std::to_string(p.rows()) + "x" +
                       std::to_string(p.cols()) + ", labels " + std::to_string(y.rows()) + "x" +
                       std::to_string(y.cols()));
  if (p.rows() == 0) throw InvalidInput(std::string(what) + ": empty field");
}

}  // namespace

double dice(const BinaryField& pred, const BinaryField& truth) {
  check_same(pred.size(), truth.size(), "dice");
  Eigen::Index inter = 0, np = 0, nt = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, t = truth[i] != 0;
    inter += p && t;
    np += p;
    nt += t;
  }
  if (np + nt == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + nt);
}

double accuracy(const BinaryField& pred, const BinaryField& truth) {
  check_same(pred.size(), truth.size(), "accuracy");
  if (pred.size() == 0) throw InvalidInput("accuracy: empty field");
  Eigen::Index hit = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) hit += (pred[i] != 0) == (truth[i] != 0);
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double brier(const ProbField& p, const ProbField& y) {
  check_probs(p, y, "brier");
  return (p - y).square().rowwise().sum().mean();
}

double nll(const ProbField& p, const ProbField& y) {
  check_probs(p, y, "nll");
  const Eigen::ArrayXd p_true = (p * y).rowwise().sum();
  return -(p_true.max(1e-12).min(1.0).log()).mean();
}

ProbField binary_probs(const RealField& p_fg) {
  ProbField p(p_fg.size(), 2);
  p.col(0) = 1.0 - p_fg;
  p.col(1) = p_fg;
  return p;
}

ProbField one_hot(const BinaryField& mask) {
  ProbField y(mask.size(), 2);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    y(i, 1) = mask[i] != 0 ? 1.0 : 0.0;
    y(i, 0) = 1.0 - y(i, 1);
  }
  return y;
}

std::optional<double> pearson(const RealField& x, const RealField& y) {
  check_same(x.size(), y.size(), "pearson");
  if (x.size() < 2) return std::nullopt;
  const RealField dx = x - x.mean(), dy = y - y.mean();
  const double sxx = dx.square().sum(), syy = dy.square().sum();
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return (dx * dy).sum() / std::sqrt(sxx * syy);
}

std::optional<double> point_biserial(const BinaryField& flags, const RealField& u) {
  check_same(flags.size(), u.size(), "point_biserial");
  const Eigen::Index n = u.size();
  Eigen::Index n1 = 0;
  double sum1 = 0.0, sum0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (flags[i] != 0) {
      ++n1;
      sum1 += u[i];
    } else {
      sum0 += u[i];
    }
  }
  const Eigen::Index n0 = n - n1;
  if (n1 == 0 || n0 == 0) return std::nullopt;
  const double sigma = std::sqrt((u - u.mean()).square().mean());
  if (!(sigma > 0.0)) return std::nullopt;
  const double m1 = sum1 / n1, m0 = sum0 / n0;
  const double dn = static_cast<double>(n);
  return (m1 - m0) / sigma * std::sqrt(static_cast<double>(n1) * static_cast<double>(n0) / (dn * dn));
}

RealField average_ranks(const RealField& x) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
  RealField r(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) r[order[k]] = mean_rank;
    i = j + 1;
  }
  return r;
}

std::optional<double> spearman(const RealField& x, const RealField& y) {
  check_same(x.size(), y.size(), "spearman");
  if (x.size() < 2) return std::nullopt;
  return pearson(average_ranks(x), average_ranks(y));
}

ConfusionSplit confusion_split(const BinaryField& pred, const BinaryField& truth) {
  check_same(pred.size(), truth.size(), "confusion_split");
  ConfusionSplit s;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, t = truth[i] != 0;
    (p ? (t ? s.tp : s.fp) : (t ? s.fn : s.tn)).push_back(i);
  }
  return s;
}

std::optional<double> ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return std::nullopt;
  std::vector<double> sa(a), sb(b);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  double best = 0.0;
  std::size_t ia = 0, ib = 0;
  // Walk the merged support; at each distinct value both eCDFs have taken
  // their full step.
  while (ia < sa.size() || ib < sb.size()) {
    double v;
    if (ib >= sb.size() || (ia < sa.size() && sa[ia] <= sb[ib]))
      v = sa[ia];
    else
      v = sb[ib];
    while (ia < sa.size() && sa[ia] <= v) ++ia;
    while (ib < sb.size() && sb[ib] <= v) ++ib;
    best = std::max(best, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }
  return best;
}

Ecdf make_ecdf(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  Ecdf e;
  const double n = static_cast<double>(samples.size());
  e.heights.resize(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) e.heights[k] = static_cast<double>(k + 1) / n;
  e.values = std::move(samples);
  return e;
}

std::array<Ecdf, 4> ecdf_dump(const ConfusionSplit& split, const RealField& u) {
  auto gather = [&](const std::vector<Eigen::Index>& idx) {
    std::vector<double> v;
    v.reserve(idx.size());
    for (Eigen::Index i : idx) {
      if (i < 0 || i >= u.size()) throw InvalidInput("ecdf_dump: index outside uncertainty field");
      v.push_back(u[i]);
    }
    return make_ecdf(std::move(v));
  };
  return {gather(split.tp), gather(split.tn), gather(split.fp), gather(split.fn)};
}

std::string to_string(UncertaintyKind k) {
  switch (k) {
    case UncertaintyKind::dempster: return "dempster";
    case UncertaintyKind::epistemic: return "epistemic";
    case UncertaintyKind::aleatoric: return "aleatoric";
    case UncertaintyKind::entropy: return "entropy";
    case UncertaintyKind::stddev: return "stddev";
  }
  return "unknown";
}

UncertaintyKind parse_uncertainty_kind(const std::string& s) {
  for (auto k : {UncertaintyKind::dempster, UncertaintyKind::epistemic, UncertaintyKind::aleatoric,
                 UncertaintyKind::entropy, UncertaintyKind::stddev})
    if (to_string(k) == s) return k;
  throw InvalidInput("unknown uncertainty kind '" + s + "'");
}

SliceReport slice_report(const SlicePrediction& p) {
  const Eigen::Index n = p.truth.size();
  check_same(p.pred.size(), n, "slice_report");
  check_same(p.p_fg.size(), n, "slice_report");
  SliceReport r;
  r.id = p.id;
  r.dice = dice(p.pred, p.truth);
  r.accuracy = accuracy(p.pred, p.truth);
  const ProbField probs = binary_probs(p.p_fg), y = one_hot(p.truth);
  r.brier = brier(probs, y);
  r.nll = nll(probs, y);

  BinaryField wrong(n);
  for (Eigen::Index i = 0; i < n; ++i) wrong[i] = (p.pred[i] != 0) != (p.truth[i] != 0);
  for (const auto& [kind, u] : p.uncertainty) {
    check_same(u.size(), n, "slice_report");
    KindStats ks;
    ks.mean_u = u.mean();
    ks.pt_biserial = point_biserial(wrong, u);
    std::vector<double> right_u, wrong_u;
    for (Eigen::Index i = 0; i < n; ++i) (wrong[i] ? wrong_u : right_u).push_back(u[i]);
    ks.ks = ks_statistic(right_u, wrong_u);
    r.kinds[kind] = ks;
  }
  return r;
}

Summary summarize(const std::vector<SliceReport>& reports, bool exclude_invalid) {
  Summary s;
  s.slices = reports.size();
  if (reports.empty()) return s;
  const double n = static_cast<double>(reports.size());
  RealField dice_v(reports.size()), acc_v(reports.size()), brier_v(reports.size()), nll_v(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    dice_v[i] = reports[i].dice;
    acc_v[i] = reports[i].accuracy;
    brier_v[i] = reports[i].brier;
    nll_v[i] = reports[i].nll;
  }
  s.dice = dice_v.sum() / n;
  s.accuracy = acc_v.sum() / n;
  s.brier = brier_v.sum() / n;
  s.nll = nll_v.sum() / n;

  for (const auto& [kind, unused] : reports.front().kinds) {
    (void)unused;
    KindSummary k;
    RealField mean_u(reports.size());
    double ptb_sum = 0.0, ks_sum = 0.0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const auto it = reports[i].kinds.find(kind);
      if (it == reports[i].kinds.end()) throw InvalidInput("summarize: slices report different uncertainty kinds");
      const KindStats& st = it->second;
      mean_u[i] = st.mean_u;
      if (st.pt_biserial) {
        ptb_sum += *st.pt_biserial;
        ++k.pt_biserial_slices;
      }
      if (st.ks) {
        ks_sum += *st.ks;
        ++k.ks_slices;
      }
    }
    const double ptb_n = exclude_invalid ? static_cast<double>(k.pt_biserial_slices) : n;
    const double ks_n = exclude_invalid ? static_cast<double>(k.ks_slices) : n;
    if (ptb_n > 0) k.pt_biserial = ptb_sum / ptb_n;
    if (ks_n > 0) k.ks = ks_sum / ks_n;
    k.mean_u = mean_u.sum() / n;
    k.spearman_brier = spearman(mean_u, brier_v);
    k.spearman_nll = spearman(mean_u, nll_v);
    k.spearman_dice = spearman(mean_u, dice_v);
    k.spearman_accuracy = spearman(mean_u, acc_v);
    s.kinds[kind] = k;
  }
  return s;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string opt(const std::optional<double>& v) {
  return v ? format_number(*v) : "NA";
}

std::ofstream open_out(const std::filesystem::path& path, const std::string& provenance) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  if (!provenance.empty()) out << "# " << provenance << "\n";
  return out;
}

}  // namespace

void write_slice_csv(const std::filesystem::path& path, const std::vector<SliceReport>& reports,
                     const std::string& provenance) {
  auto out = open_out(path, provenance);
  out << "slice,dice,accuracy,brier,nll";
  if (!reports.empty())
    for (const auto& [kind, st] : reports.front().kinds) {
      const std::string k = to_string(kind);
      out << ",pt_biserial_" << k << ",ks_" << k << ",mean_" << k;
    }
  out << "\n";
  for (const auto& r : reports) {
    out << r.id << "," << format_number(r.dice) << "," << format_number(r.accuracy) << ","
        << format_number(r.brier) << "," << format_number(r.nll);
    for (const auto& [kind, st] : r.kinds)
      out << "," << opt(st.pt_biserial) << "," << opt(st.ks) << "," << format_number(st.mean_u);
    out << "\n";
  }
  if (!out) throw ParseError("failed writing " + path.string());
}

void write_summary(const std::filesystem::path& path, const Summary& s, const std::string& provenance) {
  auto out = open_out(path, provenance);
  out << "slices = " << s.slices << "\n";
  out << "dice = " << format_number(s.dice) << "\n";
  out << "accuracy = " << format_number(s.accuracy) << "\n";
  out << "brier = " << format_number(s.brier) << "\n";
  out << "nll = " << format_number(s.nll) << "\n";
  for (const auto& [kind, k] : s.kinds) {
    const std::string p = to_string(kind);
    out << "pt_biserial." << p << " = " << opt(k.pt_biserial) << "\n";
    out << "pt_biserial_slices." << p << " = " << k.pt_biserial_slices << "\n";
    out << "ks." << p << " = " << opt(k.ks) << "\n";
    out << "ks_slices." << p << " = " << k.ks_slices << "\n";
    out << "mean_uncertainty." << p << " = " << format_number(k.mean_u) << "\n";
    out << "spearman_brier." << p << " = " << opt(k.spearman_brier) << "\n";
    out << "spearman_nll." << p << " = " << opt(k.spearman_nll) << "\n";
    out << "spearman_dice." << p << " = " << opt(k.spearman_dice) << "\n";
    out << "spearman_accuracy." << p << " = " << opt(k.spearman_accuracy) << "\n";
  }
  if (!out) throw ParseError("failed writing " + path.string());
}

void write_ecdf(const std::filesystem::path& path, const Ecdf& e, const std::string& provenance) {
  auto out = open_out(path, provenance);
  out << "value,cumulative\n";
  for (std::size_t i = 0; i < e.values.size(); ++i)
    out << format_number(e.values[i]) << "," << format_number(e.heights[i]) << "\n";
  if (!out) throw ParseError("failed writing " + path.string());
}

}  // namespace edl::metrics
