// edlseg: generate synthetic data, train evidential and baseline U-Nets,
// evaluate uncertainty-error correlations, run active learning, and dump
// uncertainty heatmaps.

#include "edl/active.hpp"
#include "edl/baselines.hpp"
#include "edl/checkpoint.hpp"
#include "edl/config.hpp"
#include "edl/data.hpp"
#include "edl/error.hpp"
#include "edl/metrics.hpp"
#include "edl/predict.hpp"
#include "edl/rng.hpp"
#include "edl/trainer.hpp"
#include "edl/version.hpp"

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace edl;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kRuntime = 4 };

enum class Method { edl, baseline, mc_dropout, ensemble };

Method parse_method(const std::string& s) {
  if (s == "edl") return Method::edl;
  if (s == "baseline") return Method::baseline;
  if (s == "mc_dropout") return Method::mc_dropout;
  if (s == "ensemble") return Method::ensemble;
  throw ConfigError("unknown method '" + s + "' (expected edl, baseline, mc_dropout or ensemble)");
}

std::string provenance(const std::string& command, const KeyValueConfig& cfg) {
  // The output location is not part of the experiment, so the same run
  // written to two directories produces identical files.
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016" PRIx64, cfg.without("out").hash());
  return "edlseg " + std::string(kVersion) + " " + command + " config " + hash;
}

/// Config file (optional) plus `--key value` / `--key=value` overrides.
KeyValueConfig load_config(const std::string& file, const std::vector<std::string>& extras) {
  KeyValueConfig cfg = file.empty() ? KeyValueConfig{} : KeyValueConfig::from_file(file);
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument '" + a + "'");
    const auto eq = a.find('=');
    if (eq != std::string::npos) {
      cfg.set(a.substr(2, eq - 2), a.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("option '" + a + "' needs a value");
      cfg.set(a.substr(2), extras[++i]);
    }
  }
  return cfg;
}

fs::path output_dir(const KeyValueConfig& cfg) {
  const fs::path out = cfg.require_string("out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw ParseError("cannot create output directory " + out.string());
  return out;
}

std::ofstream open_text(const fs::path& p, const std::string& prov) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open " + p.string() + " for writing");
  out << "# " << prov << "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Shared configuration pieces

struct DataSplit {
  data::Dataset all, train, val, test;
};

DataSplit load_split(const KeyValueConfig& cfg) {
  const fs::path dir = cfg.require_string("data");
  const auto fr = cfg.get_double_list("split", {0.64, 0.16, 0.20});
  if (fr.size() != 3) throw ConfigError("split needs three fractions (train, val, test)");
  const std::uint64_t seed = cfg.get_u64("split_seed", 0);
  DataSplit s;
  s.all = data::load_dataset(dir);
  data::Split sp;
  try {
    sp = data::split(s.all.size(), {fr[0], fr[1], fr[2]}, seed);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  s.train = data::subset(s.all, sp.train);
  s.val = data::subset(s.all, sp.val);
  s.test = data::subset(s.all, sp.test);
  return s;
}

nn::UNetConfig net_config(const KeyValueConfig& cfg, const data::Dataset& ds, std::uint64_t seed) {
  nn::UNetConfig net;
  net.input_channels = static_cast<int>(ds.front().channels.size());
  net.image_size = ds.front().height();
  if (ds.front().width() != net.image_size) throw ParseError("images must be square");
  net.filters = cfg.get_int_list("filters", net.filters);
  net.bottleneck_filters = cfg.get_int("bottleneck_filters", 0);
  net.dropout_rate = cfg.get_double("dropout_rate", net.dropout_rate);
  try {
    net.activation = nn::parse_activation(cfg.get_string("activation", "softplus"));
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  net.seed = stream_seed(seed, 1);
  return net;
}

train::TrainConfig train_config(const KeyValueConfig& cfg, std::uint64_t seed) {
  train::TrainConfig tc;
  tc.epochs = cfg.get_int("epochs", tc.epochs);
  tc.batch_size = cfg.get_int("batch_size", tc.batch_size);
  tc.learning_rate = cfg.get_double("learning_rate", tc.learning_rate);
  tc.weights.lambda_kl = cfg.get_double("lambda_kl", tc.weights.lambda_kl);
  tc.weights.lambda_dice = cfg.get_double("lambda_dice", tc.weights.lambda_dice);
  const std::string mode = cfg.get_string("kl_mode", "transform");
  if (mode == "transform")
    tc.kl_mode = loss::KlMode::transform;
  else if (mode == "masked")
    tc.kl_mode = loss::KlMode::masked;
  else
    throw ConfigError("kl_mode must be 'transform' or 'masked'");
  tc.seed = stream_seed(seed, 2);
  return tc;
}

template <typename F>
auto as_config_error(F&& f) {
  try {
    return f();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const KeyValueConfig& cfg) {
  data::SynthConfig sc;
  sc.image_size = cfg.get_int("image_size", sc.image_size);
  sc.channels = cfg.get_int("channels", sc.channels);
  sc.sample_count = cfg.get_int("samples", 320);
  sc.min_blobs = cfg.get_int("min_blobs", sc.min_blobs);
  sc.max_blobs = cfg.get_int("max_blobs", sc.max_blobs);
  sc.noise_sigma = cfg.get_double("noise_sigma", sc.noise_sigma);
  sc.blur_sigma = cfg.get_double("blur_sigma", sc.blur_sigma);
  sc.seed = cfg.get_u64("seed", 0);
  const fs::path out = cfg.require_string("out");
  cfg.check_all_used();
  as_config_error([&] { sc.validate(); return 0; });
  const auto ds = data::generate(sc);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw ParseError("cannot create output directory " + out.string());
  data::save_dataset(ds, out, provenance("generate", cfg));
  std::cout << "wrote " << ds.size() << " samples to " << out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

void write_history(std::ofstream& out, int member, const std::vector<train::EpochRecord>& h) {
  using metrics::format_number;
  for (const auto& r : h)
    out << member << "," << r.epoch << "," << format_number(r.bayes) << "," << format_number(r.kl) << ","
        << format_number(r.dice) << "," << format_number(r.total) << "," << format_number(r.val_dice) << "\n";
}

int cmd_train(const KeyValueConfig& cfg) {
  const Method method = parse_method(cfg.get_string("method", "edl"));
  const std::uint64_t seed = cfg.get_u64("seed", 0);
  const int members = cfg.get_int("ensemble_members", 5);
  (void)cfg.require_string("out");
  const auto split = load_split(cfg);
  nn::UNetConfig net = net_config(cfg, split.train, seed);
  const train::TrainConfig tc = train_config(cfg, seed);
  cfg.check_all_used();
  as_config_error([&] { net.validate(); tc.validate(); return 0; });
  if (split.train.empty()) throw ConfigError("split leaves no training samples");

  const fs::path out = output_dir(cfg);
  const std::string prov = provenance("train", cfg);
  const data::Dataset* val = split.val.empty() ? nullptr : &split.val;
  auto hist = open_text(out / "history.csv", prov);
  hist << "member,epoch,bayes,kl,dice,total,val_dice\n";

  if (method == Method::edl) {
    net.head = nn::Head::evidential;
    nn::UNet<float> model(net);
    train::Trainer<float> trainer(model, tc);
    write_history(hist, 0, trainer.fit(split.train, val));
    nn::save_checkpoint(out / "model.ckpt", model, prov);
  } else if (method == Method::ensemble) {
    const auto spec = as_config_error([&] {
      auto s = baselines::EnsembleSpec::from_base(members, stream_seed(seed, 3));
      s.validate();
      return s;
    });
    for (int m = 0; m < members; ++m) {
      nn::UNetConfig mnet = net;
      train::TrainConfig mtc = tc;
      mnet.seed = mtc.seed = spec.seeds[m];
      auto trained = baselines::train_baseline<float>(mnet, mtc, split.train, val);
      write_history(hist, m, trained.history);
      nn::save_checkpoint(out / ("member" + std::to_string(m) + ".ckpt"), trained.model, prov);
    }
  } else {
    auto trained = baselines::train_baseline<float>(net, tc, split.train, val);
    write_history(hist, 0, trained.history);
    nn::save_checkpoint(out / "model.ckpt", trained.model, prov);
  }
  if (!hist) throw ParseError("failed writing " + (out / "history.csv").string());
  std::cout << "trained " << cfg.get_string("method", "edl") << " model(s) in " << out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

std::vector<nn::UNet<float>> load_models(const std::string& list) {
  std::vector<nn::UNet<float>> models;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto end = comma == std::string::npos ? list.size() : comma;
    const std::string path = list.substr(start, end - start);
    if (path.empty()) throw ConfigError("empty checkpoint path in '" + list + "'");
    models.push_back(nn::load_checkpoint<float>(path));
    start = end + 1;
  }
  return models;
}

Method default_method(const std::vector<nn::UNet<float>>& models) {
  if (models.size() > 1) return Method::ensemble;
  return models.front().config().head == nn::Head::evidential ? Method::edl : Method::baseline;
}

std::vector<metrics::SlicePrediction> run_method(Method method, const std::vector<nn::UNet<float>>& models,
                                                 const data::Dataset& ds, const baselines::McDropoutSpec& mc) {
  const auto head = models.front().config().head;
  if ((method == Method::edl) != (head == nn::Head::evidential))
    throw ConfigError("checkpoint head '" + nn::to_string(head) + "' does not fit the requested method");
  if (method != Method::ensemble && models.size() != 1) throw ConfigError("this method takes exactly one checkpoint");
  switch (method) {
    case Method::edl: return predict::predict_edl(models.front(), ds);
    case Method::baseline: return baselines::predict_softmax(models.front(), ds);
    case Method::mc_dropout: return baselines::mc_dropout_predict(models.front(), ds, mc);
    case Method::ensemble: {
      std::vector<const nn::UNet<float>*> ptrs;
      for (const auto& m : models) ptrs.push_back(&m);
      return baselines::ensemble_predict(ptrs, ds);
    }
  }
  return {};
}

const data::Dataset& pick_subset(const DataSplit& s, const std::string& name) {
  if (name == "test") return s.test;
  if (name == "val") return s.val;
  if (name == "train") return s.train;
  if (name == "all") return s.all;
  throw ConfigError("subset must be test, val, train or all");
}

void write_reports(const fs::path& out, const std::string& stem, const std::vector<metrics::SliceReport>& reps,
                   bool exclude_invalid, const std::string& prov) {
  metrics::write_slice_csv(out / (stem + "slices.csv"), reps, prov);
  metrics::write_summary(out / (stem + "summary.txt"), metrics::summarize(reps, exclude_invalid), prov);
}

int cmd_eval(const KeyValueConfig& cfg) {
  const std::string ckpts = cfg.require_string("checkpoint");
  const std::string method_name = cfg.get_string("method", "");
  const std::string subset_name = cfg.get_string("subset", "test");
  const bool exclude_invalid = cfg.get_bool("exclude_invalid", true);
  baselines::McDropoutSpec mc;
  mc.pass_count = cfg.get_int("mc_passes", mc.pass_count);
  mc.seed = cfg.get_u64("mc_seed", 0);
  (void)cfg.require_string("out");
  const auto split = load_split(cfg);
  cfg.check_all_used();
  const data::Dataset& ds = pick_subset(split, subset_name);
  if (ds.empty()) throw ConfigError("subset '" + subset_name + "' is empty");

  const auto models = load_models(ckpts);
  const Method method = method_name.empty() ? default_method(models) : parse_method(method_name);
  const auto preds = run_method(method, models, ds, mc);

  const fs::path out = output_dir(cfg);
  const std::string prov = provenance("eval", cfg);
  std::vector<metrics::SliceReport> reps;
  for (const auto& p : preds) reps.push_back(metrics::slice_report(p));
  write_reports(out, "", reps, exclude_invalid, prov);

  // eCDFs over all evaluated pixels, one file per uncertainty and confusion cell.
  for (const auto& [kind, unused] : preds.front().uncertainty) {
    (void)unused;
    std::vector<double> u;
    std::vector<std::uint8_t> pv, tv;
    for (const auto& p : preds) {
      u.insert(u.end(), p.uncertainty.at(kind).data(), p.uncertainty.at(kind).data() + p.uncertainty.at(kind).size());
      pv.insert(pv.end(), p.pred.data(), p.pred.data() + p.pred.size());
      tv.insert(tv.end(), p.truth.data(), p.truth.data() + p.truth.size());
    }
    const auto split_px = metrics::confusion_split(Eigen::Map<metrics::BinaryField>(pv.data(), pv.size()),
                                                   Eigen::Map<metrics::BinaryField>(tv.data(), tv.size()));
    const auto ecdfs = metrics::ecdf_dump(split_px, Eigen::Map<Eigen::ArrayXd>(u.data(), u.size()));
    const char* cells[4] = {"tp", "tn", "fp", "fn"};
    for (int c = 0; c < 4; ++c)
      metrics::write_ecdf(out / ("ecdf_" + metrics::to_string(kind) + "_" + cells[c] + ".csv"), ecdfs[c], prov);
  }
  std::cout << "evaluated " << reps.size() << " slices into " << out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// active

int cmd_active(const KeyValueConfig& cfg) {
  active::ActiveConfig ac;
  const std::uint64_t seed = cfg.get_u64("seed", 0);
  ac.query_kind = as_config_error([&] { return active::parse_query_kind(cfg.get_string("query_kind", "dempster")); });
  ac.n_acquire = cfg.get_int("n_acquire", ac.n_acquire);
  ac.epochs_per_round = cfg.get_int("epochs_per_round", ac.epochs_per_round);
  ac.rounds = cfg.get_int("rounds", ac.rounds);
  ac.initial_labeled_count = cfg.get_int("initial_labeled", 0);
  ac.seed = stream_seed(seed, 4);
  const bool exclude_invalid = cfg.get_bool("exclude_invalid", true);
  (void)cfg.require_string("out");
  const auto split = load_split(cfg);
  ac.net = net_config(cfg, split.train, seed);
  ac.train = train_config(cfg, seed);
  cfg.check_all_used();
  as_config_error([&] { ac.validate(); return 0; });
  if (split.train.empty() || split.test.empty()) throw ConfigError("active learning needs train and test samples");

  const auto res = active::run_active_loop(ac, split.train, split.test);
  const fs::path out = output_dir(cfg);
  const std::string prov = provenance("active", cfg);
  active::write_history_csv(out / "history.csv", res.rounds, prov);
  {
    auto acq = open_text(out / "acquisitions.csv", prov);
    acq << "round,mean_score,exhausted,acquired\n";
    for (const auto& h : res.pool.history) {
      acq << h.round << "," << metrics::format_number(h.mean_score) << "," << (h.exhausted ? 1 : 0) << ",";
      for (std::size_t i = 0; i < h.acquired.size(); ++i) acq << (i ? " " : "") << split.train[h.acquired[i]].id;
      acq << "\n";
    }
  }
  write_reports(out, "final_", res.final_report, exclude_invalid, prov);
  if (res.exhaustion_report) write_reports(out, "exhaustion_", *res.exhaustion_report, exclude_invalid, prov);
  std::cout << "ran " << res.rounds.size() << " rounds; history in " << (out / "history.csv").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// heatmap

int cmd_heatmap(const KeyValueConfig& cfg) {
  const std::string ckpts = cfg.require_string("checkpoint");
  const std::string id = cfg.require_string("sample");
  const std::string kind_name = cfg.get_string("kind", "dempster");
  const std::string method_name = cfg.get_string("method", "");
  baselines::McDropoutSpec mc;
  mc.pass_count = cfg.get_int("mc_passes", mc.pass_count);
  mc.seed = cfg.get_u64("mc_seed", 0);
  const fs::path data_dir = cfg.require_string("data");
  (void)cfg.require_string("out");
  cfg.check_all_used();
  const auto kind = as_config_error([&] { return metrics::parse_uncertainty_kind(kind_name); });

  const auto all = data::load_dataset(data_dir);
  std::size_t idx = all.size();
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].id == id) idx = i;
  if (idx == all.size()) throw ConfigError("sample '" + id + "' is not in " + data_dir.string());
  const data::Dataset one{all[idx]};

  const auto models = load_models(ckpts);
  const Method method = method_name.empty() ? default_method(models) : parse_method(method_name);
  const auto preds = run_method(method, models, one, mc);
  const auto& p = preds.front();
  const auto it = p.uncertainty.find(kind);
  if (it == p.uncertainty.end()) throw ConfigError("method does not provide uncertainty kind '" + kind_name + "'");

  // Linear encoding q = 65535 (u - lo) / (hi - lo) with lo = 0; hi and lo go
  // to the sidecar so absolute values are recoverable.
  const int h = one.front().height(), w = one.front().width();
  const Eigen::ArrayXd& u = it->second;
  const double lo = 0.0, hi = u.maxCoeff() > 0.0 ? u.maxCoeff() : 1.0;
  Eigen::ArrayXXd img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(y, x) = (u[y * w + x] - lo) / (hi - lo);

  const fs::path out = output_dir(cfg);
  const std::string prov = provenance("heatmap", cfg);
  const std::string stem = "heatmap_" + id + "_" + kind_name;
  data::write_pgm(out / (stem + ".pgm"), img, 65535, prov);
  {
    auto side = open_text(out / (stem + ".txt"), prov);
    side << "kind = " << kind_name << "\nencoding = linear16\nscale_min = " << metrics::format_number(lo)
         << "\nscale_max = " << metrics::format_number(hi) << "\ndata_min = " << metrics::format_number(u.minCoeff())
         << "\ndata_max = " << metrics::format_number(u.maxCoeff()) << "\n";
  }
  {
    // Predicted-foreground pixels with a 4-neighbour outside the mask (the
    // image border counts as outside).
    auto csv = open_text(out / ("contour_" + id + ".csv"), prov);
    csv << "x,y\n";
    auto fg = [&](int y, int x) { return y >= 0 && y < h && x >= 0 && x < w && p.pred[y * w + x] != 0; };
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (fg(y, x) && (!fg(y - 1, x) || !fg(y + 1, x) || !fg(y, x - 1) || !fg(y, x + 1)))
          csv << x << "," << y << "\n";
  }
  std::cout << "wrote " << (out / (stem + ".pgm")).string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidential U-Net segmentation with uncertainty evaluation and active learning"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  std::string config_file;
  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const KeyValueConfig&);
  };
  const Sub subs[] = {
      {"generate", "write a synthetic dataset", cmd_generate},
      {"train", "train a model and write a checkpoint", cmd_train},
      {"eval", "per-slice metrics, summary and eCDF dumps", cmd_eval},
      {"active", "pool-based active learning", cmd_active},
      {"heatmap", "uncertainty heatmap and predicted contour", cmd_heatmap},
  };
  std::vector<CLI::App*> apps;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("-c,--config", config_file, "key = value configuration file");
    sub->allow_extras();
    sub->footer("Any config key can be given as --key value; flags win over the file.");
    apps.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  for (std::size_t i = 0; i < apps.size(); ++i) {
    if (!apps[i]->parsed()) continue;
    try {
      const auto cfg = load_config(config_file, apps[i]->remaining());
      return subs[i].run(cfg);
    } catch (const ConfigError& e) {
      std::cerr << "edlseg " << subs[i].name << ": config error: " << e.what() << "\n";
      return kConfig;
    } catch (const ParseError& e) {
      std::cerr << "edlseg " << subs[i].name << ": data error: " << e.what() << "\n";
      return kData;
    } catch (const std::exception& e) {
      std::cerr << "edlseg " << subs[i].name << ": error: " << e.what() << "\n";
      return kRuntime;
    }
  }
  return kConfig;
}
