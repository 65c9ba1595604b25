#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "balms/counts.hpp"
#include "balms/csv.hpp"
#include "balms/dataset.hpp"
#include "balms/errors.hpp"
#include "balms/eval.hpp"
#include "balms/losses.hpp"
#include "balms/meta.hpp"
#include "balms/model.hpp"
#include "balms/toy.hpp"
#include "balms/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using balms::invalid_spec;
using balms::datagen::Dataset;
using balms::losses::LossKind;
using balms::train::SamplerKind;
using balms::train::TrainConfig;

namespace {

balms::losses::LossKind parse_loss_kind(const std::string& s) {
  if (s == "softmax") return LossKind::SoftmaxCE;
  if (s == "balanced") return LossKind::BalancedSoftmax;
  if (s == "binary") return LossKind::BinaryLogisticBalanced;
  if (s == "cbw") return LossKind::SoftmaxCbw;
  throw invalid_spec("unknown loss '" + s + "' (softmax, balanced, binary, cbw)");
}

SamplerKind parse_sampler(const std::string& s) {
  if (s == "instance") return SamplerKind::Instance;
  if (s == "class-balanced") return SamplerKind::ClassBalanced;
  if (s == "meta-sampler") return SamplerKind::MetaSampler;
  if (s == "meta-reweighter") return SamplerKind::MetaReweighter;
  throw invalid_spec("unknown sampler '" + s +
                     "' (instance, class-balanced, meta-sampler, meta-reweighter)");
}

void require_keys(const json& obj, const std::vector<std::string>& allowed,
                  const std::string& where) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const auto& key : allowed) ok = ok || item.key() == key;
    if (!ok) throw invalid_spec("config: unknown key '" + item.key() + "' in " + where);
  }
}

struct TrainOptions {
  TrainConfig cfg;
  bool decoupled = false;
  long stage1_iters = 0;  // 0: same as iters
  long meta_size = 64;
};

TrainOptions load_train_options(const std::string& config_path) {
  TrainOptions opt;
  opt.cfg.sched.total = 0;  // resolved to iters after overrides
  if (config_path.empty()) return opt;
  std::ifstream in(config_path);
  if (!in.good()) throw invalid_spec("cannot open config " + config_path);
  json root = json::parse(in, nullptr, true, true);
  require_keys(root,
               {"loss", "sampler", "schedule", "momentum", "weight_decay", "iters", "batch",
                "hidden", "record_every", "decoupled", "stage1_iters", "meta"},
               "top level");
  if (root.contains("loss")) {
    const json& l = root["loss"];
    require_keys(l, {"kind", "q"}, "loss");
    if (l.contains("kind")) opt.cfg.loss.kind = parse_loss_kind(l["kind"].get<std::string>());
    if (l.contains("q")) opt.cfg.loss.q = l["q"].get<double>();
  }
  if (root.contains("sampler")) opt.cfg.sampler = parse_sampler(root["sampler"].get<std::string>());
  if (root.contains("schedule")) {
    const json& s = root["schedule"];
    require_keys(s, {"lr_max", "lr_min", "warmup"}, "schedule");
    if (s.contains("lr_max")) opt.cfg.sched.lr_max = s["lr_max"].get<double>();
    if (s.contains("lr_min")) opt.cfg.sched.lr_min = s["lr_min"].get<double>();
    if (s.contains("warmup")) opt.cfg.sched.warmup = s["warmup"].get<long>();
  }
  if (root.contains("momentum")) opt.cfg.momentum = root["momentum"].get<double>();
  if (root.contains("weight_decay")) opt.cfg.weight_decay = root["weight_decay"].get<double>();
  if (root.contains("iters")) opt.cfg.iters = root["iters"].get<long>();
  if (root.contains("batch")) opt.cfg.batch = root["batch"].get<int>();
  if (root.contains("hidden")) opt.cfg.hidden = root["hidden"].get<std::vector<int>>();
  if (root.contains("record_every")) opt.cfg.record_every = root["record_every"].get<long>();
  if (root.contains("decoupled")) opt.decoupled = root["decoupled"].get<bool>();
  if (root.contains("stage1_iters")) opt.stage1_iters = root["stage1_iters"].get<long>();
  if (root.contains("meta")) {
    const json& m = root["meta"];
    require_keys(m, {"inner_lr", "outer_lr", "second_order", "meta_size"}, "meta");
    if (m.contains("inner_lr")) opt.cfg.meta.inner_lr = m["inner_lr"].get<double>();
    if (m.contains("outer_lr")) opt.cfg.meta.outer.lr = m["outer_lr"].get<double>();
    if (m.contains("second_order")) opt.cfg.meta.second_order = m["second_order"].get<bool>();
    if (m.contains("meta_size")) opt.meta_size = m["meta_size"].get<long>();
  }
  return opt;
}

struct LoadedData {
  Dataset train;
  std::optional<Dataset> meta, test;
};

LoadedData load_data_dir(const fs::path& dir) {
  const fs::path train_path = dir / "train.csv";
  if (!fs::exists(train_path)) throw invalid_spec("no train.csv in " + dir.string());
  LoadedData data;
  data.train = balms::io::read_dataset(train_path);
  if (fs::exists(dir / "counts.csv")) {
    const auto counts = balms::io::read_counts(dir / "counts.csv");
    if (counts.n != data.train.counts.n)
      throw invalid_spec("counts.csv disagrees with the labels in train.csv");
  }
  if (fs::exists(dir / "meta.csv")) data.meta = balms::io::read_dataset(dir / "meta.csv");
  if (fs::exists(dir / "test.csv")) data.test = balms::io::read_dataset(dir / "test.csv");
  return data;
}

// Shared plumbing for train and ablate: resolve the dataset-dependent parts
// of a config and run, decoupled or not.
balms::train::TrainResult run_training(const TrainOptions& opt, const LoadedData& data,
                                       std::uint64_t seed) {
  TrainConfig cfg = opt.cfg;
  if (cfg.sched.total == 0) cfg.sched.total = cfg.iters;
  cfg.loss.counts = data.train.counts;

  std::optional<Dataset> built_meta;
  const Dataset* meta_set = nullptr;
  if (balms::train::needs_meta_set(cfg.sampler)) {
    if (data.meta) {
      meta_set = &*data.meta;
    } else {
      built_meta = balms::datagen::build_meta_set(data.train, opt.meta_size,
                                                  balms::mix_seed(seed, 3));
      meta_set = &*built_meta;
    }
  }

  if (!opt.decoupled) return balms::train::train_end_to_end(data.train, meta_set, cfg, seed);

  if (cfg.hidden.empty())
    throw invalid_spec("decoupled training needs at least one hidden layer");
  TrainConfig stage1 = cfg;
  stage1.loss = balms::losses::LossSpec{};
  stage1.sampler = SamplerKind::Instance;
  if (opt.stage1_iters > 0) {
    stage1.iters = opt.stage1_iters;
    stage1.sched.total = opt.stage1_iters;
  }
  const balms::train::TrainResult r1 =
      balms::train::train_end_to_end(data.train, nullptr, stage1, balms::mix_seed(seed, 101));
  return balms::train::train_decoupled(r1.params, data.train, meta_set, cfg,
                                       balms::mix_seed(seed, 102));
}

void write_train_outputs(const fs::path& out, const balms::train::TrainResult& res,
                         const LoadedData& data) {
  fs::create_directories(out);
  balms::io::write_history(out / "history.csv", res.history);
  if (!res.meta_history.empty())
    balms::io::write_meta_history(out / "meta_history.csv", res.meta_history);
  if (res.sampler) balms::io::write_rates(out / "rates.csv", res.sampler->rates());
  balms::io::write_model(out / "model.csv", res.params);
  if (data.test) {
    const balms::eval::EvalReport rep =
        balms::eval::evaluate(res.params, *data.test, balms::datagen::split_shots(data.train.counts));
    balms::io::write_report(out / "report.csv", rep);
    balms::io::write_py_marginal(out / "py_marginal.csv", rep.p_y);
  }
}

struct GenArgs {
  std::string profile = "exponential";
  int k = 10;
  long head = 100;
  double factor = 100.0;
  double alpha = 6.0;
  long min_count = 1;
  std::vector<long> explicit_counts;
  int d = 2;
  double sep = 1.5;
  long meta_size = 0;
  long test_per_class = 0;
};

void cmd_gen_data(const GenArgs& a, const fs::path& out, std::uint64_t seed) {
  balms::datagen::ImbalanceSpec spec;
  if (a.profile == "exponential")
    spec.profile = balms::datagen::Profile::Exponential;
  else if (a.profile == "pareto")
    spec.profile = balms::datagen::Profile::Pareto;
  else if (a.profile == "explicit")
    spec.profile = balms::datagen::Profile::Explicit;
  else
    throw invalid_spec("unknown profile '" + a.profile + "' (exponential, pareto, explicit)");
  spec.k = a.k;
  spec.head_size = a.head;
  spec.factor = a.factor;
  spec.alpha = a.alpha;
  spec.min_count = a.min_count;
  spec.explicit_counts = a.explicit_counts;

  const auto counts = balms::datagen::make_counts(spec, balms::mix_seed(seed, 1));
  const Dataset train =
      balms::datagen::gen_gaussian_mixture(counts, a.d, a.sep, balms::mix_seed(seed, 2));

  fs::create_directories(out);
  balms::io::write_counts(out / "counts.csv", counts);
  balms::io::write_dataset(out / "train.csv", train);
  if (a.meta_size > 0)
    balms::io::write_dataset(out / "meta.csv",
                             balms::datagen::build_meta_set(train, a.meta_size,
                                                            balms::mix_seed(seed, 3)));
  if (a.test_per_class > 0)
    balms::io::write_dataset(
        out / "test.csv",
        balms::datagen::gen_gaussian_mixture(
            balms::datagen::uniform_counts(counts.k(), a.test_per_class), a.d, a.sep,
            balms::mix_seed(seed, 4)));
}

void cmd_ablate(const TrainOptions& base, const fs::path& data_dir, const fs::path& out,
                std::uint64_t seed) {
  const LoadedData data = load_data_dir(data_dir);
  if (!data.test) throw invalid_spec("ablate needs a test.csv in the data directory");

  struct Cell {
    const char* name;
    LossKind loss;
    double q;
    SamplerKind sampler;
  };
  const std::vector<Cell> grid = {
      {"softmax", LossKind::SoftmaxCE, 1.0, SamplerKind::Instance},
      {"cbw", LossKind::SoftmaxCbw, 1.0, SamplerKind::Instance},
      {"cbs", LossKind::SoftmaxCE, 1.0, SamplerKind::ClassBalanced},
      {"binary", LossKind::BinaryLogisticBalanced, 1.0, SamplerKind::Instance},
      {"balanced_q4", LossKind::BalancedSoftmax, 0.25, SamplerKind::Instance},
      {"balanced", LossKind::BalancedSoftmax, 1.0, SamplerKind::Instance},
      {"reweighter", LossKind::SoftmaxCE, 1.0, SamplerKind::MetaReweighter},
      {"balms", LossKind::BalancedSoftmax, 1.0, SamplerKind::MetaSampler},
  };

  std::vector<balms::io::AblationRow> rows;
  const auto split = balms::datagen::split_shots(data.train.counts);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    TrainOptions opt = base;
    opt.cfg.loss.kind = grid[i].loss;
    opt.cfg.loss.q = grid[i].q;
    opt.cfg.sampler = grid[i].sampler;
    const balms::train::TrainResult res =
        run_training(opt, data, balms::mix_seed(seed, 200 + static_cast<std::uint64_t>(i)));
    rows.push_back({grid[i].name, balms::eval::evaluate(res.params, *data.test, split)});
  }
  fs::create_directories(out);
  balms::io::write_ablation(out / "ablation.csv", rows);
}

void cmd_toy2d(const balms::toy::ToyConfig& cfg, const fs::path& out) {
  const balms::toy::ToyResult res = balms::toy::run_toy2d(cfg);
  for (const auto& run : res.runs) {
    const fs::path dir = out / run.name;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < run.probes.size(); ++i) {
      const std::string tag = std::to_string(run.snapshot_iters[i]);
      balms::io::write_boundary_grid(dir / ("grid_" + tag + ".csv"), run.probes[i]);
      balms::io::write_pair_distances(dir / ("boundaries_" + tag + ".csv"), run.probes[i]);
    }
  }
}

struct MetaDemoArgs {
  long cycles = 200;
  int batch = 32;
  double lr = 0.1;
  double outer_lr = 0.01;
  double sep = 1.5;
  long meta_size = 60;
  std::string loss = "balanced";
  bool first_order = false;
};

void cmd_meta_demo(const MetaDemoArgs& a, const fs::path& out, std::uint64_t seed) {
  const auto counts = balms::datagen::make_explicit_counts({300, 30, 3});
  const Dataset train =
      balms::datagen::gen_gaussian_mixture(counts, 2, a.sep, balms::mix_seed(seed, 2));

  TrainConfig cfg;
  cfg.loss.kind = parse_loss_kind(a.loss);
  cfg.loss.counts = counts;
  cfg.sampler = SamplerKind::MetaSampler;
  cfg.sched = {a.lr, a.lr, 0, a.cycles};
  cfg.weight_decay = 0.0;
  cfg.iters = a.cycles;
  cfg.batch = a.batch;
  cfg.record_every = 10;
  cfg.meta.outer.lr = a.outer_lr;
  cfg.meta.second_order = !a.first_order;

  const Dataset meta_set =
      balms::datagen::build_meta_set(train, a.meta_size, balms::mix_seed(seed, 3));
  const balms::train::TrainResult res =
      balms::train::train_end_to_end(train, &meta_set, cfg, seed);

  fs::create_directories(out);
  balms::io::write_meta_history(out / "meta_history.csv", res.meta_history);
  balms::io::write_rates(out / "rates.csv", res.sampler->rates());
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("BALMS_THREADS")) {
    const int n = std::atoi(threads);
    if (n >= 1) Eigen::setNbThreads(n);
  }

  CLI::App app{"long-tailed classification lab"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out = "out";
  std::string config_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--config", config_path, "JSON config file");
  };

  GenArgs gen;
  CLI::App* sub_gen = app.add_subcommand("gen-data", "generate a long-tailed Gaussian dataset");
  add_common(sub_gen);
  sub_gen->add_option("--profile", gen.profile, "exponential, pareto, or explicit");
  sub_gen->add_option("--k", gen.k, "number of classes");
  sub_gen->add_option("--head", gen.head, "largest class size");
  sub_gen->add_option("--factor", gen.factor, "head/tail imbalance factor");
  sub_gen->add_option("--alpha", gen.alpha, "pareto shape");
  sub_gen->add_option("--min-count", gen.min_count, "pareto tail floor");
  sub_gen->add_option("--counts", gen.explicit_counts, "explicit counts, largest first")
      ->delimiter(',');
  sub_gen->add_option("--d", gen.d, "feature dimension");
  sub_gen->add_option("--sep", gen.sep, "class center separation");
  sub_gen->add_option("--meta-size", gen.meta_size, "also write meta.csv with this many rows");
  sub_gen->add_option("--test-per-class", gen.test_per_class,
                      "also write a balanced test.csv with this many rows per class");

  std::string data_dir = "out";
  std::string loss_flag, sampler_flag;
  double q_flag = -1.0;
  long iters_flag = 0;
  bool decoupled_flag = false;
  CLI::App* sub_train = app.add_subcommand("train", "train one configuration");
  add_common(sub_train);
  sub_train->add_option("--data", data_dir, "directory with train.csv (from gen-data)");
  sub_train->add_option("--loss", loss_flag, "softmax, balanced, binary, or cbw");
  sub_train->add_option("--q", q_flag, "balanced-softmax exponent");
  sub_train->add_option("--sampler", sampler_flag,
                        "instance, class-balanced, meta-sampler, or meta-reweighter");
  sub_train->add_option("--iters", iters_flag, "training iterations");
  sub_train->add_flag("--decoupled", decoupled_flag, "freeze extractor, retrain classifier");

  CLI::App* sub_ablate = app.add_subcommand("ablate", "run the fixed configuration grid");
  add_common(sub_ablate);
  sub_ablate->add_option("--data", data_dir, "directory with train.csv and test.csv");
  sub_ablate->add_option("--iters", iters_flag, "training iterations");

  balms::toy::ToyConfig toy;
  CLI::App* sub_toy = app.add_subcommand("toy2d", "three-point decision boundary probe");
  add_common(sub_toy);
  sub_toy->add_option("--iters", toy.iters, "full-batch iterations");
  sub_toy->add_option("--lr", toy.lr, "learning rate");
  sub_toy->add_option("--momentum", toy.momentum, "momentum");
  sub_toy->add_option("--warmup", toy.warmup, "warm-up iterations");
  sub_toy->add_option("--sep", toy.separation, "anchor separation");
  sub_toy->add_option("--resolution", toy.resolution, "probe grid resolution");
  sub_toy->add_option("--snapshots", toy.snapshots, "probe after these iterations")
      ->delimiter(',');

  MetaDemoArgs demo;
  CLI::App* sub_demo = app.add_subcommand("meta-demo", "bi-level sampler demo on a 300/30/3 toy");
  add_common(sub_demo);
  sub_demo->add_option("--cycles", demo.cycles, "meta cycles");
  sub_demo->add_option("--batch", demo.batch, "batch size");
  sub_demo->add_option("--lr", demo.lr, "model learning rate");
  sub_demo->add_option("--outer-lr", demo.outer_lr, "sampler learning rate");
  sub_demo->add_option("--sep", demo.sep, "class center separation");
  sub_demo->add_option("--meta-size", demo.meta_size, "meta set size");
  sub_demo->add_option("--loss", demo.loss, "inner loss");
  sub_demo->add_flag("--first-order", demo.first_order, "drop the surrogate curvature term");

  sub_gen->callback([&] { cmd_gen_data(gen, out, seed); });
  sub_train->callback([&] {
    TrainOptions opt = load_train_options(config_path);
    if (!loss_flag.empty()) opt.cfg.loss.kind = parse_loss_kind(loss_flag);
    if (q_flag >= 0.0) opt.cfg.loss.q = q_flag;
    if (!sampler_flag.empty()) opt.cfg.sampler = parse_sampler(sampler_flag);
    if (iters_flag > 0) {
      opt.cfg.iters = iters_flag;
      opt.cfg.sched.total = 0;
    }
    if (decoupled_flag) opt.decoupled = true;
    const LoadedData data = load_data_dir(data_dir);
    const balms::train::TrainResult res = run_training(opt, data, seed);
    write_train_outputs(out, res, data);
  });
  sub_ablate->callback([&] {
    TrainOptions opt = load_train_options(config_path);
    if (iters_flag > 0) {
      opt.cfg.iters = iters_flag;
      opt.cfg.sched.total = 0;
    }
    cmd_ablate(opt, data_dir, out, seed);
  });
  sub_toy->callback([&] {
    toy.seed = seed;
    cmd_toy2d(toy, out);
  });
  sub_demo->callback([&] { cmd_meta_demo(demo, out, seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const balms::numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
