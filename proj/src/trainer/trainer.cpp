// SPDX-License-Identifier: Apache-2.0
#include "semlink/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "semlink/error.hpp"
#include "semlink/io/array_file.hpp"
#include "semlink/numcore/adam.hpp"

namespace semlink::train {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::superposed: return "superposed";
    case Variant::orthogonal: return "orthogonal";
    case Variant::dmrs_baseline: return "dmrs_baseline";
  }
  return "superposed";
}

Variant variant_from_string(const std::string& s) {
  if (s == "superposed") return Variant::superposed;
  if (s == "orthogonal") return Variant::orthogonal;
  if (s == "dmrs_baseline") return Variant::dmrs_baseline;
  throw UsageError("unknown variant '" + s + "' (superposed | orthogonal | dmrs_baseline)");
}

Streams::Streams(std::uint64_t seed) {
  const num::Rng root(seed);
  init = root.split("init");
  data = root.split("dataset");
  channel = root.split("channel");
  link = root.split("link");
  noise = root.split("noise");
  shuffle = root.split("shuffle");
}

// ---- metrics log ------------------------------------------------------------

namespace {

std::string num_str(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string MetricsLog::to_csv() const {
  std::ostringstream os;
  os << kHeader << '\n';
  for (const auto& r : rows_) {
    os << r.stage << ',' << r.epoch << ',' << num_str(r.loss) << ',' << num_str(r.miou) << ',' << num_str(r.eta)
       << ',' << r.seed << ',' << num_str(r.wallclock_s) << '\n';
  }
  return os.str();
}

void MetricsLog::write(const std::string& path) const {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  io::write_text(path, to_csv());
}

// ---- checkpoints --------------------------------------------------------------

void save_checkpoint(const std::string& dir, const std::vector<const nn::ParamList*>& lists,
                     const CheckpointInfo& info) {
  fs::create_directories(dir);
  json params = json::array();
  for (const auto* list : lists) {
    for (const auto& p : list->items()) {
      const std::string file = p.name + ".f64";
      io::write_f64((fs::path(dir) / file).string(), p.tensor.storage());
      params.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"dtype", "float64"}, {"file", file}});
    }
  }
  json m;
  m["config_hash"] = hex64(info.config_hash);
  m["stage"] = info.stage;
  m["epoch"] = info.epoch;
  m["variant"] = info.variant;
  m["metric"] = std::isfinite(info.metric) ? json(info.metric) : json(nullptr);
  m["params"] = std::move(params);
  io::write_text((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

namespace {

json read_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / "manifest.json";
  if (!fs::exists(path)) throw IoError("no checkpoint manifest at " + path.string());
  try {
    return json::parse(io::read_text(path.string()));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

CheckpointInfo read_checkpoint_info(const std::string& dir) {
  const json m = read_manifest(dir);
  CheckpointInfo info;
  try {
    info.config_hash = std::stoull(m.at("config_hash").get<std::string>(), nullptr, 16);
    info.stage = m.at("stage").get<int>();
    info.epoch = m.at("epoch").get<std::size_t>();
    info.variant = m.at("variant").get<std::string>();
    info.metric = m.at("metric").is_null() ? kNaN : m.at("metric").get<double>();
  } catch (const std::exception& e) {
    throw IoError(dir + "/manifest.json: malformed (" + e.what() + ")");
  }
  return info;
}

CheckpointInfo load_checkpoint(const std::string& dir, const std::vector<nn::ParamList*>& lists,
                               std::uint64_t expected_hash, const std::string& expected_variant) {
  const CheckpointInfo info = read_checkpoint_info(dir);
  if (info.config_hash != expected_hash) {
    throw ConfigError("checkpoint " + dir + " has config hash " + hex64(info.config_hash) + ", expected " +
                      hex64(expected_hash));
  }
  if (!expected_variant.empty() && info.variant != expected_variant) {
    throw ConfigError("checkpoint " + dir + " holds variant '" + info.variant + "', expected '" + expected_variant +
                      "'");
  }
  const json m = read_manifest(dir);
  for (auto* list : lists) {
    for (const auto& p : list->items()) {
      const json* entry = nullptr;
      for (const auto& e : m.at("params")) {
        if (e.at("name").get<std::string>() == p.name) entry = &e;
      }
      if (!entry) throw ConfigError("checkpoint " + dir + " lacks parameter " + p.name);
      if (entry->at("shape").get<num::Shape>() != p.tensor.shape()) {
        throw ConfigError("checkpoint parameter " + p.name + " has shape " +
                          num::shape_str(entry->at("shape").get<num::Shape>()) + ", expected " +
                          num::shape_str(p.tensor.shape()));
      }
      const auto v = io::read_f64((fs::path(dir) / entry->at("file").get<std::string>()).string(),
                                  p.tensor.storage().size());
      Tensor(p.tensor).assign(v);
    }
  }
  return info;
}

// ---- system -------------------------------------------------------------------

namespace {

std::vector<sem::Grid> semantic_grids(const ExperimentConfig& cfg, Variant v) {
  if (v != Variant::orthogonal) return {};
  std::vector<sem::Grid> g;
  for (const auto& s : base::orthogonal_shares(cfg.dims.Q, cfg.dims.N_c, cfg.dims.K)) {
    g.push_back({s.symbols, s.subcarriers});
  }
  return g;
}

}  // namespace

System::System(const ExperimentConfig& cfg, Variant variant)
    : cfg_((cfg.validate(), cfg)),
      variant_(variant),
      streams(cfg.training.seed),
      init_phy(streams.init.split("phy")),
      init_sem(streams.init.split("sem")),
      init_base(streams.init.split("baseline")),
      phy(cfg, init_phy),
      sem(cfg, init_sem, semantic_grids(cfg, variant)) {
  if (variant == Variant::dmrs_baseline) baseline = std::make_unique<base::BaselineNet>(cfg, init_base);
  if (variant == Variant::orthogonal) shares = base::orthogonal_shares(cfg.dims.Q, cfg.dims.N_c, cfg.dims.K);
}

std::vector<const nn::ParamList*> stage_params(const System& sys, int stage) {
  switch (stage) {
    case 1: return {&sys.sem.params};
    case 2: return {&sys.phy.params};
    case 3: return {&sys.phy.params, &sys.sem.params};
    case 4:
      if (!sys.baseline) throw UsageError("stage 4 needs the dmrs_baseline variant");
      return {&sys.baseline->params};
    default: throw UsageError("unknown stage " + std::to_string(stage));
  }
}

std::vector<nn::ParamList*> stage_params(System& sys, int stage) {
  std::vector<nn::ParamList*> out;
  for (const auto* p : stage_params(static_cast<const System&>(sys), stage)) {
    out.push_back(const_cast<nn::ParamList*>(p));
  }
  return out;
}

std::uint64_t stage_hash(const ExperimentConfig& cfg, int stage) {
  switch (stage) {
    case 1: return cfg.hash_semantic();
    case 2: return cfg.hash_physical();
    default: return cfg.hash();
  }
}

channel::ChannelSet link_channel(const System& sys, std::size_t index) {
  num::Rng r = sys.streams.link.split(index);
  return channel::realize(sys.config(), r);
}

channel::ChannelSet dataset_channel(const System& sys, std::size_t index) {
  num::Rng r = sys.streams.channel.split(index);
  return channel::realize(sys.config(), r);
}

// ---- forward passes ----------------------------------------------------------

namespace {

Tensor zero_csi(const Dims& d) { return Tensor::zeros({d.N_c, d.d_CSI}); }

Tensor user_image(const System& sys, const sem::SourceSample& s, std::size_t k) {
  const Tensor& img = k == 0 ? s.mod_a : s.mod_b;
  if (sys.blank_user != static_cast<int>(k)) return img;
  return Tensor::filled(img.shape(), k == 0 ? sem::kBackgroundA[0] : sem::kBackgroundB);
}

Tensor share_input(const std::vector<Tensor>& s) {
  std::vector<Tensor> flat;
  for (const auto& x : s) flat.push_back(num::flatten(x));
  return num::concat(flat, 0);
}

double eta_value(const System& sys, const Tensor& W, const std::vector<Tensor>& F, const channel::ChannelSet& ch) {
  num::NoGradGuard g;
  const auto& c = sys.config();
  return phy::spectral_efficiency(W, F, ch, c.dims.L, c.physics.P_t, c.noise_var()).item();
}

Forward baseline_forward(const System& sys, const sem::SourceSample& s, const channel::ChannelSet& ch,
                         num::Rng& noise, bool with_eta) {
  const auto& c = sys.config();
  const Dims& d = c.dims;
  const auto& b = *sys.baseline;
  const double sigma2 = c.noise_var();
  const base::Beamformers bf = base::estimated_pca(b.sounding, ch, d, c.physics.P_t, sigma2, noise);
  const Tensor z = zero_csi(d);
  std::vector<Tensor> streams;
  for (std::size_t k = 0; k < d.K; ++k) {
    const Tensor x =
        num::reshape(b.ue[k].raw_features(user_image(sys, s, k), z), {b.grids[k].data_count(), d.N_RF_t});
    const Tensor h = base::share_channel(ch, k, d.L, b.shares[k]);
    const base::DmrsLink link = base::dmrs_chain(x, bf.F[k], bf.W, h, b.grids[k], c.physics.P_t, sigma2, noise);
    streams.push_back(num::flatten(base::straight_through(x, link.s_hat)));
  }
  Forward out;
  out.logits = b.bs(num::concat(streams, 0), z);
  if (with_eta) out.eta = eta_value(sys, bf.W, bf.F, ch);
  return out;
}

Forward link_forward(const System& sys, const sem::SourceSample& s, const channel::ChannelSet& ch, num::Rng& noise,
                     bool with_eta) {
  if (sys.variant() == Variant::dmrs_baseline) return baseline_forward(sys, s, ch, noise, with_eta);
  const auto& c = sys.config();
  const double sigma2 = c.noise_var();
  const phy::PhyOutput p = sys.phy(ch, sigma2, noise);
  const std::vector<Tensor> F = p.F();
  std::vector<Tensor> s_bb;
  for (std::size_t k = 0; k < c.dims.K; ++k) {
    s_bb.push_back(sys.sem.ue[k](user_image(sys, s, k), p.ue[k].s_csi, F[k], c.physics.P_t));
  }
  const Tensor y = sys.variant() == Variant::orthogonal
                       ? base::transmit_orthogonal(s_bb, F, p.bs.W, ch, c.dims.L, sys.shares, sigma2, noise)
                       : sem::transmit_superpose(s_bb, F, p.bs.W, ch, c.dims.L, sigma2, noise);
  Forward out;
  out.logits = sys.sem.bs(y, p.bs.s_csi);
  if (with_eta) out.eta = eta_value(sys, p.bs.W, F, ch);
  return out;
}

}  // namespace

Forward forward_identity(const System& sys, const sem::SourceSample& s) {
  if (sys.variant() == Variant::dmrs_baseline) {
    throw UsageError("the DMRS baseline has no identity-channel pretraining");
  }
  const Dims& d = sys.config().dims;
  const Tensor z = zero_csi(d);
  const double P_t = sys.config().physics.P_t;
  std::vector<Tensor> s_bb;
  for (std::size_t k = 0; k < d.K; ++k) s_bb.push_back(sys.sem.ue[k](user_image(sys, s, k), z, Tensor(), P_t));
  const Tensor y = sys.variant() == Variant::orthogonal ? share_input(s_bb) : sem::identity_superpose(s_bb);
  Forward out;
  out.logits = sys.sem.bs(y, z);
  return out;
}

Forward forward_link(const System& sys, const sem::SourceSample& s, const channel::ChannelSet& ch,
                     num::Rng& noise) {
  return link_forward(sys, s, ch, noise, true);
}

// ---- evaluation -----------------------------------------------------------------

namespace {

std::vector<std::size_t> split_indices(std::size_t count, sem::Split split, std::size_t cap) {
  const auto [b, e] = sem::split_range(count, split);
  std::size_t n = e - b;
  if (cap > 0) n = std::min(n, cap);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), b);
  return idx;
}

num::Rng eval_noise(const System& sys, std::size_t index) { return sys.streams.noise.split("eval").split(index); }

}  // namespace

EvalResult evaluate(const System& sys, sem::Split split, Path path, std::size_t max_samples) {
  num::NoGradGuard guard;
  const auto& c = sys.config();
  sem::IouCounts counts(c.dims.C);
  double eta_sum = 0.0;
  const auto idx = split_indices(c.data.n_samples, split, max_samples);
  for (std::size_t i : idx) {
    const sem::SourceSample s = sem::dataset_sample(c, sys.streams.data, i);
    Forward f;
    if (path == Path::identity) {
      f = forward_identity(sys, s);
    } else {
      num::Rng noise = eval_noise(sys, i);
      f = link_forward(sys, s, link_channel(sys, i), noise, true);
      eta_sum += f.eta;
    }
    counts.add(sem::predict(f.logits), s.label);
  }
  EvalResult r;
  r.samples = idx.size();
  r.miou = counts.miou();
  r.pixel_accuracy = counts.pixel_accuracy();
  for (std::size_t k = 0; k < c.dims.C; ++k) r.class_iou.push_back(counts.iou(k));
  if (path == Path::link && !idx.empty()) r.eta = eta_sum / static_cast<double>(idx.size());
  return r;
}

double evaluate_eta(const System& sys, sem::Split split, std::size_t max_channels) {
  num::NoGradGuard guard;
  const auto& c = sys.config();
  const auto idx = split_indices(c.data.n_channels, split, max_channels);
  if (idx.empty()) return kNaN;
  double sum = 0.0;
  for (std::size_t i : idx) {
    const auto ch = dataset_channel(sys, i);
    num::Rng noise = eval_noise(sys, i);
    if (sys.variant() == Variant::dmrs_baseline) {
      const auto bf = base::estimated_pca(sys.baseline->sounding, ch, c.dims, c.physics.P_t, c.noise_var(), noise);
      sum += eta_value(sys, bf.W, bf.F, ch);
    } else {
      const auto p = sys.phy(ch, c.noise_var(), noise);
      sum += eta_value(sys, p.bs.W, p.F(), ch);
    }
  }
  return sum / static_cast<double>(idx.size());
}

// ---- training ---------------------------------------------------------------------

namespace {

struct Snapshot {
  std::vector<std::vector<double>> values;

  static Snapshot take(const std::vector<Tensor>& params) {
    Snapshot s;
    for (const auto& p : params) s.values.push_back(p.to_vector());
    return s;
  }
  void restore(const std::vector<Tensor>& params) const {
    for (std::size_t i = 0; i < params.size(); ++i) Tensor(params[i]).assign(values[i]);
  }
};

std::vector<Tensor> leaves(const std::vector<const nn::ParamList*>& lists) {
  std::vector<Tensor> out;
  for (const auto* l : lists) {
    const auto t = l->tensors();
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

class Clock {
 public:
  Clock() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_;
};

/// Shared epoch loop: `step(i, epoch)` returns the loss of training item i
/// after accumulating its gradients; `validate()` returns the selection
/// metric (higher is better) and fills the row's metric columns.
template <class Step, class Validate>
StageResult run_stage(System& sys, int stage, const StageSchedule& sched, std::vector<std::size_t> items,
                      MetricsLog& log, const std::string& ckpt_dir, Step step, Validate validate) {
  const auto& c = sys.config();
  const auto lists = stage_params(static_cast<const System&>(sys), stage);
  const std::vector<Tensor> params = leaves(lists);
  num::Adam opt(params, {sched.lr});
  const Clock clock;
  auto wall = [&] { return c.training.log_wallclock ? clock.seconds() : 0.0; };

  StageResult res;
  Snapshot best;
  auto keep = [&](double metric, std::size_t epoch) {
    if (!std::isnan(res.best_metric) && !(metric > res.best_metric)) return;
    res.best_metric = metric;
    res.best_epoch = epoch;
    best = Snapshot::take(params);
    if (!ckpt_dir.empty()) {
      save_checkpoint(ckpt_dir, lists,
                      {stage_hash(c, stage), stage, epoch, to_string(sys.variant()), metric});
    }
  };

  if (stage == 3) {
    MetricsRow row{stage, 0, kNaN, kNaN, kNaN, c.training.seed, wall()};
    const double m = validate(row);
    row.wallclock_s = wall();
    log.append(row);
    keep(m, 0);
  }

  const std::size_t batch = std::max<std::size_t>(1, sched.batch_size);
  for (std::size_t epoch = 1; epoch <= sched.epochs; ++epoch) {
    num::Rng shuf = sys.streams.shuffle.split(static_cast<std::uint64_t>(stage)).split(epoch);
    std::shuffle(items.begin(), items.end(), shuf);
    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < items.size(); b0 += batch) {
      const std::size_t nb = std::min(batch, items.size() - b0);
      opt.zero_grad();
      for (std::size_t j = 0; j < nb; ++j) loss_sum += step(items[b0 + j], epoch);
      const double norm = opt.grad_norm() / static_cast<double>(nb);
      if (!std::isfinite(norm)) throw NumericError("non-finite gradient in stage " + std::to_string(stage));
      const double clip = norm > c.training.clip_norm ? c.training.clip_norm / norm : 1.0;
      opt.step(clip / static_cast<double>(nb));
    }
    MetricsRow row{stage, epoch, loss_sum / static_cast<double>(std::max<std::size_t>(1, items.size())), kNaN, kNaN,
                   c.training.seed, 0.0};
    const double m = validate(row);
    row.wallclock_s = wall();
    log.append(row);
    res.epochs_run = epoch;
    keep(m, epoch);
    if (epoch - res.best_epoch >= sched.patience) break;
  }
  if (!best.values.empty()) best.restore(params);
  return res;
}

std::vector<std::size_t> train_items(std::size_t count, const StageSchedule& sched) {
  return split_indices(count, sem::Split::train, sched.max_train);
}

std::vector<sem::SourceSample> load_samples(const System& sys, const std::vector<std::size_t>& idx) {
  std::vector<sem::SourceSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(sem::dataset_sample(sys.config(), sys.streams.data, i));
  return out;
}

num::Rng train_noise(const System& sys, int stage, std::size_t epoch, std::size_t i) {
  return sys.streams.noise.split(static_cast<std::uint64_t>(stage)).split(epoch).split(i);
}

}  // namespace

StageResult train_stage1(System& sys, MetricsLog& log, const std::string& ckpt_dir) {
  const auto& c = sys.config();
  const auto& sched = c.training.stage1;
  const auto items = train_items(c.data.n_samples, sched);
  const auto samples = load_samples(sys, items);
  const std::size_t first = items.empty() ? 0 : items.front();
  auto step = [&](std::size_t i, std::size_t) {
    const auto& s = samples[i - first];
    const Tensor loss = sem::seg_loss(forward_identity(sys, s).logits, s.label);
    num::backward(loss);
    return loss.item();
  };
  auto validate = [&](MetricsRow& row) {
    row.miou = evaluate(sys, sem::Split::val, Path::identity).miou;
    return row.miou;
  };
  return run_stage(sys, 1, sched, items, log, ckpt_dir, step, validate);
}

StageResult train_stage2(System& sys, MetricsLog& log, const std::string& ckpt_dir) {
  if (sys.variant() == Variant::dmrs_baseline) throw UsageError("the DMRS baseline has no physical-layer networks");
  const auto& c = sys.config();
  const auto& sched = c.training.stage2;
  auto step = [&](std::size_t i, std::size_t epoch) {
    const auto ch = dataset_channel(sys, i);
    num::Rng noise = train_noise(sys, 2, epoch, i);
    const auto p = sys.phy(ch, c.noise_var(), noise);
    const Tensor eta = phy::spectral_efficiency(p.bs.W, p.F(), ch, c.dims.L, c.physics.P_t, c.noise_var());
    const Tensor loss = num::scale(eta, -1.0);
    num::backward(loss);
    return loss.item();
  };
  auto validate = [&](MetricsRow& row) {
    row.eta = evaluate_eta(sys, sem::Split::val);
    return row.eta;
  };
  return run_stage(sys, 2, sched, train_items(c.data.n_channels, sched), log, ckpt_dir, step, validate);
}

namespace {

StageResult train_link(System& sys, int stage, const StageSchedule& sched, MetricsLog& log,
                       const std::string& ckpt_dir) {
  const auto& c = sys.config();
  const auto items = train_items(c.data.n_samples, sched);
  const auto samples = load_samples(sys, items);
  const std::size_t first = items.empty() ? 0 : items.front();
  auto step = [&](std::size_t i, std::size_t epoch) {
    const auto& s = samples[i - first];
    num::Rng noise = train_noise(sys, stage, epoch, i);
    const Tensor loss = sem::seg_loss(link_forward(sys, s, link_channel(sys, i), noise, false).logits, s.label);
    num::backward(loss);
    return loss.item();
  };
  auto validate = [&](MetricsRow& row) {
    const EvalResult r = evaluate(sys, sem::Split::val, Path::link);
    row.miou = r.miou;
    row.eta = r.eta;
    return r.miou;
  };
  return run_stage(sys, stage, sched, items, log, ckpt_dir, step, validate);
}

}  // namespace

StageResult train_stage3(System& sys, MetricsLog& log, const std::string& ckpt_dir) {
  if (sys.variant() == Variant::dmrs_baseline) throw UsageError("use train_baseline for the DMRS baseline");
  return train_link(sys, 3, sys.config().training.stage3, log, ckpt_dir);
}

StageResult train_baseline(System& sys, MetricsLog& log, const std::string& ckpt_dir) {
  if (sys.variant() != Variant::dmrs_baseline) throw UsageError("train_baseline needs the dmrs_baseline variant");
  StageSchedule sched = sys.config().training.stage3;
  sched.epochs = sys.config().training.stage1.epochs + sys.config().training.stage3.epochs;
  return train_link(sys, 4, sched, log, ckpt_dir);
}

void prepare_stage3(System& sys, const std::string& stage1_dir, const std::string& stage2_dir) {
  if (sys.variant() == Variant::dmrs_baseline) throw UsageError("the DMRS baseline has no stage 3");
  const auto check = [](const std::string& dir, int stage) {
    if (dir.empty() || !fs::exists(fs::path(dir) / "manifest.json")) {
      throw UsageError("stage 3 needs a stage-" + std::to_string(stage) + " checkpoint" +
                       (dir.empty() ? std::string() : " (none at " + dir + ")") + "; run train --stage " +
                       std::to_string(stage) + " first");
    }
  };
  check(stage1_dir, 1);
  check(stage2_dir, 2);
  const auto i1 = read_checkpoint_info(stage1_dir);
  const auto i2 = read_checkpoint_info(stage2_dir);
  if (i1.stage != 1) throw ConfigError(stage1_dir + " holds a stage-" + std::to_string(i1.stage) + " checkpoint");
  if (i2.stage != 2) throw ConfigError(stage2_dir + " holds a stage-" + std::to_string(i2.stage) + " checkpoint");
  load_checkpoint(stage1_dir, stage_params(sys, 1), stage_hash(sys.config(), 1), to_string(sys.variant()));
  load_checkpoint(stage2_dir, stage_params(sys, 2), stage_hash(sys.config(), 2), "");
}

}  // namespace semlink::train
