// SPDX-License-Identifier: Apache-2.0
#include "semlink/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "semlink/numcore/rng.hpp"

namespace semlink {

using nlohmann::json;

namespace {

// Reads known keys from `j` into fields, rejecting anything unrecognised.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  Reader& field(const char* key, T& out) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return *this;
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type (" + std::string(it->type_name()) + ")");
    }
    return *this;
  }

  const json* child(const char* key) {
    seen_.push_back(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        throw ConfigError("unknown config key '" + where_ + "." + it.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

json dims_json(const Dims& d) {
  return {{"N_t", d.N_t},   {"N_r", d.N_r},     {"N_RF_t", d.N_RF_t},   {"N_RF_r", d.N_RF_r},
          {"N_c", d.N_c},   {"L", d.L},         {"B", d.B},             {"Q", d.Q},
          {"K", d.K},       {"H", d.H},         {"W", d.W},             {"C", d.C},
          {"d_s", d.d_s},   {"H_s", d.H_s},     {"W_s", d.W_s},         {"d_CSI", d.d_CSI},
          {"d_c", d.d_c},   {"d_model", d.d_model}, {"U", d.U},         {"n_heads", d.n_heads},
          {"d_ff", d.d_ff}, {"codec_width", d.codec_width}};
}

json stage_json(const StageSchedule& s) {
  return {{"epochs", s.epochs}, {"batch_size", s.batch_size}, {"lr", s.lr}, {"patience", s.patience},
          {"max_train", s.max_train}};
}

void read_stage(const json* j, const std::string& where, StageSchedule& s) {
  if (!j) return;
  Reader r(*j, where);
  r.field("epochs", s.epochs).field("batch_size", s.batch_size).field("lr", s.lr).field("patience", s.patience);
  r.field("max_train", s.max_train);
  r.finish();
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void ExperimentConfig::validate() const {
  const Dims& d = dims;
  const std::pair<const char*, std::size_t> positive[] = {
      {"N_t", d.N_t},     {"N_r", d.N_r},     {"N_RF_t", d.N_RF_t},   {"N_RF_r", d.N_RF_r}, {"N_c", d.N_c},
      {"L", d.L},         {"B", d.B},         {"Q", d.Q},             {"K", d.K},           {"H", d.H},
      {"W", d.W},         {"C", d.C},         {"d_s", d.d_s},         {"H_s", d.H_s},       {"W_s", d.W_s},
      {"d_CSI", d.d_CSI}, {"d_c", d.d_c},     {"d_model", d.d_model}, {"n_heads", d.n_heads},
      {"d_ff", d.d_ff},   {"codec_width", d.codec_width}};
  for (const auto& [name, v] : positive) {
    if (v == 0) throw ConfigError(std::string("dims.") + name + " must be positive");
  }
  if (d.K != 2) throw ConfigError("dims.K must be 2 for the two-modality task");
  if (d.N_RF_t != d.N_RF_r) throw ConfigError("dims.N_RF_t must equal dims.N_RF_r (identity-channel pretraining)");
  if (d.N_RF_t > d.N_t) throw ConfigError("dims.N_RF_t exceeds dims.N_t");
  if (d.N_RF_r > d.N_r) throw ConfigError("dims.N_RF_r exceeds dims.N_r");
  if (d.N_RF_r > 8) throw ConfigError("dims.N_RF_r above 8 is unsupported");
  if (d.d_model % d.n_heads != 0) throw ConfigError("dims.d_model must be divisible by dims.n_heads");
  if (d.C < 4) throw ConfigError("dims.C must be at least 4 (background + three shape classes)");
  const Physics& p = physics;
  if (!(p.f_c > 0)) throw ConfigError("physics.f_c must be positive");
  if (!(p.delta_f > 0)) throw ConfigError("physics.delta_f must be positive");
  if (!(p.v_max_kmh >= 0)) throw ConfigError("physics.v_max_kmh must be non-negative");
  if (!(p.tau_max_samples >= 0)) throw ConfigError("physics.tau_max_samples must be non-negative");
  if (p.L_p_min == 0 || p.L_p_min > p.L_p_max) throw ConfigError("physics.L_p_min/L_p_max form an empty range");
  if (!(p.P_t > 0)) throw ConfigError("physics.P_t must be positive");
  if (!std::isfinite(p.snr_db)) throw ConfigError("physics.snr_db must be finite");
  if (data.shapes_min > data.shapes_max || data.shapes_max > 3) {
    throw ConfigError("data.shapes_min/shapes_max must satisfy min <= max <= 3");
  }
  if (data.n_samples < 10) throw ConfigError("data.n_samples must be at least 10");
  if (data.n_channels < 10) throw ConfigError("data.n_channels must be at least 10");
  for (const auto* s : {&training.stage1, &training.stage2, &training.stage3}) {
    if (s->batch_size == 0) throw ConfigError("training stage batch_size must be positive");
    if (!(s->lr > 0)) throw ConfigError("training stage lr must be positive");
  }
  if (!(training.clip_norm > 0)) throw ConfigError("training.clip_norm must be positive");
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["dims"] = dims_json(dims);
  j["physics"] = {{"f_c", physics.f_c},
                  {"delta_f", physics.delta_f},
                  {"v_max_kmh", physics.v_max_kmh},
                  {"tau_max_samples", physics.tau_max_samples},
                  {"L_p_min", physics.L_p_min},
                  {"L_p_max", physics.L_p_max},
                  {"snr_db", physics.snr_db},
                  {"P_t", physics.P_t}};
  j["data"] = {{"n_samples", data.n_samples},
               {"n_channels", data.n_channels},
               {"shapes_min", data.shapes_min},
               {"shapes_max", data.shapes_max}};
  j["training"] = {{"seed", training.seed},
                   {"stage1", stage_json(training.stage1)},
                   {"stage2", stage_json(training.stage2)},
                   {"stage3", stage_json(training.stage3)},
                   {"clip_norm", training.clip_norm},
                   {"log_wallclock", training.log_wallclock}};
  j["paths"] = {{"out_dir", paths.out_dir}};
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  ExperimentConfig c;
  Reader top(j, "config");
  if (const json* d = top.child("dims")) {
    Dims& x = c.dims;
    Reader r(*d, "dims");
    r.field("N_t", x.N_t).field("N_r", x.N_r).field("N_RF_t", x.N_RF_t).field("N_RF_r", x.N_RF_r);
    r.field("N_c", x.N_c).field("L", x.L).field("B", x.B).field("Q", x.Q).field("K", x.K);
    r.field("H", x.H).field("W", x.W).field("C", x.C).field("d_s", x.d_s).field("H_s", x.H_s).field("W_s", x.W_s);
    r.field("d_CSI", x.d_CSI).field("d_c", x.d_c).field("d_model", x.d_model).field("U", x.U);
    r.field("n_heads", x.n_heads).field("d_ff", x.d_ff).field("codec_width", x.codec_width);
    r.finish();
  }
  if (const json* p = top.child("physics")) {
    Physics& x = c.physics;
    Reader r(*p, "physics");
    r.field("f_c", x.f_c).field("delta_f", x.delta_f).field("v_max_kmh", x.v_max_kmh);
    r.field("tau_max_samples", x.tau_max_samples).field("L_p_min", x.L_p_min).field("L_p_max", x.L_p_max);
    r.field("snr_db", x.snr_db).field("P_t", x.P_t);
    r.finish();
  }
  if (const json* d = top.child("data")) {
    Reader r(*d, "data");
    r.field("n_samples", c.data.n_samples).field("n_channels", c.data.n_channels);
    r.field("shapes_min", c.data.shapes_min).field("shapes_max", c.data.shapes_max);
    r.finish();
  }
  if (const json* t = top.child("training")) {
    Reader r(*t, "training");
    r.field("seed", c.training.seed).field("clip_norm", c.training.clip_norm);
    r.field("log_wallclock", c.training.log_wallclock);
    read_stage(r.child("stage1"), "training.stage1", c.training.stage1);
    read_stage(r.child("stage2"), "training.stage2", c.training.stage2);
    read_stage(r.child("stage3"), "training.stage3", c.training.stage3);
    r.finish();
  }
  if (const json* p = top.child("paths")) {
    Reader r(*p, "paths");
    r.field("out_dir", c.paths.out_dir);
    r.finish();
  }
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file '" + path + "'");
  out << to_json() << '\n';
}

std::uint64_t ExperimentConfig::hash() const { return num::Rng::fnv1a(dims_json(dims).dump()); }

namespace {
std::uint64_t subset_hash(const json& all, std::initializer_list<const char*> keys) {
  json j = json::object();
  for (const char* k : keys) j[k] = all.at(k);
  return num::Rng::fnv1a(j.dump());
}
}  // namespace

std::uint64_t ExperimentConfig::hash_semantic() const {
  return subset_hash(dims_json(dims), {"N_RF_t", "N_RF_r", "N_c", "Q", "K", "H", "W", "C", "d_s", "H_s", "W_s",
                                       "d_CSI", "d_c", "codec_width"});
}

std::uint64_t ExperimentConfig::hash_physical() const {
  return subset_hash(dims_json(dims), {"N_t", "N_r", "N_RF_t", "N_RF_r", "N_c", "L", "B", "K", "d_CSI",
                                       "d_model", "U", "n_heads", "d_ff"});
}

double ExperimentConfig::noise_var() const { return physics.P_t / std::pow(10.0, physics.snr_db / 10.0); }

nn::TransformerConfig ExperimentConfig::transformer() const {
  return {dims.d_model, dims.U, dims.n_heads, dims.d_ff};
}

nn::CodecConfig ExperimentConfig::codec(std::size_t in_channels) const {
  return {in_channels, dims.H, dims.W, dims.d_s, dims.H_s, dims.W_s, dims.C, dims.codec_width};
}

}  // namespace semlink
