// SPDX-License-Identifier: Apache-2.0
#include "semlink/channel/channel.hpp"

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "semlink/io/array_file.hpp"

namespace semlink::channel {

using nlohmann::json;
constexpr double kPi = std::numbers::pi;

OfdmConfig OfdmConfig::make(std::size_t N_c, double delta_f, double f_c) {
  OfdmConfig o;
  o.N_c = N_c;
  o.N_cp = N_c / 4;
  o.delta_f = delta_f;
  o.f_c = f_c;
  o.T_s = 1.0 / (static_cast<double>(N_c) * delta_f);
  o.T_I = static_cast<double>(N_c + o.N_cp) * o.T_s;
  return o;
}

PathParams PathParams::from(const ExperimentConfig& cfg, const OfdmConfig& ofdm) {
  PathParams p;
  p.L_p_min = cfg.physics.L_p_min;
  p.L_p_max = cfg.physics.L_p_max;
  p.tau_max = cfg.physics.tau_max_samples * ofdm.T_s;
  p.v_max = cfg.physics.v_max_kmh / 3.6;
  p.f_c = cfg.physics.f_c;
  return p;
}

std::vector<cplx> ChannelSet::matrix(std::size_t k, std::size_t q, std::size_t n) const {
  const std::size_t nr = n_r(), nt = n_t();
  const std::size_t off = ((k * symbols() + q) * subcarriers() + n) * nr * nt;
  std::vector<cplx> m(nr * nt);
  const auto s = H.storage();
  for (std::size_t i = 0; i < nr * nt; ++i) m[i] = {s[2 * (off + i)], s[2 * (off + i) + 1]};
  return m;
}

std::vector<cplx> steering(double theta, std::size_t N) {
  std::vector<cplx> a(N);
  const double norm = 1.0 / std::sqrt(static_cast<double>(N));
  for (std::size_t m = 0; m < N; ++m) a[m] = std::polar(norm, kPi * static_cast<double>(m) * std::sin(theta));
  return a;
}

PathSet sample_paths(const PathParams& p, std::size_t users, num::Rng& rng) {
  if (p.L_p_min == 0 || p.L_p_min > p.L_p_max || p.tau_max < 0 || p.v_max < 0) {
    throw ConfigError("invalid path-sampling ranges");
  }
  PathSet set;
  set.users.resize(users);
  for (auto& user : set.users) {
    const auto lp = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(p.L_p_min), static_cast<std::int64_t>(p.L_p_max)));
    user.resize(lp);
    for (auto& path : user) {
      path.alpha = rng.complex_normal(1.0);
      path.theta_t = rng.uniform(-kPi, kPi);
      path.theta_r = rng.uniform(-kPi, kPi);
      path.tau = rng.uniform(0.0, p.tau_max);
      const double v = rng.uniform(0.0, p.v_max);
      const double psi = rng.uniform(0.0, 2.0 * kPi);
      path.f_d = v / kSpeedOfLight * p.f_c * std::cos(psi);
    }
  }
  return set;
}

ChannelSet assemble_channel(const PathSet& paths, const OfdmConfig& ofdm, std::size_t N_r, std::size_t N_t,
                            std::size_t symbols) {
  const std::size_t K = paths.users.size(), Nc = ofdm.N_c, mat = N_r * N_t;
  std::vector<double> v(2 * K * symbols * Nc * mat, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& user = paths.users[k];
    if (user.empty()) throw DimensionError("user " + std::to_string(k) + " has no paths");
    const double amp = 1.0 / std::sqrt(static_cast<double>(user.size()));
    for (const auto& path : user) {
      const auto ar = steering(path.theta_r, N_r);
      const auto at = steering(path.theta_t, N_t);
      std::vector<cplx> outer(mat);
      for (std::size_t i = 0; i < N_r; ++i)
        for (std::size_t j = 0; j < N_t; ++j) outer[i * N_t + j] = amp * path.alpha * ar[i] * std::conj(at[j]);
      for (std::size_t q = 0; q < symbols; ++q) {
        const double doppler = 2.0 * kPi * path.f_d * static_cast<double>(q + 1) * ofdm.T_I;
        for (std::size_t n = 0; n < Nc; ++n) {
          const double delay = -2.0 * kPi * static_cast<double>(n) * path.tau / (static_cast<double>(Nc) * ofdm.T_s);
          const cplx ph = std::polar(1.0, delay + doppler);
          double* dst = v.data() + 2 * ((k * symbols + q) * Nc + n) * mat;
          for (std::size_t i = 0; i < mat; ++i) {
            const cplx c = ph * outer[i];
            dst[2 * i] += c.real();
            dst[2 * i + 1] += c.imag();
          }
        }
      }
    }
  }
  ChannelSet set;
  set.H = Tensor::from_storage({K, symbols, Nc, N_r, N_t}, num::Dtype::complex, std::move(v));
  return set;
}

Tensor add_awgn(const Tensor& signal, double sigma2, num::Rng& rng) {
  if (!(sigma2 >= 0.0)) throw UsageError("noise variance must be non-negative, got " + std::to_string(sigma2));
  if (!signal.is_complex()) throw DtypeError("add_awgn needs a complex signal");
  if (sigma2 == 0.0) return signal;
  std::vector<double> z(signal.storage().size());
  for (std::size_t i = 0; i < z.size(); i += 2) {
    const cplx c = rng.complex_normal(sigma2);
    z[i] = c.real();
    z[i + 1] = c.imag();
  }
  return num::add(signal, Tensor::from_storage(signal.shape(), num::Dtype::complex, std::move(z)));
}

ChannelSet realize(const ExperimentConfig& cfg, num::Rng& rng) {
  const auto ofdm = OfdmConfig::make(cfg.dims.N_c, cfg.physics.delta_f, cfg.physics.f_c);
  const auto paths = sample_paths(PathParams::from(cfg, ofdm), cfg.dims.K, rng);
  ChannelSet set = assemble_channel(paths, ofdm, cfg.dims.N_r, cfg.dims.N_t, cfg.dims.L + cfg.dims.Q);
  set.noise_var = cfg.noise_var();
  return set;
}

namespace {

// Output locations are left out so identical data gives identical manifests.
json portable_config(ExperimentConfig cfg) {
  cfg.paths = Paths{};
  return json::parse(cfg.to_json());
}

}  // namespace

void export_channels(const std::string& stem, const std::vector<ChannelSet>& sets, const ExperimentConfig& cfg) {
  if (sets.empty()) throw UsageError("no channel sets to export");
  const num::Shape shape = sets[0].H.shape();
  std::vector<double> all;
  all.reserve(sets.size() * sets[0].H.storage().size());
  json seeds = json::array();
  for (const auto& s : sets) {
    if (s.H.shape() != shape) throw DimensionError("channel sets differ in shape");
    const auto st = s.H.storage();
    all.insert(all.end(), st.begin(), st.end());
    seeds.push_back(s.seed);
  }
  json dims = json::array({sets.size()});
  for (auto d : shape) dims.push_back(d);
  json manifest = {{"kind", "channel_set"},
                   {"layout", "count,K,symbols,N_c,N_r,N_t"},
                   {"dtype", "complex128"},
                   {"dims", dims},
                   {"noise_var", sets[0].noise_var},
                   {"seeds", seeds},
                   {"file", stem.substr(stem.find_last_of('/') + 1) + ".bin"},
                   {"config", portable_config(cfg)}};
  io::write_f64(stem + ".bin", all);
  io::write_text(stem + ".json", manifest.dump(2) + "\n");
}

std::vector<ChannelSet> import_channels(const std::string& stem) {
  json m;
  try {
    m = json::parse(io::read_text(stem + ".json"));
  } catch (const json::parse_error& e) {
    throw IoError(stem + ".json: malformed manifest: " + e.what());
  }
  auto need = [&](const char* key) -> const json& {
    if (!m.is_object() || !m.contains(key)) throw IoError(stem + ".json: missing field '" + key + "'");
    return m[key];
  };
  if (need("kind") != "channel_set") throw IoError(stem + ".json: field 'kind' is not channel_set");
  if (need("dtype") != "complex128") throw IoError(stem + ".json: field 'dtype' must be complex128");
  const json& dims = need("dims");
  if (!dims.is_array() || dims.size() != 6) throw IoError(stem + ".json: field 'dims' must list 6 extents");
  num::Shape shape;
  for (const auto& d : dims) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) {
      throw IoError(stem + ".json: field 'dims' holds a non-positive extent");
    }
    shape.push_back(d.get<std::size_t>());
  }
  const json& nv = need("noise_var");
  if (!nv.is_number() || nv.get<double>() < 0) throw IoError(stem + ".json: field 'noise_var' is invalid");
  const json& seeds = need("seeds");
  if (!seeds.is_array() || seeds.size() != shape[0]) throw IoError(stem + ".json: field 'seeds' does not match dims");
  const std::size_t count = shape[0];
  const num::Shape one(shape.begin() + 1, shape.end());
  const std::size_t slots = 2 * num::numel_of(one);
  const auto all = io::read_f64(stem + ".bin", count * slots);
  std::vector<ChannelSet> sets(count);
  for (std::size_t i = 0; i < count; ++i) {
    sets[i].H = Tensor::from_storage(one, num::Dtype::complex,
                                     std::vector<double>(all.begin() + i * slots, all.begin() + (i + 1) * slots));
    sets[i].noise_var = nv.get<double>();
    sets[i].seed = seeds[i].get<std::uint64_t>();
  }
  return sets;
}

}  // namespace semlink::channel
