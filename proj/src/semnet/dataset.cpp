// SPDX-License-Identifier: Apache-2.0
#include "semlink/semnet/dataset.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "semlink/io/array_file.hpp"

namespace semlink::sem {

using nlohmann::json;

namespace {

// Per-class rendering levels; entries equal to the background make a class
// invisible in that modality.
constexpr double kColorA[4][3] = {{0.2, 0.2, 0.2}, {0.85, 0.3, 0.2}, {0.2, 0.75, 0.85}, {0.2, 0.2, 0.2}};
constexpr double kLevelB[4] = {0.2, 0.7, 0.2, 0.95};

struct Placed {
  ShapeKind kind;
  long y0, x0, h, w;  // bounding box
  long thick;         // cross bar thickness
};

bool inside(const Placed& s, long y, long x) {
  if (y < s.y0 || y >= s.y0 + s.h || x < s.x0 || x >= s.x0 + s.w) return false;
  switch (s.kind) {
    case ShapeKind::rectangle:
      return true;
    case ShapeKind::disk: {
      const double r = s.h / 2.0;
      const double dy = y + 0.5 - (s.y0 + r), dx = x + 0.5 - (s.x0 + r);
      return dy * dy + dx * dx <= r * r;
    }
    case ShapeKind::cross: {
      const long c0 = (s.h - s.thick) / 2;
      const long ry = y - s.y0, rx = x - s.x0;
      return (ry >= c0 && ry < c0 + s.thick) || (rx >= c0 && rx < c0 + s.thick);
    }
  }
  return false;
}

bool overlaps(const Placed& a, const Placed& b) {
  // one-pixel gap between bounding boxes
  return !(a.x0 + a.w + 1 <= b.x0 || b.x0 + b.w + 1 <= a.x0 || a.y0 + a.h + 1 <= b.y0 || b.y0 + b.h + 1 <= a.y0);
}

Placed draw_shape(num::Rng& rng, long H, long W) {
  Placed s{};
  s.kind = static_cast<ShapeKind>(rng.uniform_int(1, 3));
  switch (s.kind) {
    case ShapeKind::rectangle:
      s.h = rng.uniform_int(8, 14);
      s.w = rng.uniform_int(8, 14);
      break;
    case ShapeKind::disk:
      s.h = s.w = 2 * rng.uniform_int(4, 7);
      break;
    case ShapeKind::cross:
      s.h = s.w = rng.uniform_int(11, 16);
      s.thick = rng.uniform_int(4, 6);
      break;
  }
  s.h = std::min(s.h, H);
  s.w = std::min(s.w, W);
  s.y0 = rng.uniform_int(0, H - s.h);
  s.x0 = rng.uniform_int(0, W - s.w);
  return s;
}

}  // namespace

SceneParams scene_params(const ExperimentConfig& cfg) {
  SceneParams p;
  p.height = cfg.dims.H;
  p.width = cfg.dims.W;
  p.shapes_min = cfg.data.shapes_min;
  p.shapes_max = cfg.data.shapes_max;
  return p;
}

SourceSample gen_multimodal_sample(num::Rng& rng, const SceneParams& p) {
  const long H = static_cast<long>(p.height), W = static_cast<long>(p.width);
  const auto want = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(p.shapes_min), static_cast<std::int64_t>(p.shapes_max)));
  std::vector<Placed> shapes;
  for (int attempt = 0; attempt < 200 && shapes.size() < want; ++attempt) {
    const Placed s = draw_shape(rng, H, W);
    if (std::none_of(shapes.begin(), shapes.end(), [&](const Placed& o) { return overlaps(s, o); })) {
      shapes.push_back(s);
    }
  }
  SourceSample out;
  out.label.assign(p.height * p.width, 0);
  for (const auto& s : shapes)
    for (long y = s.y0; y < s.y0 + s.h; ++y)
      for (long x = s.x0; x < s.x0 + s.w; ++x)
        if (inside(s, y, x)) out.label[y * W + x] = static_cast<std::int32_t>(s.kind);

  const std::size_t P = p.height * p.width;
  std::vector<double> a(3 * P), b(P);
  auto noisy = [&](double v) { return std::clamp(v + rng.normal(0.0, p.noise_std), 0.0, 1.0); };
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < P; ++i) a[c * P + i] = noisy(kColorA[out.label[i]][c]);
  for (std::size_t i = 0; i < P; ++i) b[i] = noisy(kLevelB[out.label[i]]);
  out.mod_a = Tensor::real({3, p.height, p.width}, std::move(a));
  out.mod_b = Tensor::real({1, p.height, p.width}, std::move(b));
  return out;
}

std::pair<std::size_t, std::size_t> split_range(std::size_t count, Split split) {
  const std::size_t a = count * 8 / 10, b = count * 9 / 10;
  switch (split) {
    case Split::train:
      return {0, a};
    case Split::val:
      return {a, b};
    case Split::test:
      return {b, count};
  }
  return {0, 0};
}

SourceSample dataset_sample(const ExperimentConfig& cfg, const num::Rng& root, std::size_t index) {
  num::Rng rng = root.split(index);
  return gen_multimodal_sample(rng, scene_params(cfg));
}

namespace {

// Output locations are left out so identical data gives identical manifests.
json portable_config(ExperimentConfig cfg) {
  cfg.paths = Paths{};
  return json::parse(cfg.to_json());
}

}  // namespace

void export_dataset(const std::string& stem, const ExperimentConfig& cfg, const num::Rng& root, std::size_t begin,
                    std::size_t end) {
  if (end <= begin) throw UsageError("empty dataset range");
  const std::size_t H = cfg.dims.H, W = cfg.dims.W, P = H * W;
  std::vector<double> all;
  all.reserve((end - begin) * 5 * P);
  for (std::size_t i = begin; i < end; ++i) {
    const auto s = dataset_sample(cfg, root, i);
    const auto a = s.mod_a.storage(), b = s.mod_b.storage();
    all.insert(all.end(), a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    for (auto l : s.label) all.push_back(static_cast<double>(l));
  }
  json manifest = {{"kind", "multimodal_dataset"},
                   {"layout", "per sample: mod_a[3,H,W], mod_b[1,H,W], label[H,W]"},
                   {"dtype", "float64"},
                   {"dims", {end - begin, H, W}},
                   {"first_index", begin},
                   {"seed", cfg.training.seed},
                   {"file", stem.substr(stem.find_last_of('/') + 1) + ".bin"},
                   {"config", portable_config(cfg)}};
  io::write_f64(stem + ".bin", all);
  io::write_text(stem + ".json", manifest.dump(2) + "\n");
}

std::vector<SourceSample> import_dataset(const std::string& stem) {
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
  if (need("kind") != "multimodal_dataset") throw IoError(stem + ".json: field 'kind' is not multimodal_dataset");
  const json& dims = need("dims");
  if (!dims.is_array() || dims.size() != 3) throw IoError(stem + ".json: field 'dims' must list 3 extents");
  for (const auto& d : dims)
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) throw IoError(stem + ".json: field 'dims' is invalid");
  const std::size_t n = dims[0], H = dims[1], W = dims[2], P = H * W;
  const auto all = io::read_f64(stem + ".bin", n * 5 * P);
  std::vector<SourceSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* base = all.data() + i * 5 * P;
    out[i].mod_a = Tensor::real({3, H, W}, std::vector<double>(base, base + 3 * P));
    out[i].mod_b = Tensor::real({1, H, W}, std::vector<double>(base + 3 * P, base + 4 * P));
    out[i].label.resize(P);
    for (std::size_t j = 0; j < P; ++j) out[i].label[j] = static_cast<std::int32_t>(base[4 * P + j]);
  }
  return out;
}

}  // namespace semlink::sem
