// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semlink/config.hpp"
#include "semlink/numcore/rng.hpp"
#include "semlink/numcore/tensor.hpp"

namespace semlink::sem {

using num::Tensor;

/// One aligned two-modality scene with its segmentation mask.
struct SourceSample {
  Tensor mod_a;                      ///< [3, H, W] in [0, 1]
  Tensor mod_b;                      ///< [1, H, W] in [0, 1]
  std::vector<std::int32_t> label;   ///< [H * W], classes 0..3
};

enum class ShapeKind { rectangle = 1, disk = 2, cross = 3 };

struct SceneParams {
  std::size_t height = 32, width = 32;
  std::size_t shapes_min = 1, shapes_max = 3;
  double noise_std = 0.05;
};

SceneParams scene_params(const ExperimentConfig& cfg);

/// Background 0 plus non-overlapping rectangles (1), disks (2) and crosses
/// (3). Modality A shows classes 1-2 but renders crosses at background
/// level; modality B shows classes 1 and 3 but renders disks at background.
SourceSample gen_multimodal_sample(num::Rng& rng, const SceneParams& params);

/// Background intensity of each modality (per channel for A).
inline constexpr double kBackgroundA[3] = {0.2, 0.2, 0.2};
inline constexpr double kBackgroundB = 0.2;

enum class Split { train, val, test };

/// Index range [begin, end) of a split for `count` samples (80/10/10).
std::pair<std::size_t, std::size_t> split_range(std::size_t count, Split split);

/// Deterministic sample `index` of the dataset defined by `cfg`, drawn from
/// its own child stream of `root`.
SourceSample dataset_sample(const ExperimentConfig& cfg, const num::Rng& root, std::size_t index);

/// Writes samples [begin, end) as <stem>.bin (mod_a | mod_b | label per
/// sample, float64) with a <stem>.json manifest.
void export_dataset(const std::string& stem, const ExperimentConfig& cfg, const num::Rng& root, std::size_t begin,
                    std::size_t end);
std::vector<SourceSample> import_dataset(const std::string& stem);

}  // namespace semlink::sem
