#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "biomass/augment.hpp"
#include "biomass/extractor.hpp"
#include "biomass/imputation.hpp"
#include "biomass/labels.hpp"
#include "biomass/metrics.hpp"
#include "biomass/model.hpp"
#include "biomass/optim.hpp"

namespace biomass {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double lr0 = 1e-3;
  double decay = 5e-6;
  DecayMode decay_mode = DecayMode::LrDecay;
  SampleWeights weights;
  std::uint64_t seed = 0;
  ImputationMethod imputation;
  AugmentConfig augment;
  /// Hidden widths; the 4-unit output layer is implied.
  std::vector<std::size_t> hidden{4096, 256};
  ExtractorConfig extractor;

  /// Throws InputError on out-of-range values.
  void validate() const;

  /// Canonical key=value text of every field; the config hash is its FNV-1a.
  std::string canonical() const;
  std::uint64_t hash() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;  ///< size-weighted mean of the epoch's batch losses
  double val_loss = 0;    ///< unweighted RMSE on validation fractions
  double lr = 0;          ///< learning rate in effect after the epoch's last step

  bool operator==(const EpochRecord&) const = default;
};

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);
void save_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
};

struct TrainHooks {
  /// Replaces reading `Sample::image_path` from disk.
  AugmentStream::Loader loader;
  /// Called after every epoch.
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Resolves every sample's image file inside `image_dir`. A missing file is
/// a ComputeError naming the expected path.
void attach_images(std::vector<Sample>& samples, const std::filesystem::path& image_dir);

/// Number of optimizer steps for `items` per epoch: ceil(items / batch), with
/// a trailing single item folded into the previous batch.
std::vector<std::size_t> batch_sizes(std::size_t items, std::size_t batch);

/// Trains the head on the augmented stream of the split's training ids and
/// keeps the parameters with the lowest validation loss.
TrainResult train(const std::vector<Sample>& samples, const SplitManifest& split,
                  const TrainConfig& config, const TrainHooks& hooks = {});

/// Percentages [grass, white, red, weeds] for each image.
std::vector<PredictionRow> predict(const Checkpoint& checkpoint,
                                   const std::vector<std::string>& image_ids,
                                   const std::vector<Image>& images);

/// Predicts every image in `dir` (sorted by file name; id = file stem).
std::vector<PredictionRow> predict_directory(const Checkpoint& checkpoint,
                                             const std::filesystem::path& dir);

}  // namespace biomass
