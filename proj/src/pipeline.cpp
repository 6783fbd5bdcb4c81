#include "biomass/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "biomass/errors.hpp"
#include "biomass/rng.hpp"

namespace biomass {

namespace {

std::array<float, 4> target_of(const LabelVector& l) {
  return {static_cast<float>(l.grass_pct / 100.0), static_cast<float>(*l.white_pct / 100.0),
          static_cast<float>(*l.red_pct / 100.0), static_cast<float>(l.weeds_pct / 100.0)};
}

// Copies feature rows into a matrix, row `offset` onward.
void put_rows(Tensor<float>& dst, std::size_t offset, const Tensor<float>& rows) {
  std::copy(rows.data().begin(), rows.data().end(), dst.ptr() + offset * dst.dim(1));
}

Tensor<float> gather_rows(const Tensor<float>& src, const std::vector<std::size_t>& idx,
                          std::size_t begin, std::size_t count) {
  const auto width = src.dim(1);
  Tensor<float> out({count, width});
  for (std::size_t r = 0; r < count; ++r) {
    const float* row = src.ptr() + idx[begin + r] * width;
    std::copy(row, row + width, out.ptr() + r * width);
  }
  return out;
}

double rmse_fractions(const Tensor<float>& pred, const Tensor<float>& target) {
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

std::string weights_text(const ExtractorConfig& c) {
  if (const auto* r = std::get_if<RandomWeights>(&c.weights_source)) {
    return "random:" + std::to_string(r->seed);
  }
  return "file:" + std::get<WeightFile>(c.weights_source).path.string();
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw InputError("train.epochs must be >= 1");
  if (batch_size < 2) throw InputError("train.batch_size must be >= 2 (batch normalization)");
  if (!(lr0 > 0) || !std::isfinite(lr0)) throw InputError("train.lr0 must be > 0");
  if (!(decay >= 0) || !std::isfinite(decay)) throw InputError("train.decay must be >= 0");
  if (!(weights.basic > 0) || !(weights.advanced > 0) || !std::isfinite(weights.basic) ||
      !std::isfinite(weights.advanced)) {
    throw InputError("sample weights must be > 0");
  }
  if (imputation.regression_iterations < 1) throw InputError("imputation.iterations must be >= 1");
  for (auto h : hidden) {
    if (h == 0) throw InputError("head.dims entries must be > 0");
  }
  if (extractor.blocks.empty()) throw InputError("extractor needs at least one block");
  for (const auto& b : extractor.blocks) {
    if (b.out_channels < 1 || b.convs < 1) throw InputError("extractor blocks need channels and convs >= 1");
  }
  augment.validate();
  // Each block halves the input with a 2x2 pool.
  std::size_t side = static_cast<std::size_t>(augment.out_size);
  for (std::size_t i = 0; i < extractor.blocks.size(); ++i) side /= 2;
  if (side == 0) {
    throw InputError("augment.out_size " + std::to_string(augment.out_size) + " is too small for " +
                     std::to_string(extractor.blocks.size()) + " pooling blocks");
  }
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os << "seed=" << seed << '\n'
     << "imputation.method=" << to_string(imputation.variant) << '\n'
     << "imputation.iterations=" << imputation.regression_iterations << '\n'
     << "imputation.fit_scope=" << to_string(imputation.fit_scope) << '\n'
     << "train.epochs=" << epochs << '\n'
     << "train.batch_size=" << batch_size << '\n'
     << "train.lr0=" << format_number(lr0) << '\n'
     << "train.decay=" << format_number(decay) << '\n'
     << "train.decay_mode=" << to_string(decay_mode) << '\n'
     << "train.weight_basic=" << format_number(weights.basic) << '\n'
     << "train.weight_advanced=" << format_number(weights.advanced) << '\n'
     << "augment.rotation_deg=" << format_number(augment.rotation_deg) << '\n'
     << "augment.zoom_frac=" << format_number(augment.zoom_frac) << '\n'
     << "augment.shift_frac=" << format_number(augment.shift_frac) << '\n'
     << "augment.shear_deg=" << format_number(augment.shear_deg) << '\n'
     << "augment.hflip=" << (augment.hflip ? "true" : "false") << '\n'
     << "augment.channel_shift=" << format_number(augment.channel_shift) << '\n'
     << "augment.out_size=" << augment.out_size << '\n'
     << "augment.variants=" << augment.variants_per_image << '\n'
     << "extractor.channels=" << format_blocks(extractor.blocks) << '\n'
     << "extractor.preprocess=" << (extractor.preprocess == Preprocess::Caffe ? "caffe" : "unit") << '\n'
     << "extractor.source=" << weights_text(extractor) << '\n'
     << "head.dims=";
  for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
  os << (hidden.empty() ? "" : ",") << Head<float>::kOutputs << '\n';
  return os.str();
}

std::uint64_t TrainConfig::hash() const { return fnv1a(canonical()); }

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_number(r.train_loss) << ',' << format_number(r.val_loss) << ','
        << format_number(r.lr) << '\n';
  }
}

void save_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ComputeError("cannot write history: " + path.string());
  write_history_csv(out, history);
  if (!out) throw ComputeError("failed writing history: " + path.string());
}

void attach_images(std::vector<Sample>& samples, const std::filesystem::path& image_dir) {
  for (auto& s : samples) {
    auto path = find_image(image_dir, s.image_id);
    if (!path) {
      throw ComputeError("missing image file: " + (image_dir / s.image_id).string() +
                         ".{png,jpg,jpeg}");
    }
    s.image_path = *path;
  }
}

std::vector<std::size_t> batch_sizes(std::size_t items, std::size_t batch) {
  if (batch == 0) throw InputError("batch size must be > 0");
  std::vector<std::size_t> sizes(items / batch, batch);
  const auto rest = items % batch;
  if (rest == 1 && !sizes.empty()) {
    sizes.back() += 1;
  } else if (rest > 0) {
    sizes.push_back(rest);
  }
  return sizes;
}

TrainResult train(const std::vector<Sample>& samples, const SplitManifest& split,
                  const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  for (const auto& s : samples) {
    if (!s.labels.has_breakdown()) {
      throw InputError("sample '" + s.image_id + "' has incomplete labels; impute before training");
    }
  }
  const auto train_samples = select_samples(samples, split.train_ids);
  const auto val_samples = select_samples(samples, split.val_ids);
  if (train_samples.empty()) throw InputError("split has no training samples");
  if (val_samples.empty()) throw InputError("split has no validation samples");

  const auto load = [&](const Sample& s) { return hooks.loader ? hooks.loader(s) : read_image(s.image_path); };
  const int out = config.augment.out_size;
  BiomassModel model(config.extractor, out, config.hidden,
                     derive_seed({config.seed, fnv1a("head")}));
  auto& head = model.head();
  const auto width = model.extractor().feature_count(static_cast<std::size_t>(out),
                                                     static_cast<std::size_t>(out));

  Tensor<float> val_x({val_samples.size(), width});
  Tensor<float> val_y({val_samples.size(), 4});
  for (std::size_t i = 0; i < val_samples.size(); ++i) {
    put_rows(val_x, i, model.features_of(load(val_samples[i])));
    const auto t = target_of(val_samples[i].labels);
    for (std::size_t k = 0; k < 4; ++k) val_y(i, k) = t[k];
  }

  AdamState<float> adam;
  adam.lr0 = config.lr0;
  adam.decay = config.decay;
  adam.decay_mode = config.decay_mode;
  const auto params = head.parameters();
  const auto augment_seed = derive_seed({config.seed, fnv1a("augment")});
  const auto shuffle_seed = derive_seed({config.seed, fnv1a("shuffle")});

  TrainResult result;
  bool have_best = false;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto stream = augment_epoch(train_samples, config.augment, epoch, augment_seed,
                                      config.weights, hooks.loader);
    const auto n = stream.size();
    const auto variants = static_cast<std::size_t>(stream.variants());
    Tensor<float> x({n, width});
    Tensor<float> y({n, 4});
    Tensor<float> w({n});
    for (std::size_t s = 0; s < stream.sample_count(); ++s) {
      const Image source = stream.load(s);
      std::vector<AugmentedItem> items;
      std::vector<const Image*> images;
      items.reserve(variants);
      for (std::size_t v = 0; v < variants; ++v) {
        items.push_back(stream.item(s, static_cast<int>(v), source));
      }
      for (const auto& it : items) images.push_back(&it.image);
      put_rows(x, s * variants, model.features(images));
      for (std::size_t v = 0; v < variants; ++v) {
        const auto row = s * variants + v;
        const auto t = target_of(items[v].labels);
        for (std::size_t k = 0; k < 4; ++k) y(row, k) = t[k];
        w[row] = static_cast<float>(items[v].weight);
      }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed({shuffle_seed, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    head.set_mode(BatchNormMode::Train);
    double loss_sum = 0;
    std::size_t begin = 0;
    for (const auto size : batch_sizes(n, static_cast<std::size_t>(config.batch_size))) {
      if (size < 2 && !head.norm_layers().empty()) {
        throw InputError("training stream has a single item; batch normalization needs at least 2");
      }
      const auto bx = gather_rows(x, order, begin, size);
      const auto by = gather_rows(y, order, begin, size);
      Tensor<float> bw({size});
      for (std::size_t r = 0; r < size; ++r) bw[r] = w[order[begin + r]];
      begin += size;

      Graph<float> g;
      const auto pred = head.forward(g, g.constant(bx));
      const auto loss = ops::weighted_rmse(g, pred, by, bw);
      const float value = g.value(loss)[0];
      if (!std::isfinite(value)) throw ComputeError("training loss is not finite at epoch " + std::to_string(epoch));
      for (auto* p : params) p->zero_grad();
      g.backward(loss);
      adam_step(adam, params);
      loss_sum += static_cast<double>(value) * static_cast<double>(size);
    }

    head.set_mode(BatchNormMode::Inference);
    const auto val_pred = head.predict(val_x);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    // Rounded to the checkpoint's storage precision so history and checkpoint agree exactly.
    rec.val_loss = static_cast<double>(static_cast<float>(rmse_fractions(val_pred, val_y)));
    rec.lr = adam.current_lr();
    if (!std::isfinite(rec.val_loss)) throw ComputeError("validation loss is not finite at epoch " + std::to_string(epoch));
    result.history.push_back(rec);

    if (!have_best || rec.val_loss < static_cast<double>(result.best.val_loss)) {
      have_best = true;
      result.best.model = model.to_tensors();
      result.best.epoch = epoch;
      result.best.val_loss = static_cast<float>(rec.val_loss);
      result.best.config_hash = config.hash();
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  return result;
}

std::vector<PredictionRow> predict(const Checkpoint& checkpoint, const std::vector<std::string>& image_ids,
                                   const std::vector<Image>& images) {
  if (image_ids.size() != images.size()) throw InputError("predict: ids and images differ in count");
  auto model = BiomassModel::from_tensors(checkpoint.model);
  std::vector<PredictionRow> rows;
  rows.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto p = model.predict_fractions(model.features_of(images[i]));
    rows.push_back({image_ids[i], 100.0 * p[kGrass], 100.0 * p[kWhite], 100.0 * p[kRed],
                    100.0 * p[kWeeds]});
  }
  return rows;
}

std::vector<PredictionRow> predict_directory(const Checkpoint& checkpoint, const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError("image directory not found: " + dir.string());
  auto model = BiomassModel::from_tensors(checkpoint.model);
  std::vector<PredictionRow> rows;
  for (const auto& path : list_images(dir)) {
    const auto p = model.predict_fractions(model.features_of(read_image(path)));
    rows.push_back({path.stem().string(), 100.0 * p[kGrass], 100.0 * p[kWhite], 100.0 * p[kRed],
                    100.0 * p[kWeeds]});
  }
  return rows;
}

}  // namespace biomass
