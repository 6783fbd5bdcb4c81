#include "biomass/model.hpp"

#include <cmath>

namespace biomass {

namespace {

float scalar_of(const std::vector<NamedTensor>& tensors, const std::string& name) {
  const auto* t = find_tensor(tensors, name);
  if (!t || t->tensor.size() != 1) throw InputError("checkpoint: missing or malformed '" + name + "'");
  return t->tensor[0];
}

Tensor<float> tensor_of(const std::vector<NamedTensor>& tensors, const std::string& name) {
  const auto* t = find_tensor(tensors, name);
  if (!t) throw InputError("checkpoint: missing tensor '" + name + "'");
  return t->tensor;
}

int exact_int(float v, const std::string& what) {
  if (!(v >= 0.0f) || v != std::floor(v) || v > 16777216.0f) {
    throw InputError("checkpoint: '" + what + "' is not a non-negative integer");
  }
  return static_cast<int>(v);
}

}  // namespace

BiomassModel::BiomassModel(const ExtractorConfig& extractor, int out_size,
                           const std::vector<std::size_t>& hidden, std::uint64_t head_seed)
    : extractor_(extractor), out_size_(out_size) {
  if (out_size <= 0) throw InputError("model input size must be > 0");
  const auto n = extractor_.feature_count(static_cast<std::size_t>(out_size),
                                          static_cast<std::size_t>(out_size));
  head_ = Head<float>(n, hidden, head_seed);
}

std::vector<NamedTensor> BiomassModel::to_tensors() const {
  auto out = extractor_.to_tensors();
  const auto& dense = head_.dense_layers();
  const auto& norms = head_.norm_layers();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    out.push_back({dense[i].weight.name, dense[i].weight.value});
    out.push_back({dense[i].bias.name, dense[i].bias.value});
    if (i < norms.size()) {
      const auto prefix = "head.bn" + std::to_string(i);
      out.push_back({norms[i].gamma.name, norms[i].gamma.value});
      out.push_back({norms[i].beta.name, norms[i].beta.value});
      out.push_back({prefix + ".running_mean", norms[i].running_mean});
      out.push_back({prefix + ".running_var", norms[i].running_var});
    }
  }
  const auto& blocks = extractor_.blocks();
  Tensor<float> layout({blocks.size(), 2});
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    layout(i, 0) = static_cast<float>(blocks[i].out_channels);
    layout(i, 1) = static_cast<float>(blocks[i].convs);
  }
  out.push_back({"meta.extractor_blocks", std::move(layout)});
  out.push_back({"meta.preprocess",
                 Tensor<float>({1}, {extractor_.preprocess() == Preprocess::Caffe ? 1.0f : 0.0f})});
  out.push_back({"meta.out_size", Tensor<float>({1}, {static_cast<float>(out_size_)})});
  return out;
}

BiomassModel BiomassModel::from_tensors(const std::vector<NamedTensor>& tensors) {
  BiomassModel m;
  m.out_size_ = exact_int(scalar_of(tensors, "meta.out_size"), "meta.out_size");
  if (m.out_size_ <= 0) throw InputError("checkpoint: out_size must be > 0");
  const auto layout = tensor_of(tensors, "meta.extractor_blocks");
  if (layout.rank() != 2 || layout.dim(1) != 2) throw InputError("checkpoint: malformed extractor layout");
  std::vector<ConvBlock> blocks;
  for (std::size_t i = 0; i < layout.dim(0); ++i) {
    blocks.push_back({exact_int(layout(i, 0), "extractor channels"), exact_int(layout(i, 1), "extractor convs")});
  }
  const auto pre = scalar_of(tensors, "meta.preprocess");
  m.extractor_ = Extractor<float>(blocks, pre == 1.0f ? Preprocess::Caffe : Preprocess::Unit, tensors);

  std::vector<DenseLayer<float>> dense;
  std::vector<BatchNormLayer<float>> norms;
  for (std::size_t i = 0;; ++i) {
    const auto prefix = "head.dense" + std::to_string(i);
    if (!find_tensor(tensors, prefix + ".weight")) break;
    DenseLayer<float> d;
    d.weight = Parameter<float>(prefix + ".weight", tensor_of(tensors, prefix + ".weight"));
    d.bias = Parameter<float>(prefix + ".bias", tensor_of(tensors, prefix + ".bias"));
    dense.push_back(std::move(d));
    const auto bn = "head.bn" + std::to_string(i);
    if (find_tensor(tensors, bn + ".gamma")) {
      BatchNormLayer<float> n;
      n.gamma = Parameter<float>(bn + ".gamma", tensor_of(tensors, bn + ".gamma"));
      n.beta = Parameter<float>(bn + ".beta", tensor_of(tensors, bn + ".beta"));
      n.running_mean = tensor_of(tensors, bn + ".running_mean");
      n.running_var = tensor_of(tensors, bn + ".running_var");
      for (auto v : n.running_var.data()) {
        if (!(v >= 0.0f)) throw InputError("checkpoint: negative running variance in " + bn);
      }
      n.mode = BatchNormMode::Inference;
      norms.push_back(std::move(n));
    }
  }
  if (dense.empty()) throw InputError("checkpoint: no head layers");
  m.head_ = Head<float>(std::move(dense), std::move(norms));
  const auto expected = m.extractor_.feature_count(static_cast<std::size_t>(m.out_size_),
                                                   static_cast<std::size_t>(m.out_size_));
  if (m.head_.in_features() != expected) {
    throw InputError("checkpoint: head expects " + std::to_string(m.head_.in_features()) +
                     " features but the extractor produces " + std::to_string(expected));
  }
  return m;
}

Tensor<float> BiomassModel::features(const std::vector<const Image*>& images) const {
  for (const auto* img : images) {
    if (img->width != out_size_ || img->height != out_size_) {
      throw ComputeError("model input must be " + std::to_string(out_size_) + "x" + std::to_string(out_size_));
    }
  }
  return extractor_.forward(extractor_.batch_tensor(images));
}

Tensor<float> BiomassModel::features_of(const Image& image) const {
  const Image resized = resize_nearest(image, out_size_, out_size_);
  return features({&resized});
}

Tensor<float> BiomassModel::predict_fractions(const Tensor<float>& features) {
  head_.set_mode(BatchNormMode::Inference);
  return head_.predict(features);
}

std::vector<NamedTensor> Checkpoint::to_tensors() const {
  auto out = model;
  out.push_back({"meta.epoch", Tensor<float>({1}, {static_cast<float>(epoch)})});
  out.push_back({"meta.val_loss", Tensor<float>({1}, {val_loss})});
  Tensor<float> hash({4});
  for (int i = 0; i < 4; ++i) hash[i] = static_cast<float>((config_hash >> (16 * i)) & 0xFFFF);
  out.push_back({"meta.config_hash", std::move(hash)});
  return out;
}

Checkpoint Checkpoint::from_tensors(const std::vector<NamedTensor>& tensors) {
  Checkpoint c;
  for (const auto& t : tensors) {
    if (t.name != "meta.epoch" && t.name != "meta.val_loss" && t.name != "meta.config_hash") {
      c.model.push_back(t);
    }
  }
  c.epoch = exact_int(scalar_of(tensors, "meta.epoch"), "meta.epoch");
  c.val_loss = scalar_of(tensors, "meta.val_loss");
  const auto hash = tensor_of(tensors, "meta.config_hash");
  if (hash.shape() != Shape{4}) throw InputError("checkpoint: malformed meta.config_hash");
  for (int i = 0; i < 4; ++i) {
    const auto part = exact_int(hash[i], "meta.config_hash");
    if (part > 0xFFFF) throw InputError("checkpoint: malformed meta.config_hash");
    c.config_hash |= static_cast<std::uint64_t>(part) << (16 * i);
  }
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const { save_tensor_file(path, to_tensors()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  return from_tensors(load_tensor_file(path));
}

}  // namespace biomass
