#include "biomass/extractor.hpp"

#include <charconv>
#include <cmath>

#include "biomass/kernels.hpp"
#include "biomass/rng.hpp"

namespace biomass {

namespace {

int parse_positive(std::string_view s, const std::string& context) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v <= 0) {
    throw InputError("invalid " + context + " '" + std::string(s) + "'");
  }
  return v;
}

std::string weight_name(std::size_t i) { return "extractor.conv" + std::to_string(i) + ".weight"; }
std::string bias_name(std::size_t i) { return "extractor.conv" + std::to_string(i) + ".bias"; }

}  // namespace

std::vector<ConvBlock> parse_blocks(const std::string& text) {
  if (text == "vgg16") return {{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}};
  std::vector<ConvBlock> blocks;
  std::string_view rest = text;
  while (!rest.empty()) {
    auto comma = rest.find(',');
    auto item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    ConvBlock b;
    auto x = item.find('x');
    if (x == std::string_view::npos) {
      b.out_channels = parse_positive(item, "extractor channel count");
    } else {
      b.out_channels = parse_positive(item.substr(0, x), "extractor channel count");
      b.convs = parse_positive(item.substr(x + 1), "extractor conv count");
    }
    blocks.push_back(b);
  }
  if (blocks.empty()) throw InputError("extractor needs at least one block");
  return blocks;
}

std::string format_blocks(const std::vector<ConvBlock>& blocks) {
  std::string s;
  for (const auto& b : blocks) {
    if (!s.empty()) s += ',';
    s += std::to_string(b.out_channels);
    if (b.convs != 1) s += "x" + std::to_string(b.convs);
  }
  return s;
}

Preprocess parse_preprocess(const std::string& text) {
  if (text == "unit") return Preprocess::Unit;
  if (text == "caffe") return Preprocess::Caffe;
  throw InputError("unknown extractor preprocessing '" + text + "' (expected unit or caffe)");
}

std::variant<RandomWeights, WeightFile> parse_weights_source(const std::string& text) {
  if (text.rfind("random:", 0) == 0) {
    auto num = std::string_view(text).substr(7);
    std::uint64_t seed = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), seed);
    if (num.empty() || ec != std::errc() || ptr != num.data() + num.size()) {
      throw InputError("invalid extractor seed in '" + text + "'");
    }
    return RandomWeights{seed};
  }
  if (text.rfind("file:", 0) == 0 && text.size() > 5) return WeightFile{text.substr(5)};
  throw InputError("extractor.source must be random:<seed> or file:<path>, got '" + text + "'");
}

template <typename T>
Extractor<T>::Extractor(const ExtractorConfig& config)
    : blocks_(config.blocks), preprocess_(config.preprocess) {
  if (blocks_.empty()) throw InputError("extractor needs at least one block");
  if (const auto* r = std::get_if<RandomWeights>(&config.weights_source)) {
    init_random(r->seed);
  } else {
    load(load_tensor_file(std::get<WeightFile>(config.weights_source).path));
  }
}

template <typename T>
Extractor<T>::Extractor(std::vector<ConvBlock> blocks, Preprocess preprocess,
                        const std::vector<NamedTensor>& tensors)
    : blocks_(std::move(blocks)), preprocess_(preprocess) {
  if (blocks_.empty()) throw InputError("extractor needs at least one block");
  load(tensors);
}

template <typename T>
void Extractor<T>::init_random(std::uint64_t seed) {
  Rng rng(seed);
  std::size_t in = 3, index = 0;
  for (const auto& b : blocks_) {
    for (int k = 0; k < b.convs; ++k, ++index) {
      const auto out = static_cast<std::size_t>(b.out_channels);
      Tensor<T> w({out, in, 3, 3});
      const double limit = std::sqrt(6.0 / static_cast<double>(in * 9));
      for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-limit, limit));
      weights_.emplace_back(weight_name(index), std::move(w), false);
      biases_.emplace_back(bias_name(index), Tensor<T>({out}), false);
      in = out;
    }
  }
}

template <typename T>
void Extractor<T>::load(const std::vector<NamedTensor>& tensors) {
  std::size_t in = 3, index = 0;
  for (const auto& b : blocks_) {
    for (int k = 0; k < b.convs; ++k, ++index) {
      const auto out = static_cast<std::size_t>(b.out_channels);
      const auto* w = find_tensor(tensors, weight_name(index));
      const auto* bias = find_tensor(tensors, bias_name(index));
      if (!w || !bias) {
        throw InputError("extractor weights missing tensor for conv layer " + std::to_string(index));
      }
      if (w->tensor.shape() != Shape{out, in, 3, 3} || bias->tensor.shape() != Shape{out}) {
        throw InputError("extractor weight shape mismatch for conv layer " + std::to_string(index) +
                         ": expected " + shape_to_string({out, in, 3, 3}) + ", file has " +
                         shape_to_string(w->tensor.shape()));
      }
      weights_.emplace_back(weight_name(index), w->tensor.template cast<T>(), false);
      biases_.emplace_back(bias_name(index), bias->tensor.template cast<T>(), false);
      in = out;
    }
  }
}

template <typename T>
Tensor<T> Extractor<T>::forward(const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw ComputeError("extractor expects [batch, 3, h, w], got " + shape_to_string(images.shape()));
  }
  Tensor<T> x = images;
  std::size_t index = 0;
  for (const auto& b : blocks_) {
    for (int k = 0; k < b.convs; ++k, ++index) {
      x = kernels::conv3x3(x, weights_[index].value, biases_[index].value);
      kernels::relu_inplace(x);
    }
    x = kernels::max_pool2(x);
  }
  const auto batch = x.dim(0);
  return x.reshaped({batch, x.size() / batch});
}

template <typename T>
NodeId Extractor<T>::forward(Graph<T>& g, NodeId images) {
  NodeId x = images;
  std::size_t index = 0;
  for (const auto& b : blocks_) {
    for (int k = 0; k < b.convs; ++k, ++index) {
      x = ops::conv3x3(g, x, g.parameter(weights_[index]), g.parameter(biases_[index]));
      x = ops::relu(g, x);
    }
    x = ops::max_pool2(g, x);
  }
  return ops::flatten(g, x);
}

template <typename T>
std::size_t Extractor<T>::feature_count(std::size_t height, std::size_t width) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (height < 2 || width < 2) {
      throw InputError("input of " + std::to_string(height) + "x" + std::to_string(width) +
                       " is too small for " + std::to_string(blocks_.size()) + " pooling stages");
    }
    height /= 2;
    width /= 2;
  }
  return static_cast<std::size_t>(blocks_.back().out_channels) * height * width;
}

template <typename T>
Tensor<T> Extractor<T>::image_tensor(const Image& image) const {
  return batch_tensor({&image});
}

template <typename T>
Tensor<T> Extractor<T>::batch_tensor(const std::vector<const Image*>& images) const {
  if (images.empty()) throw ComputeError("empty image batch");
  const auto h = static_cast<std::size_t>(images.front()->height);
  const auto w = static_cast<std::size_t>(images.front()->width);
  Tensor<T> t({images.size(), 3, h, w});
  constexpr double kMeansBgr[3] = {103.939, 116.779, 123.68};
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (static_cast<std::size_t>(img.height) != h || static_cast<std::size_t>(img.width) != w) {
      throw ComputeError("image batch must share one size");
    }
    for (std::size_t c = 0; c < 3; ++c) {
      T* plane = t.ptr() + (n * 3 + c) * h * w;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double v;
          if (preprocess_ == Preprocess::Unit) {
            v = img.at(static_cast<int>(x), static_cast<int>(y), static_cast<int>(c)) / 255.0;
          } else {
            v = img.at(static_cast<int>(x), static_cast<int>(y), static_cast<int>(2 - c)) - kMeansBgr[c];
          }
          plane[y * w + x] = static_cast<T>(v);
        }
    }
  }
  return t;
}

template <typename T>
void Extractor<T>::set_trainable(bool trainable) {
  for (auto& p : weights_) p.trainable = trainable;
  for (auto& p : biases_) p.trainable = trainable;
}

template <typename T>
std::vector<Parameter<T>*> Extractor<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

template <typename T>
std::vector<NamedTensor> Extractor<T>::to_tensors() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back({weights_[i].name, weights_[i].value.template cast<float>()});
    out.push_back({biases_[i].name, biases_[i].value.template cast<float>()});
  }
  return out;
}

template class Extractor<float>;
template class Extractor<double>;

}  // namespace biomass
