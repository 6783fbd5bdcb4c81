#include <doctest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "biomass/errors.hpp"
#include "biomass/model.hpp"
#include "biomass/tensor_file.hpp"
#include "support.hpp"

using namespace biomass;

namespace {

std::string to_bytes(const std::vector<NamedTensor>& t) {
  std::ostringstream os(std::ios::binary);
  write_tensor_file(os, t);
  return os.str();
}

std::vector<NamedTensor> from_bytes(const std::string& s) {
  std::istringstream is(s, std::ios::binary);
  return read_tensor_file(is);
}

}  // namespace

TEST_CASE("layout follows the documented byte format") {
  const std::vector<NamedTensor> t{{"ab", Tensor<float>({2}, std::vector<float>{1.0f, -2.5f})}};
  const auto b = to_bytes(t);
  // magic, version, count, name len, name, rank, dim, 2 floats
  REQUIRE(b.size() == 4 + 4 + 4 + 2 + 2 + 1 + 4 + 8);
  CHECK(b.substr(0, 4) == "BIOM");
  CHECK(b[4] == 1);
  CHECK(b[8] == 1);
  CHECK(b[12] == 2);
  CHECK(b.substr(14, 2) == "ab");
  CHECK(b[16] == 1);
  CHECK(b[17] == 2);
  const auto bits = std::bit_cast<std::uint32_t>(-2.5f);
  CHECK(static_cast<unsigned char>(b[25]) == (bits & 0xFF));
  CHECK(static_cast<unsigned char>(b[28]) == (bits >> 24));
}

TEST_CASE("round trip is bit exact, including special values") {
  Rng rng(1);
  std::vector<NamedTensor> t;
  Tensor<float> a({3, 2, 2});
  for (auto& v : a.data()) v = static_cast<float>(rng.uniform(-1e6, 1e6));
  a[0] = -0.0f;
  a[1] = std::numeric_limits<float>::denorm_min();
  a[2] = std::numeric_limits<float>::infinity();
  t.push_back({"extractor.conv0.weight", a});
  t.push_back({"x", Tensor<float>({1}, 3.0f)});
  const auto bytes = to_bytes(t);
  const auto back = from_bytes(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == t[0].name);
  CHECK(back[0].tensor.shape() == a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::bit_cast<std::uint32_t>(back[0].tensor[i]) == std::bit_cast<std::uint32_t>(a[i]));
  }
  CHECK(to_bytes(back) == bytes);
}

TEST_CASE("corrupt files are input errors") {
  const std::vector<NamedTensor> t{{"w", Tensor<float>({2, 2}, 1.0f)}};
  const auto good = to_bytes(t);
  CHECK_THROWS_AS(from_bytes("XIOM" + good.substr(4)), InputError);
  CHECK_THROWS_AS(from_bytes(good.substr(0, good.size() - 1)), InputError);
  CHECK_THROWS_AS(from_bytes(good + "x"), InputError);
  auto bad_version = good;
  bad_version[4] = 2;
  CHECK_THROWS_AS(from_bytes(bad_version), InputError);
  CHECK_THROWS_AS(from_bytes(""), InputError);
  std::ostringstream sink;
  CHECK_THROWS_AS(write_tensor_file(sink, {{"a", Tensor<float>({1})}, {"a", Tensor<float>({1})}}), InputError);
}

TEST_CASE("checkpoint save, load, save is byte identical") {
  testing::TempDir dir;
  ExtractorConfig ec;
  ec.blocks = {{3, 1}, {4, 1}};
  ec.weights_source = RandomWeights{5};
  BiomassModel model(ec, 12, {6, 5}, 7);
  // Non-trivial batch norm statistics.
  Tensor<float> x({4, model.extractor().feature_count(12, 12)});
  Rng rng(2);
  for (auto& v : x.data()) v = static_cast<float>(rng.uniform(0, 1));
  model.head().set_mode(BatchNormMode::Train);
  model.head().predict(x);

  Checkpoint c;
  c.model = model.to_tensors();
  c.epoch = 17;
  c.val_loss = 0.123456f;
  c.config_hash = 0xFEDCBA9876543210ULL;
  c.save(dir / "a.biom");
  const auto loaded = Checkpoint::load(dir / "a.biom");
  CHECK(loaded.epoch == 17);
  CHECK(loaded.val_loss == 0.123456f);
  CHECK(loaded.config_hash == 0xFEDCBA9876543210ULL);
  loaded.save(dir / "b.biom");
  CHECK(testing::read_file(dir / "a.biom") == testing::read_file(dir / "b.biom"));

  auto rebuilt = BiomassModel::from_tensors(loaded.model);
  CHECK(rebuilt.out_size() == 12);
  CHECK(rebuilt.head().hidden_dims() == std::vector<std::size_t>{6, 5});
  CHECK(rebuilt.head().norm_layers()[0].running_var == model.head().norm_layers()[0].running_var);
  model.head().set_mode(BatchNormMode::Inference);
  const auto img = testing::random_image(30, 20, 3);
  CHECK(rebuilt.predict_fractions(rebuilt.features_of(img)) == model.predict_fractions(model.features_of(img)));
}

TEST_CASE("inconsistent checkpoints are rejected") {
  ExtractorConfig ec;
  ec.blocks = {{3, 1}};
  BiomassModel model(ec, 8, {5}, 1);
  auto t = model.to_tensors();
  CHECK_NOTHROW(BiomassModel::from_tensors(t));
  auto missing = t;
  missing.erase(missing.begin());
  CHECK_THROWS_AS(BiomassModel::from_tensors(missing), InputError);
  auto wrong_size = t;
  for (auto& n : wrong_size) {
    if (n.name == "meta.out_size") n.tensor[0] = 10;
  }
  CHECK_THROWS_AS(BiomassModel::from_tensors(wrong_size), InputError);
  CHECK_THROWS_AS(Checkpoint::from_tensors(t), InputError);  // no epoch metadata
}
