#include <doctest.h>

#include <sstream>

#include "biomass/errors.hpp"
#include "biomass/run_config.hpp"
#include "support.hpp"

using namespace biomass;

namespace {

RunConfig parse(const std::string& text, const std::filesystem::path& base = "/base", bool require = true) {
  std::istringstream in(text);
  return RunConfig::parse(in, base, require);
}

const std::string kPaths = "labels_csv = data/labels.csv\nimage_dir = data/images\nout_dir = /tmp/out\n";

}  // namespace

TEST_CASE("defaults apply when only paths are given") {
  const auto c = parse(kPaths);
  CHECK(c.labels_csv == std::filesystem::path("/base/data/labels.csv"));
  CHECK(c.image_dir == std::filesystem::path("/base/data/images"));
  CHECK(c.out_dir == std::filesystem::path("/tmp/out"));
  CHECK_FALSE(c.split_manifest);
  CHECK(c.val_count == 52);
  CHECK(c.overall == OverallMode::Pooled);
  const auto& t = c.train;
  CHECK(t.epochs == 100);
  CHECK(t.batch_size == 8);
  CHECK(t.lr0 == 1e-3);
  CHECK(t.decay == 5e-6);
  CHECK(t.decay_mode == DecayMode::LrDecay);
  CHECK(t.weights.basic == 1.0);
  CHECK(t.weights.advanced == 1.5);
  CHECK(t.hidden == std::vector<std::size_t>{4096, 256});
  CHECK(t.augment.rotation_deg == 15);
  CHECK(t.augment.variants_per_image == 10);
  CHECK(t.augment.out_size == 500);
  CHECK(t.imputation.variant == ImputationVariant::Mean);
  CHECK(t.seed == 0);
  CHECK(t.imputation.seed == derive_seed({0, fnv1a("imputation")}));
}

TEST_CASE("every key is read") {
  const auto c = parse(kPaths + R"(
# full example
seed = 9
imputation.method = regression
imputation.iterations = 12
imputation.fit_scope = complete_only
split.val_count = 10
split.manifest = split.txt
train.epochs = 7
train.batch_size = 16
train.lr0 = 0.01   # trailing comment
train.decay = 0
train.decay_mode = l2
train.weight_basic = 2
train.weight_advanced = 3
augment.rotation_deg = 5
augment.zoom_frac = 0.1
augment.shift_frac = 0.05
augment.shear_deg = 2
augment.hflip = false
augment.channel_shift = 10
augment.out_size = 64
augment.variants = 3
extractor.source = random:77
extractor.channels = 4x2,8
extractor.preprocess = caffe
head.dims = 32,16,4
metrics.overall = mean
)");
  const auto& t = c.train;
  CHECK(t.seed == 9);
  CHECK(t.imputation.variant == ImputationVariant::Regression);
  CHECK(t.imputation.regression_iterations == 12);
  CHECK(t.imputation.fit_scope == RegressionFitScope::CompleteOnly);
  CHECK(t.imputation.seed == derive_seed({9, fnv1a("imputation")}));
  CHECK(c.val_count == 10);
  CHECK(*c.split_manifest == std::filesystem::path("/base/split.txt"));
  CHECK(t.epochs == 7);
  CHECK(t.batch_size == 16);
  CHECK(t.lr0 == 0.01);
  CHECK(t.decay_mode == DecayMode::L2);
  CHECK(t.weights.basic == 2);
  CHECK(t.weights.advanced == 3);
  CHECK(t.augment.hflip == false);
  CHECK(t.augment.out_size == 64);
  CHECK(t.augment.variants_per_image == 3);
  CHECK(std::get<RandomWeights>(t.extractor.weights_source).seed == 77);
  CHECK(t.extractor.blocks == std::vector<ConvBlock>{{4, 2}, {8, 1}});
  CHECK(t.extractor.preprocess == Preprocess::Caffe);
  CHECK(t.hidden == std::vector<std::size_t>{32, 16});
  CHECK(c.overall == OverallMode::Mean);
  CHECK(RunConfig::keys().size() == 29);
}

TEST_CASE("random extractor seed follows the run seed") {
  const auto a = parse(kPaths + "seed = 1\n");
  const auto b = parse(kPaths + "seed = 2\nextractor.source = random\n");
  CHECK(std::get<RandomWeights>(a.train.extractor.weights_source).seed == derive_seed({1, fnv1a("extractor")}));
  CHECK(std::get<RandomWeights>(b.train.extractor.weights_source).seed == derive_seed({2, fnv1a("extractor")}));
  const auto f = parse(kPaths + "extractor.source = file:w/vgg.biom\n");
  CHECK(std::get<WeightFile>(f.train.extractor.weights_source).path == std::filesystem::path("/base/w/vgg.biom"));
}

TEST_CASE("malformed files are rejected") {
  CHECK_THROWS_AS(parse(kPaths + "bogus = 1\n"), InputError);
  CHECK_THROWS_AS(parse(kPaths + "seed = 1\nseed = 2\n"), InputError);
  CHECK_THROWS_AS(parse(kPaths + "seed 1\n"), InputError);
  CHECK_THROWS_AS(parse(kPaths + "train.epochs = ten\n"), InputError);
  CHECK_THROWS_AS(parse(kPaths + "train.epochs = 0\n"), InputError);
  CHECK_THROWS_AS(parse(kPaths + "train.lr0 = -1\n"), InputError);
  CHECK_THROWS_AS(parse(kPaths + "augment.hflip = maybe\n"), InputError);
  CHECK_THROWS_AS(parse(kPaths + "head.dims = 32,16\n"), InputError);
  CHECK_THROWS_AS(parse(kPaths + "head.dims = 32,0,4\n"), InputError);
  CHECK_THROWS_AS(parse(kPaths + "imputation.method = knn\n"), InputError);
  CHECK_THROWS_AS(parse(kPaths + "metrics.overall = median\n"), InputError);
  CHECK_THROWS_AS(parse("labels_csv = a.csv\n"), InputError);
  try {
    parse(kPaths + "\n\nnope = 3\n");
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("6") != std::string::npos);
  }
}

TEST_CASE("paths may be omitted when not required") {
  const auto c = parse("augment.out_size = 32\n", "/base", false);
  CHECK(c.labels_csv.empty());
  CHECK(c.train.augment.out_size == 32);
}

TEST_CASE("load resolves against the file's directory") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "cfg");
  testing::write_file(dir / "cfg" / "run.cfg", "labels_csv = ../labels.csv\nimage_dir = img\nout_dir = out\n");
  const auto c = RunConfig::load(dir / "cfg" / "run.cfg");
  CHECK(c.labels_csv.lexically_normal() == (dir / "labels.csv").lexically_normal());
  CHECK(c.image_dir == dir / "cfg" / "img");
  CHECK_THROWS_AS(RunConfig::load(dir / "missing.cfg"), InputError);
}

TEST_CASE("head dims") {
  CHECK(parse_head_dims("4096,256,4") == std::vector<std::size_t>{4096, 256});
  CHECK(parse_head_dims("4").empty());
  CHECK_THROWS_AS(parse_head_dims("4096,256"), InputError);
  CHECK_THROWS_AS(parse_head_dims(""), InputError);
}
