#include <cstdio>
#include <cstring>
#include <fstream>

#include "doctest.h"
#include "radon/model.hpp"
#include "test_helpers.hpp"

using namespace radon;
using helpers::TempDir;

TEST_CASE("tied and fresh untied models produce bit-identical branch features") {
  Rng rng(3);
  auto x = helpers::random_images(2, helpers::small_input(), rng);
  for (WeightMode mode : {WeightMode::tied, WeightMode::untied}) {
    auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(), mode, 9);
    CHECK(helpers::same_values(m.features_a(x), m.features_b(x)));
  }
}

TEST_CASE("build is deterministic per seed") {
  auto m1 = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                                WeightMode::untied, 42);
  auto m2 = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                                WeightMode::untied, 42);
  auto m3 = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                                WeightMode::untied, 43);
  auto p1 = m1.parameters();
  auto p2 = m2.parameters();
  auto p3 = m3.parameters();
  REQUIRE(p1.size() == p2.size());
  bool any_differs_from_other_seed = false;
  for (size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].name == p2[i].name);
    CHECK(helpers::same_values(p1[i].tensor, p2[i].tensor));
    if (!helpers::same_values(p1[i].tensor, p3[i].tensor)) any_differs_from_other_seed = true;
  }
  CHECK(any_differs_from_other_seed);
}

TEST_CASE("stack that collapses spatial dims is rejected naming the layer") {
  std::vector<LayerSpec> layers{
      LayerSpec::conv_layer(4, 3, 1, 0),
      LayerSpec::maxpool_layer(4, 4),  // 16x16 -> 14x14 -> 3x3; next pool cannot fit
      LayerSpec::maxpool_layer(4, 4),
      LayerSpec::flatten_layer(),
  };
  CHECK_THROWS_WITH_AS(
      SiameseModel::build(layers, helpers::small_input(), WeightMode::tied, 1),
      doctest::Contains("layer 3"), ConfigError);
}

TEST_CASE("score of identical images on a tied model is the head-bias constant") {
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::tied, 5);
  Rng rng(6);
  auto x1 = helpers::random_images(1, helpers::small_input(), rng);
  auto x2 = helpers::random_images(1, helpers::small_input(), rng);
  const float s1 = m.score(x1, x1).item();
  const float s2 = m.score(x2, x2).item();
  CHECK(s1 == s2);
  CHECK(s1 == 0.5f);  // head bias starts at zero, so sigma(0)
}

TEST_CASE("zero head gives 0.5 regardless of inputs") {
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::untied, 5);
  for (auto& [name, t] : m.parameters()) {
    if (name.rfind("head.", 0) == 0) {
      auto v = t.values_mut();
      std::fill(v.begin(), v.end(), 0.0f);
    }
  }
  Rng rng(7);
  auto a = helpers::random_images(3, helpers::small_input(), rng);
  auto b = helpers::random_images(3, helpers::small_input(), rng);
  auto scores = m.score(a, b);
  for (float s : scores.values()) CHECK(s == 0.5f);
}

TEST_CASE("scores are deterministic and inside (0,1)") {
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::untied, 11);
  Rng rng(8);
  auto a = helpers::random_images(4, helpers::small_input(), rng);
  auto b = helpers::random_images(4, helpers::small_input(), rng);
  auto s1 = m.score(a, b);
  auto s2 = m.score(a, b);
  CHECK(helpers::same_values(s1, s2));
  for (float v : s1.values()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("tied-mode score is symmetric bit-exactly") {
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::tied, 19);
  Rng rng(20);
  auto x = helpers::random_images(2, helpers::small_input(), rng);
  auto y = helpers::random_images(2, helpers::small_input(), rng);
  CHECK(helpers::same_values(m.score(x, y), m.score(y, x)));
}

TEST_CASE("score rejects mismatched batches") {
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::tied, 1);
  Rng rng(2);
  auto a = helpers::random_images(2, helpers::small_input(), rng);
  auto b = helpers::random_images(3, helpers::small_input(), rng);
  CHECK_THROWS_AS(m.score(a, b), ShapeError);
}

TEST_CASE("parameter counts match the hand count for the reference spec") {
  // conv1 16*1*3*3+16 = 160; conv2 32*16*3*3+32 = 4640; conv3 64*32*3*3+64 = 18496
  // dense 4096*128+128 = 524416; branch total 547712; head 128+1 = 129
  auto untied = SiameseModel::build(helpers::reference_layers(), helpers::reference_input(),
                                    WeightMode::untied, 1);
  auto tied = SiameseModel::build(helpers::reference_layers(), helpers::reference_input(),
                                  WeightMode::tied, 1);
  CHECK(untied.parameter_count() == 2 * 547712 + 129);
  CHECK(tied.parameter_count() == 547712 + 129);
  CHECK(untied.feature_width() == 128);

  // tensor-level counts: 8 branch tensors, 2 head tensors
  CHECK(untied.parameters().size() == 2 * 8 + 2);
  CHECK(tied.parameters().size() == 8 + 2);
}

TEST_CASE("freeze mask filters trainable parameters") {
  auto m = SiameseModel::build(helpers::reference_layers(), helpers::reference_input(),
                               WeightMode::untied, 1);
  CHECK(m.trainable_parameters().size() == 18);
  m.freeze_mask() = {"conv1", "conv2", "conv3"};
  auto rest = m.trainable_parameters();
  CHECK(rest.size() == 6);  // dense1 kernel+bias in both branches, head weight+bias
  for (auto& [name, t] : rest) CHECK(name.find("conv") == std::string::npos);
}

TEST_CASE("transplant with an empty map changes nothing and reports all-skipped") {
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::untied, 33);
  auto before = m.parameters();
  std::vector<Tensor> snapshots;
  for (auto& [name, t] : before) snapshots.push_back(t.clone());

  WeightContainer donor;
  auto report = m.transplant(donor, {});
  CHECK(report.transplanted_count() == 0);
  CHECK(report.entries.size() == 2);  // conv1, dense1
  auto after = m.parameters();
  for (size_t i = 0; i < after.size(); ++i)
    CHECK(helpers::same_values(after[i].tensor, snapshots[i]));
}

TEST_CASE("full transplant restores a scrambled sibling bit-exactly") {
  TempDir tmp("transplant");
  auto donor_model = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                                         WeightMode::untied, 77);
  const std::string donor_path = tmp.path("donor.rdnw");
  donor_model.save_weights(donor_path);

  // same seed -> identical head; scramble the branches, then transplant back
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::untied, 77);
  for (auto& [name, t] : m.parameters()) {
    if (name.rfind("head.", 0) == 0) continue;
    auto v = t.values_mut();
    for (auto& x : v) x += 0.37f;
  }
  Rng rng(78);
  auto a = helpers::random_images(2, helpers::small_input(), rng);
  auto b = helpers::random_images(2, helpers::small_input(), rng);
  CHECK_FALSE(helpers::same_values(m.score(a, b), donor_model.score(a, b)));

  auto donor = WeightContainer::load(donor_path);
  std::map<std::string, std::string> layer_map;
  for (const auto& layer : m.branch_layer_names()) layer_map[layer] = "branch_a." + layer;
  auto report = m.transplant(donor, layer_map);
  CHECK(report.transplanted_count() == 2);
  CHECK(helpers::same_values(m.score(a, b), donor_model.score(a, b)));

  // idempotence: a second identical transplant is a no-op
  auto snap = m.parameters();
  std::vector<Tensor> clones;
  for (auto& [name, t] : snap) clones.push_back(t.clone());
  m.transplant(donor, layer_map);
  auto again = m.parameters();
  for (size_t i = 0; i < again.size(); ++i)
    CHECK(helpers::same_values(again[i].tensor, clones[i]));
}

TEST_CASE("partial transplant leaves unmapped layers at their seeded init") {
  TempDir tmp("partial");
  auto donor_model = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                                         WeightMode::untied, 101);
  donor_model.save_weights(tmp.path("donor.rdnw"));
  auto donor = WeightContainer::load(tmp.path("donor.rdnw"));

  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::untied, 202);
  auto init_snapshot = [&] {
    std::map<std::string, Tensor> s;
    for (auto& [name, t] : m.parameters()) s[name] = t.clone();
    return s;
  }();

  auto report = m.transplant(donor, {{"conv1", "branch_a.conv1"}});
  CHECK(report.transplanted_count() == 1);
  for (auto& [name, t] : m.parameters()) {
    if (name.find("conv1") != std::string::npos) {
      const std::string donor_name = "branch_a.conv1" + name.substr(name.rfind('.'));
      CHECK(helpers::same_values(t, *donor.find(donor_name)));
    } else {
      CHECK(helpers::same_values(t, init_snapshot.at(name)));
    }
  }
}

TEST_CASE("transplant rejects shape mismatches and missing donors by name") {
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::untied, 1);
  WeightContainer donor;
  donor.add("other.conv1.kernel", Tensor::zeros({4, 1, 5, 5}));
  donor.add("other.conv1.bias", Tensor::zeros({4}));
  CHECK_THROWS_WITH_AS(m.transplant(donor, {{"conv1", "other.conv1"}}),
                       doctest::Contains("conv1"), ShapeError);
  CHECK_THROWS_WITH_AS(m.transplant(donor, {{"dense1", "nowhere.dense1"}}),
                       doctest::Contains("nowhere.dense1"), ValidationError);
  auto snapshot = m.parameters();
  CHECK_THROWS_AS(m.transplant(donor, {{"missing_layer", "other.conv1"}}), ValidationError);
}

TEST_CASE("weight files round-trip bit-exactly") {
  TempDir tmp("roundtrip");
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::untied, 55);
  Rng rng(56);
  auto a = helpers::random_images(2, helpers::small_input(), rng);
  auto b = helpers::random_images(2, helpers::small_input(), rng);
  auto probe = m.score(a, b);

  const std::string path = tmp.path("w.rdnw");
  m.save_weights(path);
  auto m2 = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                                WeightMode::untied, 999);
  m2.load_weights(path);
  CHECK(helpers::same_values(m2.score(a, b), probe));

  // saving the loaded model reproduces the file byte-for-byte
  const std::string path2 = tmp.path("w2.rdnw");
  m2.save_weights(path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
}

TEST_CASE("truncated weight files are rejected and leave the model untouched") {
  TempDir tmp("truncated");
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::tied, 3);
  const std::string path = tmp.path("w.rdnw");
  m.save_weights(path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();

  auto m2 = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                                WeightMode::tied, 4);
  std::vector<Tensor> snapshot;
  for (auto& [name, t] : m2.parameters()) snapshot.push_back(t.clone());
  CHECK_THROWS_AS(m2.load_weights(path), IoError);
  auto after = m2.parameters();
  for (size_t i = 0; i < after.size(); ++i)
    CHECK(helpers::same_values(after[i].tensor, snapshot[i]));
}

TEST_CASE("a renamed tensor fails the load naming the missing tensor") {
  TempDir tmp("renamed");
  auto m = SiameseModel::build(helpers::small_layers(), helpers::small_input(),
                               WeightMode::tied, 3);
  WeightContainer c;
  for (auto& [name, t] : m.parameters()) {
    c.add(name == "branch.conv1.kernel" ? "branch.conv1.kernelX" : name, t);
  }
  const std::string path = tmp.path("w.rdnw");
  c.save(path);
  CHECK_THROWS_WITH_AS(m.load_weights(path), doctest::Contains("branch.conv1.kernel"),
                       ValidationError);
}

TEST_CASE("bad magic is rejected") {
  TempDir tmp("magic");
  const std::string path = tmp.path("notweights.rdnw");
  std::ofstream f(path, std::ios::binary);
  f << "JUNKJUNKJUNKJUNK";
  f.close();
  CHECK_THROWS_WITH_AS(WeightContainer::load(path), doctest::Contains("magic"), IoError);
}

TEST_CASE("RDNW byte layout is exactly as documented") {
  TempDir tmp("layout");
  WeightContainer c;
  c.add("ab", Tensor::from_data({2, 1}, {1.0f, 2.0f}));
  const std::string path = tmp.path("t.rdnw");
  c.save(path);

  std::ifstream f(path, std::ios::binary);
  std::string b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  // magic, version=1 LE, count=1 LE
  REQUIRE(b.size() == 4 + 4 + 4 + 2 + 2 + 1 + 1 + 8 + 8);
  CHECK(b.substr(0, 4) == "RDNW");
  CHECK(static_cast<uint8_t>(b[4]) == 1);
  CHECK(static_cast<uint8_t>(b[5]) == 0);
  CHECK(static_cast<uint8_t>(b[8]) == 1);
  // name_len=2 LE, "ab", dtype=0, rank=2, dims 2 and 1 LE
  CHECK(static_cast<uint8_t>(b[12]) == 2);
  CHECK(static_cast<uint8_t>(b[13]) == 0);
  CHECK(b.substr(14, 2) == "ab");
  CHECK(static_cast<uint8_t>(b[16]) == 0);
  CHECK(static_cast<uint8_t>(b[17]) == 2);
  CHECK(static_cast<uint8_t>(b[18]) == 2);
  CHECK(static_cast<uint8_t>(b[22]) == 1);
  // payload: 1.0f then 2.0f, little-endian IEEE 754
  float v0, v1;
  std::memcpy(&v0, b.data() + 26, 4);
  std::memcpy(&v1, b.data() + 30, 4);
  CHECK(v0 == 1.0f);
  CHECK(v1 == 2.0f);
}
