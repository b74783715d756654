#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cif/checkpoint.hpp"
#include "cif/training.hpp"
#include "helpers.hpp"

using namespace cif;
namespace fs = std::filesystem;

namespace {

std::vector<PointCloud> tiny_dataset() {
  auto a = synth_dataset(ShapeFamily::defaults(ShapeKind::LShape), 4, 48, 0.01, 1);
  auto b = synth_dataset(ShapeFamily::defaults(ShapeKind::Sphere), 4, 48, 0.01, 2);
  a.insert(a.end(), b.begin(), b.end());
  for (auto& c : a) c = normalize(c).cloud;
  return a;
}

TrainConfig tiny_train(std::size_t epochs) {
  TrainConfig t;
  t.lr0 = 1e-3;
  t.epochs = epochs;
  t.clouds_per_batch = 3;
  t.points_f = 24;
  t.points_h = 24;
  t.seed = 5;
  return t;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cif_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("step learning-rate schedule") {
    TrainConfig c;
    CHECK(lr_at(c, 0) == 1e-4);
    CHECK(lr_at(c, 9) == 1e-4);
    CHECK(lr_at(c, 10) == doctest::Approx(8e-5));
    CHECK(lr_at(c, 25) == doctest::Approx(1e-4 * 0.64));
  }

  TEST_CASE("Adam update matches the closed form") {
    auto p = Tensor<double>::parameter({2}, {1.0, -2.0});
    std::vector<Tensor<double>> params{p};
    AdamState<double> state;
    double m[2] = {0, 0}, v[2] = {0, 0}, x[2] = {1.0, -2.0};
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 5; ++t) {
      std::vector<std::vector<double>> g{{0.5 * t, -1.0 / t}};
      adam_step<double>(params, g, state, lr);
      for (int i = 0; i < 2; ++i) {
        m[i] = b1 * m[i] + (1 - b1) * g[0][i];
        v[i] = b2 * v[i] + (1 - b2) * g[0][i] * g[0][i];
        const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
        x[i] -= lr * mh / (std::sqrt(vh) + eps);
      }
    }
    CHECK(p.data()[0] == doctest::Approx(x[0]).epsilon(1e-14));
    CHECK(p.data()[1] == doctest::Approx(x[1]).epsilon(1e-14));
    CHECK(state.step == 5);
    std::vector<std::vector<double>> bad{{1.0}};
    CHECK_THROWS_AS(adam_step<double>(params, bad, state, lr), ShapeError);
  }

  TEST_CASE("precision names") {
    CHECK(parse_precision("f32") == Precision::F32);
    CHECK(parse_precision("float64") == Precision::F64);
    CHECK(to_string(Precision::F64) == "f64");
    CHECK_THROWS_AS(parse_precision("f16"), std::invalid_argument);
  }

  TEST_CASE("config validation") {
    TrainConfig c;
    c.clouds_per_batch = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.decay_factor = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }

  TEST_CASE("training lowers the loss and is reproducible") {
    auto data = tiny_dataset();
    ModelConfig mc = toy_model_config(3);
    mc.zero_init = true;
    auto a = train<float>(mc, tiny_train(6), data);
    auto b = train<float>(mc, tiny_train(6), data);
    REQUIRE(a.log.size() == 6);
    CHECK(a.log.back().mean_loss < a.log.front().mean_loss);
    for (std::size_t i = 0; i < 6; ++i) CHECK(a.log[i].tsv() == b.log[i].tsv());
    CHECK(serialize_checkpoint(a.model) == serialize_checkpoint(b.model));
  }

  TEST_CASE("resuming from a checkpoint matches an uninterrupted run") {
    auto data = tiny_dataset();
    ModelConfig mc = toy_model_config(4);
    fs::path dir = scratch("resume");
    auto full = train<double>(mc, tiny_train(4), data);

    TrainOutput out;
    out.dir = dir;
    train<double>(mc, tiny_train(2), data, out);
    Checkpoint<double> ck = load_checkpoint<double>(dir / "checkpoint.bin");
    REQUIRE(ck.training.has_value());
    CHECK(ck.training->epoch == 2);
    auto rest = resume<double>(std::move(ck.model), std::move(*ck.training), data, out, 4);
    CHECK(serialize_checkpoint(rest.model) == serialize_checkpoint(full.model));
    CHECK(rest.log.back().tsv() == full.log.back().tsv());

    std::ifstream log(dir / "loss.tsv");
    std::size_t lines = 0;
    for (std::string s; std::getline(log, s);) ++lines;
    CHECK(lines == 4);
  }

  TEST_CASE("clouds too small for the split are rejected by name") {
    auto data = tiny_dataset();
    data[2].points.resize(10);
    data[2].id = "runt";
    Trainer<float> trainer(CifModel<float>(toy_model_config()), tiny_train(1));
    CHECK_THROWS_WITH_AS(trainer.run_epoch(data), doctest::Contains("runt"), DataError);
  }

  TEST_CASE("non-finite losses surface as TrainingError") {
    auto data = tiny_dataset();
    data[0].points[0] = {1e30, 0, 0};
    TrainConfig t = tiny_train(1);
    t.points_f = 48 - 1;
    t.points_h = 1;
    Trainer<float> trainer(CifModel<float>(toy_model_config()), t);
    CHECK_THROWS_AS(trainer.run_epoch(data), TrainingError);
  }

  TEST_CASE("periodic checkpoints") {
    auto data = tiny_dataset();
    fs::path dir = scratch("periodic");
    TrainOutput out;
    out.dir = dir;
    out.checkpoint_every = 2;
    train<float>(toy_model_config(), tiny_train(4), data, out);
    CHECK(fs::exists(dir / "checkpoint_epoch0002.bin"));
    CHECK(fs::exists(dir / "checkpoint_epoch0004.bin"));
    CHECK(fs::exists(dir / "checkpoint.bin"));
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("save, load, save is byte-identical") {
    for (bool with_state : {false, true}) {
      auto data = tiny_dataset();
      Trainer<float> trainer(CifModel<float>(toy_model_config(2)), tiny_train(1));
      trainer.run_epoch(data);
      auto state = trainer.state();
      std::string bytes = serialize_checkpoint(trainer.model(), with_state ? &state : nullptr);
      Checkpoint<float> back = deserialize_checkpoint<float>(bytes);
      CHECK(back.training.has_value() == with_state);
      const TrainingState<float>* s = back.training ? &*back.training : nullptr;
      CHECK(serialize_checkpoint(back.model, s) == bytes);
    }
  }

  TEST_CASE("loaded model computes identical outputs") {
    CifModel<double> model(toy_model_config(6));
    fs::path dir = scratch("ckpt");
    save_checkpoint(dir / "m.bin", model);
    CHECK(checkpoint_precision(dir / "m.bin") == Precision::F64);
    auto loaded = load_checkpoint<double>(dir / "m.bin").model;
    Rng rng(1);
    auto x = to_tensor<double>(testing::random_cloud(16, rng));
    CHECK(model.loss(x, x).item() == loaded.loss(x, x).item());
    CHECK(slurp(dir / "m.bin") == serialize_checkpoint(loaded));
  }

  TEST_CASE("corrupt inputs raise CheckpointError") {
    CifModel<float> model(toy_model_config(1));
    std::string bytes = serialize_checkpoint(model);
    CHECK_THROWS_AS(deserialize_checkpoint<float>(bytes.substr(0, bytes.size() - 3)), CheckpointError);
    CHECK_THROWS_AS(deserialize_checkpoint<float>(bytes + "x"), CheckpointError);
    CHECK_THROWS_AS(deserialize_checkpoint<float>("NOT-A-CHECKPOINT\n"), CheckpointError);
    std::string wrong_version = bytes;
    wrong_version.replace(wrong_version.find("format_version 1"), 16, "format_version 9");
    CHECK_THROWS_AS(deserialize_checkpoint<float>(wrong_version), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint<float>("/nonexistent/model.bin"), CheckpointError);
  }

  TEST_CASE("float checkpoint loads at double precision") {
    CifModel<float> model(toy_model_config(2));
    auto promoted = deserialize_checkpoint<double>(serialize_checkpoint(model)).model;
    auto pf = model.parameters();
    auto pd = promoted.parameters();
    REQUIRE(pf.size() == pd.size());
    for (std::size_t i = 0; i < pf.size(); ++i)
      for (std::size_t k = 0; k < pf[i].tensor.size(); ++k)
        CHECK(static_cast<double>(pf[i].tensor.data()[k]) == pd[i].tensor.data()[k]);
  }
}
