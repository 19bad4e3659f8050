#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "doctest.h"
#include "oracles.hpp"
#include "streakfix/checkpoint.hpp"
#include "streakfix/config.hpp"

using namespace streakfix;
namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("image container round trip") {
    std::mt19937_64 rng(1);
    const Image img = oracle::random_image(rng, 7, 11);
    const std::string path = (fs::path(oracle::temp_dir("svcb")) / "a.svcb").string();
    write_image(path, img);
    const Image back = read_image(path);
    CHECK(back == img);
    const std::string bytes = read_file(path);
    CHECK(bytes.size() == 16 + 7 * 11 * 4);
    CHECK(bytes.substr(0, 4) == "SVCB");
    write_text(path, "SVCX" + bytes.substr(4));
    CHECK_THROWS_AS(read_image(path), IoError);
    write_text(path, bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(read_image(path), IoError);
    CHECK_THROWS_AS(read_image(path + ".missing"), IoError);
  }

  TEST_CASE("checkpoint container round trip") {
    Checkpoint c;
    c.arch = "generator";
    c.widths = {4, 4, 4, 4};
    c.seed = 99;
    c.epoch = 3;
    c.extra["variant"] = "ours-fpn";
    NamedTensor t;
    t.shape = {2, 3};
    t.data = {1, 2, 3, 4, 5, -6.5f};
    c.tensors.emplace_back("w", t);
    const std::string bytes = encode_checkpoint(c);
    CHECK(bytes.substr(0, 4) == "SVCK");
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.arch == c.arch);
    CHECK(back.widths == c.widths);
    CHECK(back.seed == 99);
    CHECK(back.epoch == 3);
    CHECK(back.extra == c.extra);
    REQUIRE(back.find("w"));
    CHECK(back.find("w")->data == t.data);
    CHECK(back.find("w")->shape == t.shape);
    CHECK(encode_checkpoint(back) == bytes);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 2)), IoError);
    CHECK_THROWS_AS(decode_checkpoint("SVCK"), IoError);
  }

  TEST_CASE("dataset container") {
    DataConfig dc;
    dc.phantoms = 2;
    dc.slices = 2;
    dc.size = 32;
    dc.sparse_views = 10;
    dc.dense_views = 30;
    dc.seed = 4;
    const std::string a = oracle::temp_dir("ds_a"), b = oracle::temp_dir("ds_b");
    const Dataset da = build_dataset(dc, a);
    build_dataset(dc, b);
    CHECK(read_file((fs::path(a) / kManifestName).string()) == read_file((fs::path(b) / kManifestName).string()));
    const Dataset loaded = load_dataset(a);
    REQUIRE(loaded.samples.size() == 4);
    CHECK(loaded.phantom_ids() == da.phantom_ids());
    const auto pair = loaded.load(loaded.samples[3]);
    CHECK(pair.sparse.rows() == 32);
    CHECK(pair.dense == da.load(da.samples[3]).dense);
    CHECK_THROWS_AS(load_dataset(oracle::temp_dir("ds_empty")), IoError);
  }

  TEST_CASE("config documents") {
    RunConfig c = default_config();
    SUBCASE("full defaults") {
      CHECK(c.data.sparse_views == 67);
      CHECK(c.data.dense_views == 200);
      CHECK(c.train.adam.lr == 1e-4);
      CHECK(c.train.adam.beta1 == 0.5);
      CHECK(c.train.epochs == 50);
      CHECK(c.train.folds == 5);
      CHECK(c.train.patch_size == 256);
      CHECK(c.train.weights.lambda_m == 100.0);
      CHECK(c.train.weights.lambda_p == 10.0);
    }
    SUBCASE("desk profile") {
      const RunConfig d = default_config(Profile::kDesk);
      CHECK(d.data.size == 128);
      CHECK(d.train.patch_size == 64);
      CHECK(d.train.train_patches == 200);
      CHECK(d.train.epochs == 5);
    }
    SUBCASE("unknown keys are rejected") {
      CHECK_THROWS_AS(apply_json(c, nlohmann::json::parse(R"({"trian": {}})")), ConfigError);
      CHECK_THROWS_AS(apply_json(c, nlohmann::json::parse(R"({"train": {"lr": 1e-3, "lrr": 1}})")), ConfigError);
      CHECK_THROWS_AS(apply_json(c, nlohmann::json::parse(R"({"train": {"epochs": "five"}})")), ConfigError);
    }
    SUBCASE("values are range-checked") {
      apply_json(c, nlohmann::json::parse(R"({"train": {"patch_size": 40}})"));
      CHECK_THROWS_AS(c.finalize(), ConfigError);
    }
    SUBCASE("round trip through JSON") {
      apply_json(c, nlohmann::json::parse(R"({"seed": 8, "train": {"variant": "ours-fpn", "lr": 0.002}, "loss": {"lambda_p": 3}})"));
      RunConfig d = default_config();
      apply_json(d, to_json(c));
      CHECK(to_json(d) == to_json(c));
      CHECK(d.train.variant == Variant::kOursFpn);
      CHECK(d.train.weights.lambda_p == 3.0);
    }
    SUBCASE("file over defaults, environment over file") {
      const std::string path = (fs::path(oracle::temp_dir("cfg")) / "run.json").string();
      write_text(path, R"({"seed": 3, "train": {"epochs": 7}})");
      apply_config_file(c, path);
      CHECK(c.seed == 3);
      CHECK(c.train.epochs == 7);
      ::setenv("STREAKFIX_SEED", "41", 1);
      apply_environment(c);
      ::unsetenv("STREAKFIX_SEED");
      CHECK(c.seed == 41);
      c.finalize();
      CHECK(c.train.seed == 41);
      CHECK(c.data.seed == 41);
      ::setenv("STREAKFIX_SEED", "4x", 1);
      CHECK_THROWS_AS(apply_environment(c), ConfigError);
      ::unsetenv("STREAKFIX_SEED");
      CHECK_THROWS_AS(apply_config_file(c, path + ".missing"), IoError);
      write_text(path, "{not json");
      CHECK_THROWS_AS(apply_config_file(c, path), ConfigError);
    }
  }
}
