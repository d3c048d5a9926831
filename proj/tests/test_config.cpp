// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/config.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "flowsr/checkpoint.hpp"
#include "flowsr/common.hpp"

using namespace flowsr;
namespace cf = flowsr::config;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config round trip is the identity") {
  cf::ExperimentConfig cfg;
  cfg.seed = 77;
  cfg.model.channels = {4, 4, 8, 8, 8};
  cfg.flow.loss_mode = flow::LossMode::dp;
  cfg.degradation.lowpass = true;

  const std::string text = cf::to_json_text(cfg);
  auto parsed = cf::from_json_text(text);
  CHECK(cf::to_json_text(parsed) == text);
  CHECK(parsed.seed == 77);
  CHECK(parsed.model.channels == std::vector<int>{4, 4, 8, 8, 8});
  CHECK(parsed.flow.loss_mode == flow::LossMode::dp);
  CHECK(parsed.degradation.lowpass);
  CHECK(parsed.train.seed == 77);  // master seed feeds the trainer
}

TEST_CASE("unknown keys are rejected") {
  CHECK_THROWS_AS((void)cf::from_json_text(R"({"bogus": 1})"), Error);
  CHECK_THROWS_AS(
      (void)cf::from_json_text(R"({"flow": {"sigma_maximum": 0.3}})"), Error);
  CHECK_THROWS_AS((void)cf::from_json_text(R"({"seed": )"), Error);
}

TEST_CASE("overrides follow dotted paths") {
  cf::ExperimentConfig cfg;
  cf::apply_override(cfg, "train.epochs=20");
  CHECK(cfg.train.epochs == 20);
  cf::apply_override(cfg, "flow.loss_mode=dp");
  CHECK(cfg.flow.loss_mode == flow::LossMode::dp);
  cf::apply_override(cfg, "model.channels=[4,4,8,16,16]");
  CHECK(cfg.model.channels == std::vector<int>{4, 4, 8, 16, 16});
  cf::apply_override(cfg, "seed=9");
  CHECK(cfg.seed == 9);
  CHECK_THROWS_AS(cf::apply_override(cfg, "train.bogus=1"), Error);
  CHECK_THROWS_AS(cf::apply_override(cfg, "no_equals_sign"), Error);
}

TEST_CASE("config file save and load") {
  const std::string path = "test_tmp_config.json";
  cf::ExperimentConfig cfg;
  cfg.seed = 5;
  cf::save_file(path, cfg);
  auto loaded = cf::load_file(path);
  CHECK(loaded.seed == 5);
  CHECK_THROWS_AS((void)cf::load_file("no_such_config.json"), Error);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint round trip is byte-identical") {
  const std::string p1 = "test_tmp_ck1.bin";
  const std::string p2 = "test_tmp_ck2.bin";

  model::ModelConfig mcfg;
  mcfg.backbone = model::Backbone::mlp;
  mcfg.mlp_hidden = 8;
  mcfg.embed_dim = 16;
  model::Model net(mcfg, 3);

  model::Checkpoint ck;
  ck.model_cfg = net.config();
  ck.flow_cfg = flow::FlowConfig{};
  ck.stft_cfg = dsp::StftConfig{};
  ck.step = 42;
  ck.seed = 7;
  ck.params = net.params();
  ck.has_optimizer = true;
  ck.opt_step = 42;
  for (const auto& p : net.params())
    if (p.trainable) {
      ck.adam_m.emplace_back(static_cast<size_t>(p.value.size()), 0.25);
      ck.adam_v.emplace_back(static_cast<size_t>(p.value.size()), 0.5);
    }

  model::save_checkpoint(p1, ck);
  auto loaded = model::load_checkpoint(p1);
  CHECK(loaded.step == 42);
  CHECK(loaded.seed == 7);
  CHECK(loaded.has_optimizer);
  CHECK(loaded.opt_step == 42);
  REQUIRE(loaded.params.size() == ck.params.size());
  for (size_t i = 0; i < ck.params.size(); ++i) {
    CHECK(loaded.params[i].name == ck.params[i].name);
    CHECK(loaded.params[i].trainable == ck.params[i].trainable);
    for (int j = 0; j < ck.params[i].value.size(); ++j)
      REQUIRE(loaded.params[i].value.values()[static_cast<size_t>(j)] ==
              ck.params[i].value.values()[static_cast<size_t>(j)]);
  }

  model::save_checkpoint(p2, loaded);
  CHECK(slurp(p1) == slurp(p2));

  // the restored params rebuild an identical model
  model::Model net2(loaded.model_cfg, loaded.params);
  CHECK(net2.param_count() == net.param_count());

  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("checkpoint loading rejects corrupt files") {
  const std::string good = "test_tmp_ck_good.bin";
  const std::string bad = "test_tmp_ck_bad.bin";

  model::ModelConfig mcfg;
  mcfg.backbone = model::Backbone::mlp;
  mcfg.mlp_hidden = 4;
  mcfg.embed_dim = 8;
  model::Model net(mcfg, 3);
  model::Checkpoint ck;
  ck.model_cfg = net.config();
  ck.params = net.params();
  model::save_checkpoint(good, ck);

  SUBCASE("wrong magic") {
    std::string data = slurp(good);
    data[0] = 'X';
    std::ofstream out(bad, std::ios::binary);
    out << data;
    out.close();
    try {
      (void)model::load_checkpoint(bad);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
  }
  SUBCASE("truncated file") {
    std::string data = slurp(good);
    data.resize(data.size() / 2);
    std::ofstream out(bad, std::ios::binary);
    out << data;
    out.close();
    CHECK_THROWS_AS((void)model::load_checkpoint(bad), Error);
  }
  SUBCASE("unsupported version") {
    std::string data = slurp(good);
    data[4] = 99;
    std::ofstream out(bad, std::ios::binary);
    out << data;
    out.close();
    try {
      (void)model::load_checkpoint(bad);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }
  std::remove(good.c_str());
  std::remove(bad.c_str());
}
