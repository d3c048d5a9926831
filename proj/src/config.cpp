// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "flowsr/common.hpp"

namespace flowsr::config {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& section) {
  require(j.is_object(), "config section '", section, "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    require(allowed.count(it.key()) > 0, "unknown key '", it.key(),
            "' in config section '", section, "'");
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json range_to_json(const datagen::Range& r) { return json::array({r.lo, r.hi}); }

void get_range(const json& j, const char* key, datagen::Range& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  require(a.is_array() && a.size() == 2, "config: '", key,
          "' must be a [lo, hi] pair");
  out.lo = a[0].get<double>();
  out.hi = a[1].get<double>();
}

// ---- stft ----

json stft_to_json(const dsp::StftConfig& c) {
  return json{{"sample_rate", c.sample_rate},
              {"window_ms", c.window_ms},
              {"overlap", c.overlap},
              {"compression", c.compression}};
}

dsp::StftConfig stft_from_json(const json& j) {
  check_keys(j, {"sample_rate", "window_ms", "overlap", "compression"},
             "stft");
  dsp::StftConfig c;
  get_if(j, "sample_rate", c.sample_rate);
  get_if(j, "window_ms", c.window_ms);
  get_if(j, "overlap", c.overlap);
  get_if(j, "compression", c.compression);
  return c;
}

// ---- flow ----

json flow_to_json(const flow::FlowConfig& c) {
  return json{{"sigma_max", c.sigma_max},
              {"sigma_min", c.sigma_min},
              {"noise_color",
               c.noise_color == dsp::NoiseColor::pink ? "pink" : "white"},
              {"t_sampler", flow::to_string(c.t_sampler)},
              {"t_location", c.t_location},
              {"t_scale", c.t_scale},
              {"loss_mode", flow::to_string(c.loss_mode)}};
}

flow::FlowConfig flow_from_json(const json& j) {
  check_keys(j,
             {"sigma_max", "sigma_min", "noise_color", "t_sampler",
              "t_location", "t_scale", "loss_mode"},
             "flow");
  flow::FlowConfig c;
  get_if(j, "sigma_max", c.sigma_max);
  get_if(j, "sigma_min", c.sigma_min);
  if (j.contains("noise_color")) {
    const std::string s = j.at("noise_color").get<std::string>();
    require(s == "pink" || s == "white", "flow.noise_color must be pink|white");
    c.noise_color =
        s == "pink" ? dsp::NoiseColor::pink : dsp::NoiseColor::white;
  }
  if (j.contains("t_sampler"))
    c.t_sampler =
        flow::t_sampler_from_string(j.at("t_sampler").get<std::string>());
  get_if(j, "t_location", c.t_location);
  get_if(j, "t_scale", c.t_scale);
  if (j.contains("loss_mode"))
    c.loss_mode =
        flow::loss_mode_from_string(j.at("loss_mode").get<std::string>());
  return c;
}

// ---- model ----

json model_to_json(const model::ModelConfig& c) {
  return json{{"backbone", model::to_string(c.backbone)},
              {"channels", c.channels},
              {"enc_dilations", c.enc_dilations},
              {"enc_kernel_f", c.enc_kernel_f},
              {"enc_kernel_t", c.enc_kernel_t},
              {"dec_kernel_f", c.dec_kernel_f},
              {"dec_kernel_t", c.dec_kernel_t},
              {"tcn_layers", c.tcn_layers},
              {"tcn_kernel_t", c.tcn_kernel_t},
              {"tcn_dilations", c.tcn_dilations},
              {"freq_attention", c.freq_attention},
              {"embed_dim", c.embed_dim},
              {"mlp_hidden", c.mlp_hidden},
              {"init_seed", c.init_seed}};
}

model::ModelConfig model_from_json(const json& j) {
  check_keys(j,
             {"backbone", "channels", "enc_dilations", "enc_kernel_f",
              "enc_kernel_t", "dec_kernel_f", "dec_kernel_t", "tcn_layers",
              "tcn_kernel_t", "tcn_dilations", "freq_attention", "embed_dim",
              "mlp_hidden", "init_seed"},
             "model");
  model::ModelConfig c;
  if (j.contains("backbone"))
    c.backbone =
        model::backbone_from_string(j.at("backbone").get<std::string>());
  get_if(j, "channels", c.channels);
  get_if(j, "enc_dilations", c.enc_dilations);
  get_if(j, "enc_kernel_f", c.enc_kernel_f);
  get_if(j, "enc_kernel_t", c.enc_kernel_t);
  get_if(j, "dec_kernel_f", c.dec_kernel_f);
  get_if(j, "dec_kernel_t", c.dec_kernel_t);
  get_if(j, "tcn_layers", c.tcn_layers);
  get_if(j, "tcn_kernel_t", c.tcn_kernel_t);
  get_if(j, "tcn_dilations", c.tcn_dilations);
  get_if(j, "freq_attention", c.freq_attention);
  get_if(j, "embed_dim", c.embed_dim);
  get_if(j, "mlp_hidden", c.mlp_hidden);
  get_if(j, "init_seed", c.init_seed);
  return c;
}

// ---- train ----

json train_to_json(const train::TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"steps_per_epoch", c.steps_per_epoch},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"grad_clip", c.grad_clip},
              {"clip_seconds", c.clip_seconds},
              {"checkpoint_every_epochs", c.checkpoint_every_epochs}};
}

train::TrainConfig train_from_json(const json& j) {
  check_keys(j,
             {"epochs", "steps_per_epoch", "batch_size", "learning_rate",
              "beta1", "beta2", "adam_eps", "grad_clip", "clip_seconds",
              "checkpoint_every_epochs"},
             "train");
  train::TrainConfig c;
  get_if(j, "epochs", c.epochs);
  get_if(j, "steps_per_epoch", c.steps_per_epoch);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "learning_rate", c.learning_rate);
  get_if(j, "beta1", c.beta1);
  get_if(j, "beta2", c.beta2);
  get_if(j, "adam_eps", c.adam_eps);
  get_if(j, "grad_clip", c.grad_clip);
  get_if(j, "clip_seconds", c.clip_seconds);
  get_if(j, "checkpoint_every_epochs", c.checkpoint_every_epochs);
  return c;
}

// ---- sampler ----

json sampler_to_json(const sampler::SamplerConfig& c) {
  return json{{"nfe", c.nfe},
              {"mode", flow::to_string(c.mode)},
              {"t_floor", c.t_floor},
              {"condition_r_equals_t", c.condition_r_equals_t}};
}

sampler::SamplerConfig sampler_from_json(const json& j) {
  check_keys(j, {"nfe", "mode", "t_floor", "condition_r_equals_t"},
             "sampler");
  sampler::SamplerConfig c;
  get_if(j, "nfe", c.nfe);
  if (j.contains("mode"))
    c.mode = flow::loss_mode_from_string(j.at("mode").get<std::string>());
  get_if(j, "t_floor", c.t_floor);
  get_if(j, "condition_r_equals_t", c.condition_r_equals_t);
  return c;
}

// ---- degradation ----

json degradation_to_json(const datagen::DegradationSpec& c) {
  return json{{"reverb", c.reverb},
              {"rt60_s", range_to_json(c.rt60_s)},
              {"noise", c.noise},
              {"snr_mean_db", c.snr_mean_db},
              {"snr_std_db", c.snr_std_db},
              {"level", c.level},
              {"level_mean_dbfs", c.level_mean_dbfs},
              {"level_std_dbfs", c.level_std_dbfs},
              {"highpass", c.highpass},
              {"highpass_hz", range_to_json(c.highpass_hz)},
              {"lowpass", c.lowpass},
              {"lowpass_hz", range_to_json(c.lowpass_hz)},
              {"filter_kind", datagen::to_string(c.filter_kind)},
              {"notch", c.notch},
              {"notch_hz", range_to_json(c.notch_hz)},
              {"notch_q", range_to_json(c.notch_q)},
              {"nonlinear", c.nonlinear},
              {"nonlin_kind", datagen::to_string(c.nonlin_kind)},
              {"drive", range_to_json(c.drive)},
              {"clip_level", range_to_json(c.clip_level)},
              {"bubbles", c.bubbles},
              {"bubble_count", c.bubble_count},
              {"bubble_size", range_to_json(c.bubble_size)},
              {"bubble_depth", range_to_json(c.bubble_depth)},
              {"dropouts", c.dropouts},
              {"dropout_ms", range_to_json(c.dropout_ms)},
              {"dropout_count", c.dropout_count},
              {"modulation", c.modulation},
              {"am_rate_hz", range_to_json(c.am_rate_hz)},
              {"am_depth", range_to_json(c.am_depth)}};
}

datagen::DegradationSpec degradation_from_json(const json& j) {
  check_keys(j,
             {"reverb", "rt60_s", "noise", "snr_mean_db", "snr_std_db",
              "level", "level_mean_dbfs", "level_std_dbfs", "highpass",
              "highpass_hz", "lowpass", "lowpass_hz", "filter_kind", "notch",
              "notch_hz", "notch_q", "nonlinear", "nonlin_kind", "drive",
              "clip_level", "bubbles", "bubble_count", "bubble_size",
              "bubble_depth", "dropouts", "dropout_ms", "dropout_count",
              "modulation", "am_rate_hz", "am_depth"},
             "degradation");
  datagen::DegradationSpec c;
  get_if(j, "reverb", c.reverb);
  get_range(j, "rt60_s", c.rt60_s);
  get_if(j, "noise", c.noise);
  get_if(j, "snr_mean_db", c.snr_mean_db);
  get_if(j, "snr_std_db", c.snr_std_db);
  get_if(j, "level", c.level);
  get_if(j, "level_mean_dbfs", c.level_mean_dbfs);
  get_if(j, "level_std_dbfs", c.level_std_dbfs);
  get_if(j, "highpass", c.highpass);
  get_range(j, "highpass_hz", c.highpass_hz);
  get_if(j, "lowpass", c.lowpass);
  get_range(j, "lowpass_hz", c.lowpass_hz);
  if (j.contains("filter_kind"))
    c.filter_kind = datagen::filter_kind_from_string(
        j.at("filter_kind").get<std::string>());
  get_if(j, "notch", c.notch);
  get_range(j, "notch_hz", c.notch_hz);
  get_range(j, "notch_q", c.notch_q);
  get_if(j, "nonlinear", c.nonlinear);
  if (j.contains("nonlin_kind"))
    c.nonlin_kind = datagen::nonlin_kind_from_string(
        j.at("nonlin_kind").get<std::string>());
  get_range(j, "drive", c.drive);
  get_range(j, "clip_level", c.clip_level);
  get_if(j, "bubbles", c.bubbles);
  get_if(j, "bubble_count", c.bubble_count);
  get_range(j, "bubble_size", c.bubble_size);
  get_range(j, "bubble_depth", c.bubble_depth);
  get_if(j, "dropouts", c.dropouts);
  get_range(j, "dropout_ms", c.dropout_ms);
  get_if(j, "dropout_count", c.dropout_count);
  get_if(j, "modulation", c.modulation);
  get_range(j, "am_rate_hz", c.am_rate_hz);
  get_range(j, "am_depth", c.am_depth);
  return c;
}

json experiment_to_json(const ExperimentConfig& cfg) {
  return json{{"seed", cfg.seed},
              {"stft", stft_to_json(cfg.stft)},
              {"flow", flow_to_json(cfg.flow)},
              {"model", model_to_json(cfg.model)},
              {"train", train_to_json(cfg.train)},
              {"sampler", sampler_to_json(cfg.sampler)},
              {"degradation", degradation_to_json(cfg.degradation)}};
}

ExperimentConfig experiment_from_json(const json& j) {
  check_keys(j,
             {"seed", "stft", "flow", "model", "train", "sampler",
              "degradation"},
             "(root)");
  ExperimentConfig cfg;
  get_if(j, "seed", cfg.seed);
  if (j.contains("stft")) cfg.stft = stft_from_json(j.at("stft"));
  if (j.contains("flow")) cfg.flow = flow_from_json(j.at("flow"));
  if (j.contains("model")) cfg.model = model_from_json(j.at("model"));
  if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
  if (j.contains("sampler")) cfg.sampler = sampler_from_json(j.at("sampler"));
  if (j.contains("degradation"))
    cfg.degradation = degradation_from_json(j.at("degradation"));
  cfg.train.seed = cfg.seed;
  return cfg;
}

}  // namespace

void ExperimentConfig::validate() const {
  stft.validate();
  flow.validate();
  model.validate();
  train.validate();
  sampler.validate();
  degradation.validate(stft.sample_rate);
}

std::string to_json_text(const ExperimentConfig& cfg) {
  return experiment_to_json(cfg).dump(2) + "\n";
}

ExperimentConfig from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(format_msg("config parse error: ", e.what()));
  }
  return experiment_from_json(j);
}

ExperimentConfig load_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file: ", path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

void save_file(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  require(out.good(), "cannot write config file: ", path);
  out << to_json_text(cfg);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0,
          "override must look like section.key=value, got '", assignment,
          "'");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json j = experiment_to_json(cfg);
  json* node = &j;
  size_t start = 0;
  std::string last;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    require(!key.empty(), "bad override path '", path, "'");
    if (dot == std::string::npos) {
      last = key;
      break;
    }
    require(node->contains(key), "unknown config section '", key,
            "' in override '", assignment, "'");
    node = &node->at(key);
    start = dot + 1;
  }
  require(node->contains(last), "unknown config key '", path, "'");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const std::exception&) {
    parsed = value;  // plain string
  }
  (*node)[last] = parsed;
  cfg = experiment_from_json(j);
}

std::string checkpoint_meta_to_text(const model::ModelConfig& mcfg,
                                    const flow::FlowConfig& fcfg,
                                    const dsp::StftConfig& stft,
                                    uint64_t step, uint64_t seed) {
  const json j{{"model", model_to_json(mcfg)},
               {"flow", flow_to_json(fcfg)},
               {"stft", stft_to_json(stft)},
               {"step", step},
               {"seed", seed}};
  return j.dump();
}

void checkpoint_meta_from_text(const std::string& text,
                               model::ModelConfig* mcfg,
                               flow::FlowConfig* fcfg, dsp::StftConfig* stft,
                               uint64_t* step, uint64_t* seed) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(format_msg("checkpoint metadata parse error: ", e.what()));
  }
  check_keys(j, {"model", "flow", "stft", "step", "seed"}, "checkpoint");
  if (mcfg) *mcfg = model_from_json(j.at("model"));
  if (fcfg) *fcfg = flow_from_json(j.at("flow"));
  if (stft) *stft = stft_from_json(j.at("stft"));
  if (step) *step = j.at("step").get<uint64_t>();
  if (seed) *seed = j.at("seed").get<uint64_t>();
}

}  // namespace flowsr::config
