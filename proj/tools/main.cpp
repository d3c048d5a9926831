// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
//
// flowsr: train, restore, degrade, eval and bench for few-step
// flow-matching speech restoration. Exit codes: 0 ok, 1 runtime failure,
// 2 usage/config failure.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "flowsr/checkpoint.hpp"
#include "flowsr/common.hpp"
#include "flowsr/config.hpp"
#include "flowsr/datagen.hpp"
#include "flowsr/kernels.hpp"
#include "flowsr/sampler.hpp"
#include "flowsr/training.hpp"
#include "flowsr/wav.hpp"

namespace fs = std::filesystem;
using namespace flowsr;

namespace {

struct CommonOpts {
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
};

config::ExperimentConfig load_config(const std::string& path,
                                     const CommonOpts& opts) {
  auto cfg = config::load_file(path);
  for (const auto& o : opts.overrides) config::apply_override(cfg, o);
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.train.seed = *opts.seed;
  }
  cfg.validate();
  return cfg;
}

std::vector<int> parse_nfe_list(const std::string& s) {
  std::vector<int> out;
  size_t start = 0;
  while (start < s.size()) {
    const size_t comma = s.find(',', start);
    const std::string tok = s.substr(start, comma - start);
    require(!tok.empty(), "bad NFE list entry in '", s, "'");
    out.push_back(std::stoi(tok));
    require(out.back() >= 1, "NFE values must be >= 1, got ", out.back());
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  require(!out.empty(), "empty NFE list");
  return out;
}

int cmd_train(const std::string& cfg_path, const std::string& out_dir,
              const std::string& resume, const CommonOpts& opts) {
  config::ExperimentConfig cfg;
  model::Checkpoint resume_ck;
  bool resuming = false;
  try {
    cfg = load_config(cfg_path, opts);
    if (!resume.empty()) {
      resume_ck = model::load_checkpoint(resume);
      resuming = true;
    }
    fs::create_directories(out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    config::save_file((fs::path(out_dir) / "config.json").string(), cfg);

    auto net = resuming ? model::Model(resume_ck.model_cfg, resume_ck.params)
                        : model::Model(cfg.model, cfg.seed);
    if (resuming) {
      cfg.flow = resume_ck.flow_cfg;
      cfg.stft = resume_ck.stft_cfg;
      cfg.seed = resume_ck.seed;
      cfg.train.seed = resume_ck.seed;
    }

    auto provider = train::synthetic_batch_provider(
        cfg.degradation, cfg.train.clip_seconds, cfg.stft, cfg.seed);
    train::Trainer trainer(net, cfg.train, cfg.flow, cfg.stft, provider);
    if (resuming) {
      trainer.set_start_step(static_cast<int>(resume_ck.step));
      if (resume_ck.has_optimizer)
        trainer.restore_optimizer(resume_ck.opt_step, resume_ck.adam_m,
                                  resume_ck.adam_v);
    }

    const std::string metrics = (fs::path(out_dir) / "metrics.csv").string();
    const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
    auto rows = trainer.run(metrics, ckpt);
    if (!rows.empty())
      std::printf("trained %zu steps, final loss %.6g\n", rows.size(),
                  rows.back().loss);
    std::printf("checkpoint: %s\nmetrics: %s\n", ckpt.c_str(),
                metrics.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int cmd_restore(const std::string& ckpt_path, const std::string& in_wav,
                const std::string& out_wav, int nfe, bool stream, bool verify,
                const CommonOpts& opts) {
  model::Checkpoint ck;
  dsp::WavData wav;
  try {
    ck = model::load_checkpoint(ckpt_path);
    wav = dsp::read_wav(in_wav);
    require(wav.sample_rate == ck.stft_cfg.sample_rate,
            "input WAV is at ", wav.sample_rate,
            " Hz but the checkpoint expects ", ck.stft_cfg.sample_rate,
            " Hz; resample the file or pick a matching checkpoint");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    model::Model net(ck.model_cfg, ck.params);
    sampler::SamplerConfig scfg;
    scfg.nfe = nfe;
    scfg.mode = ck.flow_cfg.loss_mode;
    const uint64_t seed = opts.seed.value_or(ck.seed);

    sampler::RestoreResult result;
    if (stream) {
      Rng rng(seed);
      result = sampler::restore_streaming(wav.samples, wav.sample_rate, net,
                                          ck.stft_cfg, ck.flow_cfg, scfg, rng);
      if (verify) {
        Rng rng2(seed);
        auto offline = sampler::restore(wav.samples, wav.sample_rate, net,
                                        ck.stft_cfg, ck.flow_cfg, scfg, rng2);
        double worst = 0.0;
        for (size_t i = 0; i < result.samples.size(); ++i)
          worst = std::max(worst,
                           std::abs(result.samples[i] - offline.samples[i]));
        std::printf("stream/offline max deviation: %.3e\n", worst);
        require(worst < 1e-4,
                "streaming output deviates from offline by ", worst);
      }
    } else {
      Rng rng(seed);
      result = sampler::restore(wav.samples, wav.sample_rate, net,
                                ck.stft_cfg, ck.flow_cfg, scfg, rng);
    }
    dsp::write_wav(out_wav, result.samples, wav.sample_rate);
    std::printf("restored %zu samples with %d model evaluations -> %s\n",
                result.samples.size(), result.evals, out_wav.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int cmd_degrade(const std::string& cfg_path, int n,
                const std::string& out_dir, const CommonOpts& opts) {
  config::ExperimentConfig cfg;
  try {
    cfg = load_config(cfg_path, opts);
    require(n > 0, "--n must be positive");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  try {
    auto res = datagen::emit_dataset(out_dir, n, cfg.degradation,
                                     cfg.train.clip_seconds,
                                     cfg.stft.sample_rate, cfg.seed);
    std::printf("wrote %d pairs, manifest: %s\n", res.count,
                res.manifest_path.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int cmd_eval(const std::string& ckpt_path, const std::string& set_dir,
             const std::string& nfe_list_str, const std::string& out_csv,
             const CommonOpts& opts) {
  model::Checkpoint ck;
  std::vector<sampler::EvalClip> clips;
  std::vector<int> nfe_list;
  try {
    ck = model::load_checkpoint(ckpt_path);
    nfe_list = parse_nfe_list(nfe_list_str);

    const fs::path manifest = fs::path(set_dir) / "manifest.csv";
    std::ifstream in(manifest);
    require(in.good(), "cannot open dataset manifest: ", manifest.string());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      // id,seed,stages,"parameters",clean,degraded
      const auto last_comma = line.rfind(',');
      const auto prev_comma = line.rfind(',', last_comma - 1);
      require(last_comma != std::string::npos &&
                  prev_comma != std::string::npos,
              "malformed manifest row: ", line);
      const std::string clean_name =
          line.substr(prev_comma + 1, last_comma - prev_comma - 1);
      const std::string degraded_name = line.substr(last_comma + 1);
      sampler::EvalClip clip;
      auto cw = dsp::read_wav((fs::path(set_dir) / clean_name).string());
      auto dw = dsp::read_wav((fs::path(set_dir) / degraded_name).string());
      require(cw.sample_rate == ck.stft_cfg.sample_rate,
              "dataset rate ", cw.sample_rate,
              " does not match the checkpoint rate ",
              ck.stft_cfg.sample_rate);
      clip.clean = std::move(cw.samples);
      clip.degraded = std::move(dw.samples);
      clips.push_back(std::move(clip));
    }
    require(!clips.empty(), "dataset at ", set_dir, " has no clips");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    model::Model net(ck.model_cfg, ck.params);
    sampler::SamplerConfig scfg;
    scfg.mode = ck.flow_cfg.loss_mode;
    const uint64_t seed = opts.seed.value_or(ck.seed);
    auto rows = sampler::nfe_sweep(clips, ck.stft_cfg.sample_rate, net,
                                   ck.stft_cfg, ck.flow_cfg, scfg, nfe_list,
                                   seed);
    std::ofstream out(out_csv);
    require(out.good(), "cannot write sweep CSV: ", out_csv);
    out << sampler::sweep_csv_header() << "\n";
    for (const auto& row : rows) out << sampler::sweep_csv_line(row) << "\n";
    std::printf("%s\n", sampler::sweep_csv_header().c_str());
    for (const auto& row : rows)
      std::printf("%s\n", sampler::sweep_csv_line(row).c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int cmd_bench(const std::string& cfg_path, const CommonOpts& opts) {
  config::ExperimentConfig cfg;
  try {
    cfg = load_config(cfg_path, opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  try {
    const auto rep = model::count_params_macs(cfg.model, cfg.stft);
    std::printf("backbone           : %s\n",
                model::to_string(cfg.model.backbone).c_str());
    std::printf("params             : %lld (%.3f M)\n",
                static_cast<long long>(rep.params), rep.params / 1e6);
    std::printf("trainable params   : %lld\n",
                static_cast<long long>(rep.trainable_params));
    std::printf("macs per frame     : %.0f\n", rep.macs_per_frame);
    std::printf("macs per second    : %.4g G (NFE=1)\n",
                rep.macs_per_second / 1e9);
    std::printf("algorithmic latency: %.6g ms\n", rep.latency_ms);
    std::printf("receptive field    : %d frames\n",
                rep.receptive_field_frames);
    std::printf("context            : %.6g s\n", rep.context_seconds);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-step flow-matching speech restoration"};
  app.require_subcommand(1);

  int threads = 0;
  std::string kernel_backend = "openmp";
  app.add_option("--threads", threads, "OpenMP thread count (0 = default)");
  app.add_option("--kernels", kernel_backend,
                 "kernel backend: openmp | serial");

  CommonOpts train_opts, restore_opts, degrade_opts, eval_opts, bench_opts;

  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::string train_cfg, train_out, train_resume;
  train_cmd->add_option("--config", train_cfg, "experiment config JSON")
      ->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--resume", train_resume,
                        "checkpoint to continue from");
  train_cmd->add_option("--set", train_opts.overrides,
                        "config override key=value");
  train_cmd->add_option("--seed", train_opts.seed, "master seed override");

  auto* restore_cmd =
      app.add_subcommand("restore", "restore a degraded recording");
  std::string restore_ckpt, restore_in, restore_out;
  int restore_nfe = 4;
  bool restore_stream = false, restore_verify = false;
  restore_cmd->add_option("--ckpt", restore_ckpt, "trained checkpoint")
      ->required();
  restore_cmd->add_option("--in", restore_in, "input WAV")->required();
  restore_cmd->add_option("--out", restore_out, "output WAV")->required();
  restore_cmd->add_option("--nfe", restore_nfe, "model evaluations");
  restore_cmd->add_flag("--stream", restore_stream,
                        "frame-by-frame streaming path");
  restore_cmd->add_flag("--verify", restore_verify,
                        "check streaming equals offline");
  restore_cmd->add_option("--seed", restore_opts.seed, "prior noise seed");

  auto* degrade_cmd =
      app.add_subcommand("degrade", "emit a paired synthetic dataset");
  std::string degrade_cfg, degrade_out;
  int degrade_n = 10;
  degrade_cmd->add_option("--config", degrade_cfg, "experiment config JSON")
      ->required();
  degrade_cmd->add_option("--n", degrade_n, "number of pairs")->required();
  degrade_cmd->add_option("--out", degrade_out, "dataset directory")
      ->required();
  degrade_cmd->add_option("--set", degrade_opts.overrides,
                          "config override key=value");
  degrade_cmd->add_option("--seed", degrade_opts.seed, "master seed override");

  auto* eval_cmd = app.add_subcommand("eval", "NFE sweep over a dataset");
  std::string eval_ckpt, eval_set, eval_nfe = "1,2,4,8", eval_out;
  eval_cmd->add_option("--ckpt", eval_ckpt, "trained checkpoint")->required();
  eval_cmd->add_option("--set", eval_set, "dataset directory (from degrade)")
      ->required();
  eval_cmd->add_option("--nfe-list", eval_nfe, "comma-separated NFE values");
  eval_cmd->add_option("--out", eval_out, "sweep CSV path")->required();
  eval_cmd->add_option("--seed", eval_opts.seed, "sweep seed override");

  auto* bench_cmd =
      app.add_subcommand("bench", "parameter/MAC/latency accounting");
  std::string bench_cfg;
  bench_cmd->add_option("--config", bench_cfg, "experiment config JSON")
      ->required();
  bench_cmd->add_option("--set", bench_opts.overrides,
                        "config override key=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif
  try {
    if (kernel_backend == "serial")
      kernels::set_backend(kernels::Backend::serial);
    else if (kernel_backend == "openmp")
      kernels::set_backend(kernels::Backend::openmp);
    else
      throw Error(format_msg("unknown kernel backend '", kernel_backend,
                             "' (expected openmp | serial)"));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  if (train_cmd->parsed())
    return cmd_train(train_cfg, train_out, train_resume, train_opts);
  if (restore_cmd->parsed())
    return cmd_restore(restore_ckpt, restore_in, restore_out, restore_nfe,
                       restore_stream, restore_verify, restore_opts);
  if (degrade_cmd->parsed())
    return cmd_degrade(degrade_cfg, degrade_n, degrade_out, degrade_opts);
  if (eval_cmd->parsed())
    return cmd_eval(eval_ckpt, eval_set, eval_nfe, eval_out, eval_opts);
  if (bench_cmd->parsed()) return cmd_bench(bench_cfg, bench_opts);
  return 2;
}
