#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bridgepress/bridge.hpp"
#include "bridgepress/config.hpp"
#include "bridgepress/data.hpp"
#include "bridgepress/losses.hpp"
#include "bridgepress/models.hpp"

namespace bridgepress {

enum class Regime { cgan, bbdm, bbdm_ils, lbbdm };
std::string to_string(Regime r);
/// Accepts both "bbdm-ils" and "bbdm_ils".
Regime parse_regime(const std::string& text);

/// Everything that determines a training run.
struct TrainConfig {
  Regime regime = Regime::cgan;
  std::string data;  // dataset directory, recorded for later sampling
  std::uint64_t seed = 0;
  int epochs = 30;
  double lr = 1e-3;
  LossWeights weights;
  bool gamma_given = false;  // --gamma was set explicitly
  int steps = 1000;          // T
  double s_scale = 1.0;
  int sample_steps = 200;    // S at inference
  int eval_steps = 10;       // S for per-epoch validation of bridge regimes
  bool use_ils = true;       // cgan generator
  bool ae_ils = true;        // lbbdm: ILS inside the pretrained autoencoder
  bool denoiser_ils = false; // lbbdm: ILS at the denoiser bottleneck
  int ae_epochs = 20;
  std::string pretrained;    // lbbdm: checkpoint whose autoencoder is reused
  int max_train = 0;         // 0 = whole split
  int max_val = 0;
  std::string snapshot = "epoch100";

  void validate() const;
  ConfigMap to_config() const;
  /// Applies `config` over the defaults; unknown keys are rejected.
  static TrainConfig from_config(const ConfigMap& config);
};

/// Per-epoch snapshot; epoch 0 is measured before any update.
struct EpochMetrics {
  int epoch = 0;
  std::optional<double> train_loss;    // generator / bridge objective
  std::optional<double> train_loss_d;  // discriminator (cgan, pretraining)
  double val_mse_kpa2 = 0.0;
  double val_ssim = 0.0;
  double val_bm_mae_kg = 0.0;
};

std::string metrics_csv(const std::vector<EpochMetrics>& history, const std::string& run_id);

/// Fully determines a reproducible run; stored with every checkpoint.
struct RunManifest {
  TrainConfig config;
  DatasetManifest dataset;
  std::vector<EpochMetrics> history;
  std::vector<EpochMetrics> ae_history;  // lbbdm pretraining
  std::uint64_t param_checksum = 0;
  std::uint64_t ae_checksum = 0;

  /// Hash of the configuration and dataset identity.
  std::string run_id() const;
  std::string to_text() const;
  static RunManifest parse(const std::string& text);
};

/// The networks of one regime.
struct ModelBundle {
  std::optional<Generator> generator;          // cgan
  std::optional<Discriminator> discriminator;  // cgan
  std::optional<Denoiser> denoiser;            // bbdm, bbdm_ils, lbbdm
  std::optional<Generator> autoencoder;        // lbbdm
  std::optional<Discriminator> ae_discriminator;

  /// Parameters needed at inference (discriminators excluded).
  ParamSet inference_params() const;
};

GeneratorConfig cgan_generator_config(bool use_ils);
GeneratorConfig autoencoder_config(bool use_ils);
DenoiserConfig pixel_denoiser_config(bool use_ils);
DenoiserConfig latent_denoiser_config(bool use_ils);
ModelBundle build_models(const TrainConfig& config);

struct TrainResult {
  RunManifest manifest;
  ModelBundle models;
};

/// Network inputs for one sample.
struct PreparedSample {
  const Sample* source = nullptr;
  Tensor depth;            // [1, 54, 128]
  Tensor depth_condition;  // [1, 27, 64]
  PressureMap target;      // normalized
};

std::vector<PreparedSample> prepare(const std::vector<Sample>& samples,
                                    const NormalizationSpec& normalization, int limit = 0);

TrainResult train_cgan(const Dataset& dataset, const TrainConfig& config);
TrainResult train_bbdm(const Dataset& dataset, const TrainConfig& config, bool use_ils);

struct PretrainResult {
  Generator autoencoder;
  Discriminator discriminator;
  std::vector<EpochMetrics> history;
};

/// Self-reconstruction of both pressure maps and (downsampled) depth maps
/// with one shared skip-free autoencoder. The result is frozen.
PretrainResult pretrain_autoencoder(const Dataset& dataset, const TrainConfig& config);

/// Bridge training between depth and pressure latents of a frozen
/// autoencoder. Throws ContractError if any autoencoder parameter still
/// requires a gradient.
TrainResult train_lbbdm(const Dataset& dataset, Generator autoencoder, const TrainConfig& config,
                        std::vector<EpochMetrics> ae_history = {});

/// Dispatches on config.regime (lbbdm pretrains or loads `pretrained`).
TrainResult train(const Dataset& dataset, const TrainConfig& config);

struct Checkpoint {
  RunManifest manifest;
  ModelBundle models;
};

/// Writes <dir>/<snapshot>.bprs, manifest.txt, metrics.csv and config.cfg.
void save_checkpoint(const TrainResult& result, const std::filesystem::path& dir);
/// Rebuilds the networks from the manifest and loads their parameters
/// (frozen). Accepts the checkpoint directory or its parameter file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct Prediction {
  PressureMap pressure;  // kPa, clamped at zero
  double mass_kg = 0.0;
};

/// One generator pass (cgan) or an S-step bridge chain (other regimes).
Prediction infer(const Checkpoint& ckpt, const Grid& depth, const AnthroRecord& anthro,
                 int sample_steps, std::uint64_t seed);

/// Predictions for many samples; chain i uses a seed derived from (seed, i).
std::vector<Prediction> infer_all(const Checkpoint& ckpt, const std::vector<Sample>& samples,
                                  int sample_steps, std::uint64_t seed);

}  // namespace bridgepress
