#include "bridgepress/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "bridgepress/checkpoint.hpp"
#include "bridgepress/container.hpp"
#include "bridgepress/metrics.hpp"
#include "bridgepress/parallel.hpp"

namespace bridgepress {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Tensor grid_tensor(const Grid& g) {
  return Tensor::constant({1, g.rows(), g.cols()}, Eigen::Map<const Vector>(g.data(), g.size()));
}

Grid tensor_grid(const Tensor& t) {
  Grid g(t.dim(t.rank() - 2), t.dim(t.rank() - 1));
  Eigen::Map<Vector>(g.data(), g.size()) = t.values();
  return g;
}

Tensor array_tensor(const Shape& shape, const Eigen::ArrayXd& a) {
  return Tensor::constant(shape, a.matrix());
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
}

/// Normalized prediction -> kPa map clamped at zero.
PressureMap to_kpa(const Grid& normalized, const DatasetManifest& m) {
  PressureMap p;
  p.values = normalized;
  p.normalized = true;
  p.divisor_kpa = m.normalization.global_max_kpa;
  p.taxel_area_m2 = m.taxel_area_m2;
  p.gravity = m.gravity;
  PressureMap out = denormalize(p);
  out.values = out.values.max(0.0);
  return out;
}

using Predictor = std::function<Grid(const PreparedSample&, std::size_t index)>;

EpochMetrics validate(const std::vector<PreparedSample>& val, const DatasetManifest& m,
                      const Predictor& predict) {
  EpochMetrics e;
  if (val.empty()) return e;
  std::vector<Grid> preds(val.size());
  parallel_for(val.size(), [&](std::size_t i) { preds[i] = predict(val[i], i); });
  const double n = static_cast<double>(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) {
    const PressureMap pred = to_kpa(preds[i], m);
    const PressureMap& ref = val[i].source->pressure;
    e.val_mse_kpa2 += mse_kpa(pred, ref) / n;
    e.val_ssim += ssim(pred.values / m.normalization.global_max_kpa,
                       ref.values / m.normalization.global_max_kpa) / n;
    e.val_bm_mae_kg += std::abs(mass_from_pressure(ref) - mass_from_pressure(pred)) / n;
  }
  return e;
}

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::string epoch_text(const EpochMetrics& e) {
  return opt_text(e.train_loss) + ";" + opt_text(e.train_loss_d) + ";" +
         format_double(e.val_mse_kpa2) + ";" + format_double(e.val_ssim) + ";" +
         format_double(e.val_bm_mae_kg);
}

EpochMetrics parse_epoch(int epoch, const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ';')) parts.push_back(part);
  if (!text.empty() && text.back() == ';') parts.push_back("");
  if (parts.size() != 5) throw ManifestError("bad epoch snapshot '" + text + "'");
  EpochMetrics e;
  e.epoch = epoch;
  try {
    if (!parts[0].empty()) e.train_loss = config_double("train_loss", parts[0]);
    if (!parts[1].empty()) e.train_loss_d = config_double("train_loss_d", parts[1]);
    e.val_mse_kpa2 = config_double("val_mse", parts[2]);
    e.val_ssim = config_double("val_ssim", parts[3]);
    e.val_bm_mae_kg = config_double("val_bm_mae", parts[4]);
  } catch (const ConfigError& err) {
    throw ManifestError(err.what());
  }
  return e;
}

void require_global(const DatasetManifest& m) {
  m.normalization.validate();
  if (m.normalization.mode != NormalizationSpec::Mode::global) {
    throw ConfigError("training needs global normalization so predictions map back to kPa");
  }
  if (!m.anthro_scale.is_set()) throw ConfigError("dataset manifest lacks mass/height maxima");
}

// ---------------------------------------------------------------------------
// Bridge training shared by the pixel and latent regimes

struct BridgePair {
  Eigen::ArrayXd x0;
  Eigen::ArrayXd y;
  const PreparedSample* sample = nullptr;
};

struct BridgeSpace {
  Shape shape;  // [C, H, W] of x0 and y
  // Maps a sampled x0 to a normalized pressure grid.
  std::function<Grid(const Eigen::ArrayXd&)> to_pressure;
};

NoisePredictor denoiser_predictor(const Denoiser& den, const Shape& shape,
                                  const AnthroRecord& anthro, const AnthroScale& scale) {
  return [&den, shape, anthro, scale](const Eigen::ArrayXd& x_t, const Eigen::ArrayXd& y, int t) {
    const Tensor out = den.forward(array_tensor(shape, x_t), array_tensor(shape, y), t, anthro, scale);
    return Eigen::ArrayXd(out.values().array());
  };
}

std::vector<EpochMetrics> train_bridge(Denoiser& den, const std::vector<BridgePair>& train,
                                       const std::vector<BridgePair>& val,
                                       const BridgeSpace& space, const DatasetManifest& m,
                                       const TrainConfig& cfg) {
  const BridgeSchedule sched = make_schedule(cfg.steps, cfg.s_scale);
  ParamSet params = den.params();
  Adam opt({cfg.lr});
  Rng order_rng(mix_seed(cfg.seed, 10)), noise_rng(mix_seed(cfg.seed, 11));
  std::normal_distribution<double> normal(0.0, 1.0);
  const AnthroScale& scale = m.anthro_scale;

  std::vector<PreparedSample> val_samples;
  for (const BridgePair& p : val) val_samples.push_back(*p.sample);
  auto evaluate_epoch = [&](int epoch) {
    EpochMetrics e = validate(val_samples, m, [&](const PreparedSample&, std::size_t i) {
      const BridgePair& p = val[i];
      const SampleResult r =
          sample(p.y, denoiser_predictor(den, space.shape, p.sample->source->anthro, scale), sched,
                 cfg.eval_steps, mix_seed(cfg.seed, 1000 + i));
      return space.to_pressure(r.x0);
    });
    e.epoch = epoch;
    return e;
  };

  std::vector<EpochMetrics> history{evaluate_epoch(0)};
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      const BridgePair& p = train[idx];
      const int t = 1 + static_cast<int>(noise_rng() % static_cast<std::uint64_t>(cfg.steps));
      Eigen::ArrayXd eps(p.x0.size());
      for (Index k = 0; k < eps.size(); ++k) eps[k] = normal(noise_rng);
      const Eigen::ArrayXd x_t = forward_diffuse(p.x0, p.y, t, eps, sched);
      const Eigen::ArrayXd target = training_target(p.x0, p.y, t, eps, sched);
      params.zero_grad();
      const Tensor pred = den.forward(array_tensor(space.shape, x_t), array_tensor(space.shape, p.y),
                                      t, p.sample->source->anthro, scale);
      const Tensor loss = mean(square(pred - array_tensor(space.shape, target)));
      loss.backward();
      opt.step(params);
      total += loss.item();
    }
    EpochMetrics e = evaluate_epoch(epoch);
    e.train_loss = train.empty() ? 0.0 : total / static_cast<double>(train.size());
    history.push_back(e);
  }
  return history;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::string to_string(Regime r) {
  switch (r) {
    case Regime::cgan: return "cgan";
    case Regime::bbdm: return "bbdm";
    case Regime::bbdm_ils: return "bbdm-ils";
    case Regime::lbbdm: return "lbbdm";
  }
  return "unknown";
}

Regime parse_regime(const std::string& text) {
  if (text == "cgan") return Regime::cgan;
  if (text == "bbdm") return Regime::bbdm;
  if (text == "bbdm-ils" || text == "bbdm_ils") return Regime::bbdm_ils;
  if (text == "lbbdm") return Regime::lbbdm;
  throw ConfigError("unknown regime '" + text + "' (cgan, bbdm, bbdm-ils, lbbdm)");
}

void TrainConfig::validate() const {
  if (gamma_given && regime != Regime::cgan) {
    throw ConfigError("--gamma applies only to the cgan regime: WOL is not part of the bridge "
                      "objective");
  }
  if (epochs < 0 || ae_epochs < 0) throw ConfigError("epoch counts must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (steps < 1) throw ConfigError("T must be at least 1");
  if (s_scale < 0.0) throw ConfigError("s_scale must be non-negative");
  if (sample_steps < 1 || sample_steps > steps) throw ConfigError("sample_steps must lie in [1, T]");
  if (eval_steps < 1 || eval_steps > steps) throw ConfigError("eval_steps must lie in [1, T]");
  if (max_train < 0 || max_val < 0) throw ConfigError("sample limits must be non-negative");
  if (snapshot.empty() || snapshot.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("invalid snapshot name '" + snapshot + "'");
  }
  weights.validate();
}

ConfigMap TrainConfig::to_config() const {
  ConfigMap c{
      {"regime", to_string(regime)},
      {"data", data},
      {"seed", std::to_string(seed)},
      {"epochs", std::to_string(epochs)},
      {"lr", format_double(lr)},
      {"lambda", format_double(weights.lambda)},
      {"alpha", format_double(weights.alpha)},
      {"beta", format_double(weights.beta)},
      {"y_real", format_double(weights.y_real)},
      {"y_gen", format_double(weights.y_gen)},
      {"T", std::to_string(steps)},
      {"s_scale", format_double(s_scale)},
      {"sample_steps", std::to_string(sample_steps)},
      {"eval_steps", std::to_string(eval_steps)},
      {"use_ils", use_ils ? "true" : "false"},
      {"ae_ils", ae_ils ? "true" : "false"},
      {"denoiser_ils", denoiser_ils ? "true" : "false"},
      {"ae_epochs", std::to_string(ae_epochs)},
      {"pretrained", pretrained},
      {"max_train", std::to_string(max_train)},
      {"max_val", std::to_string(max_val)},
      {"snapshot", snapshot},
  };
  if (regime == Regime::cgan) c["gamma"] = format_double(weights.gamma);
  return c;
}

TrainConfig TrainConfig::from_config(const ConfigMap& config) {
  reject_unknown(config,
                 {"regime", "data", "seed", "epochs", "lr", "lambda", "alpha", "beta", "gamma",
                  "y_real", "y_gen", "T", "s_scale", "sample_steps", "eval_steps", "use_ils",
                  "ae_ils", "denoiser_ils", "ae_epochs", "pretrained", "max_train", "max_val",
                  "snapshot"},
                 "train config");
  TrainConfig c;
  for (const auto& [k, v] : config) {
    if (k == "regime") c.regime = parse_regime(v);
    else if (k == "data") c.data = v;
    else if (k == "seed") c.seed = config_uint(k, v);
    else if (k == "epochs") c.epochs = static_cast<int>(config_int(k, v));
    else if (k == "lr") c.lr = config_double(k, v);
    else if (k == "lambda") c.weights.lambda = config_double(k, v);
    else if (k == "alpha") c.weights.alpha = config_double(k, v);
    else if (k == "beta") c.weights.beta = config_double(k, v);
    else if (k == "gamma") {
      c.weights.gamma = config_double(k, v);
      c.gamma_given = true;
    } else if (k == "y_real") c.weights.y_real = config_double(k, v);
    else if (k == "y_gen") c.weights.y_gen = config_double(k, v);
    else if (k == "T") c.steps = static_cast<int>(config_int(k, v));
    else if (k == "s_scale") c.s_scale = config_double(k, v);
    else if (k == "sample_steps") c.sample_steps = static_cast<int>(config_int(k, v));
    else if (k == "eval_steps") c.eval_steps = static_cast<int>(config_int(k, v));
    else if (k == "use_ils") c.use_ils = config_bool(k, v);
    else if (k == "ae_ils") c.ae_ils = config_bool(k, v);
    else if (k == "denoiser_ils") c.denoiser_ils = config_bool(k, v);
    else if (k == "ae_epochs") c.ae_epochs = static_cast<int>(config_int(k, v));
    else if (k == "pretrained") c.pretrained = v;
    else if (k == "max_train") c.max_train = static_cast<int>(config_int(k, v));
    else if (k == "max_val") c.max_val = static_cast<int>(config_int(k, v));
    else if (k == "snapshot") c.snapshot = v;
  }
  c.validate();
  return c;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history, const std::string& run_id) {
  std::string out = "# run_id=" + run_id + "\n";
  out += "epoch,train_loss,train_loss_d,val_mse_kpa2,val_ssim,val_bm_mae_kg\n";
  for (const EpochMetrics& e : history) {
    out += std::to_string(e.epoch) + "," + opt_text(e.train_loss) + "," + opt_text(e.train_loss_d) +
           "," + format_double(e.val_mse_kpa2) + "," + format_double(e.val_ssim) + "," +
           format_double(e.val_bm_mae_kg) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run manifest

std::string RunManifest::run_id() const {
  return hex(fnv1a(format_config(config.to_config()) + dataset.to_text()));
}

std::string RunManifest::to_text() const {
  std::ostringstream out;
  out << "run_id=" << run_id() << "\n";
  for (const auto& [k, v] : config.to_config()) out << "config." << k << "=" << v << "\n";
  std::stringstream ds(dataset.to_text());
  std::string line;
  while (std::getline(ds, line)) out << "dataset." << line << "\n";
  for (const EpochMetrics& e : history) out << "epoch." << e.epoch << "=" << epoch_text(e) << "\n";
  for (const EpochMetrics& e : ae_history) {
    out << "ae_epoch." << e.epoch << "=" << epoch_text(e) << "\n";
  }
  out << "param_checksum=" << hex(param_checksum) << "\n";
  out << "ae_checksum=" << hex(ae_checksum) << "\n";
  return out.str();
}

RunManifest RunManifest::parse(const std::string& text) {
  RunManifest m;
  ConfigMap config;
  std::string dataset_text, run_id;
  std::stringstream ss(text);
  std::string line;
  auto parse_hex = [](const std::string& v) {
    try {
      return static_cast<std::uint64_t>(std::stoull(v, nullptr, 16));
    } catch (const std::exception&) {
      throw ManifestError("bad checksum '" + v + "'");
    }
  };
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ManifestError("run manifest line without '=': " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    auto starts = [&](const char* p) { return key.rfind(p, 0) == 0; };
    if (key == "run_id") run_id = value;
    else if (starts("config.")) config[key.substr(7)] = value;
    else if (starts("dataset.")) dataset_text += key.substr(8) + "=" + value + "\n";
    else if (starts("epoch.")) {
      m.history.push_back(parse_epoch(static_cast<int>(config_int(key, key.substr(6))), value));
    } else if (starts("ae_epoch.")) {
      m.ae_history.push_back(parse_epoch(static_cast<int>(config_int(key, key.substr(9))), value));
    } else if (key == "param_checksum") m.param_checksum = parse_hex(value);
    else if (key == "ae_checksum") m.ae_checksum = parse_hex(value);
    else throw ManifestError("unknown run manifest key '" + key + "'");
  }
  m.config = TrainConfig::from_config(config);
  m.dataset = DatasetManifest::parse(dataset_text);
  auto by_epoch = [](const EpochMetrics& a, const EpochMetrics& b) { return a.epoch < b.epoch; };
  std::sort(m.history.begin(), m.history.end(), by_epoch);
  std::sort(m.ae_history.begin(), m.ae_history.end(), by_epoch);
  if (run_id != m.run_id()) throw ManifestError("run manifest id does not match its contents");
  return m;
}

// ---------------------------------------------------------------------------
// Models

ParamSet ModelBundle::inference_params() const {
  ParamSet set;
  if (generator) set.merge(generator->params("gen"));
  if (denoiser) set.merge(denoiser->params("den"));
  if (autoencoder) set.merge(autoencoder->params("ae"));
  return set;
}

GeneratorConfig cgan_generator_config(bool use_ils) {
  GeneratorConfig c;
  c.use_ils = use_ils;
  return c;
}

GeneratorConfig autoencoder_config(bool use_ils) {
  GeneratorConfig c;
  c.input_rows = c.output_rows = kPressureRows;
  c.input_cols = c.output_cols = kPressureCols;
  c.skips.clear();
  c.neck_channels = 8;
  c.use_ils = use_ils;
  return c;
}

DenoiserConfig pixel_denoiser_config(bool use_ils) {
  DenoiserConfig c;
  c.use_ils = use_ils;
  return c;
}

DenoiserConfig latent_denoiser_config(bool use_ils) {
  DenoiserConfig c;
  c.channels = autoencoder_config(false).neck_channels;
  c.base_channels = 16;
  c.mid_channels = 16;
  c.use_ils = use_ils;
  return c;
}

ModelBundle build_models(const TrainConfig& config) {
  ModelBundle b;
  switch (config.regime) {
    case Regime::cgan:
      b.generator.emplace(cgan_generator_config(config.use_ils), mix_seed(config.seed, 1));
      b.discriminator.emplace(DiscriminatorConfig{2, 8}, mix_seed(config.seed, 2));
      break;
    case Regime::bbdm:
    case Regime::bbdm_ils:
      b.denoiser.emplace(pixel_denoiser_config(config.regime == Regime::bbdm_ils),
                         mix_seed(config.seed, 3));
      break;
    case Regime::lbbdm:
      b.autoencoder.emplace(autoencoder_config(config.ae_ils), mix_seed(config.seed, 4));
      b.ae_discriminator.emplace(DiscriminatorConfig{1, 8}, mix_seed(config.seed, 5));
      b.denoiser.emplace(latent_denoiser_config(config.denoiser_ils), mix_seed(config.seed, 6));
      break;
  }
  return b;
}

std::vector<PreparedSample> prepare(const std::vector<Sample>& samples,
                                    const NormalizationSpec& normalization, int limit) {
  const std::size_t n = limit > 0 ? std::min<std::size_t>(samples.size(), limit) : samples.size();
  std::vector<PreparedSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = samples[i];
    PreparedSample& p = out[i];
    p.source = &s;
    p.depth = grid_tensor(s.depth);
    p.depth_condition = grid_tensor(resize_area(s.depth, s.pressure.rows(), s.pressure.cols()));
    p.target = normalize(s.pressure, normalization);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regime A: conditional GAN

TrainResult train_cgan(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  if (config.regime != Regime::cgan) throw ConfigError("train_cgan needs the cgan regime");
  const DatasetManifest& m = dataset.manifest;
  require_global(m);
  TrainResult result;
  result.manifest.config = config;
  result.manifest.dataset = m;
  result.models = build_models(config);
  Generator& gen = *result.models.generator;
  Discriminator& disc = *result.models.discriminator;
  ParamSet pg = gen.params(), pd = disc.params();
  Adam opt_g({config.lr}), opt_d({config.lr});
  const LossWeights& w = config.weights;
  const AnthroScale& scale = m.anthro_scale;

  const auto train = prepare(dataset.train, m.normalization, config.max_train);
  const auto val = prepare(dataset.val, m.normalization, config.max_val);
  auto evaluate_epoch = [&](int epoch) {
    EpochMetrics e = validate(val, m, [&](const PreparedSample& s, std::size_t) {
      return tensor_grid(gen.forward(s.depth, s.source->anthro, scale));
    });
    e.epoch = epoch;
    return e;
  };

  auto& history = result.manifest.history;
  history.push_back(evaluate_epoch(0));
  Rng order_rng(mix_seed(config.seed, 10));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, order_rng);
    double total_g = 0.0, total_d = 0.0;
    for (std::size_t idx : order) {
      const PreparedSample& s = train[idx];
      const Tensor target = pressure_tensor(s.target);
      const Tensor p_hat = gen.forward(s.depth, s.source->anthro, scale);

      pg.zero_grad();
      pd.zero_grad();
      const Tensor loss_d = discriminator_loss(disc.forward(s.depth_condition, target),
                                               disc.forward(s.depth_condition, p_hat.detach()), w);
      loss_d.backward();
      opt_d.step(pd);

      pg.zero_grad();
      pd.zero_grad();
      const GeneratorLoss loss_g = generator_loss(disc.forward(s.depth_condition, p_hat), p_hat,
                                                  target, w, s.target.divisor_kpa);
      loss_g.total.backward();
      opt_g.step(pg);
      total_d += loss_d.item();
      total_g += loss_g.total.item();
    }
    EpochMetrics e = evaluate_epoch(epoch);
    const double n = std::max<double>(1.0, static_cast<double>(train.size()));
    e.train_loss = total_g / n;
    e.train_loss_d = total_d / n;
    history.push_back(e);
  }
  result.manifest.param_checksum = result.models.inference_params().checksum();
  return result;
}

// ---------------------------------------------------------------------------
// Regime B: pixel-space bridge

TrainResult train_bbdm(const Dataset& dataset, const TrainConfig& config, bool use_ils) {
  config.validate();
  if (config.regime != (use_ils ? Regime::bbdm_ils : Regime::bbdm)) {
    throw ConfigError("train_bbdm: regime does not match the ILS flag");
  }
  const DatasetManifest& m = dataset.manifest;
  require_global(m);
  TrainResult result;
  result.manifest.config = config;
  result.manifest.dataset = m;
  result.models = build_models(config);

  const auto train = prepare(dataset.train, m.normalization, config.max_train);
  const auto val = prepare(dataset.val, m.normalization, config.max_val);
  auto pairs = [](const std::vector<PreparedSample>& samples) {
    std::vector<BridgePair> out;
    for (const PreparedSample& s : samples) {
      out.push_back({Eigen::Map<const Eigen::ArrayXd>(s.target.values.data(), s.target.values.size()),
                     s.depth_condition.values().array(), &s});
    }
    return out;
  };
  BridgeSpace space;
  space.shape = {1, kPressureRows, kPressureCols};
  space.to_pressure = [](const Eigen::ArrayXd& x0) {
    Grid g(kPressureRows, kPressureCols);
    Eigen::Map<Eigen::ArrayXd>(g.data(), g.size()) = x0;
    return g;
  };
  result.manifest.history =
      train_bridge(*result.models.denoiser, pairs(train), pairs(val), space, m, config);
  result.manifest.param_checksum = result.models.inference_params().checksum();
  return result;
}

// ---------------------------------------------------------------------------
// Regime C: latent bridge on a frozen autoencoder

PretrainResult pretrain_autoencoder(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  const DatasetManifest& m = dataset.manifest;
  require_global(m);
  const GeneratorConfig ae_config = autoencoder_config(config.ae_ils);
  if (!ae_config.skips.empty()) {
    throw ConfigError("the pretrained autoencoder must not use skip connections");
  }
  PretrainResult r{Generator(ae_config, mix_seed(config.seed, 4)),
                   Discriminator(DiscriminatorConfig{1, 8}, mix_seed(config.seed, 5)),
                   {}};
  ParamSet pg = r.autoencoder.params(), pd = r.discriminator.params();
  Adam opt_g({config.lr}), opt_d({config.lr});
  const LossWeights& w = config.weights;
  const AnthroScale& scale = m.anthro_scale;

  const auto train = prepare(dataset.train, m.normalization, config.max_train);
  const auto val = prepare(dataset.val, m.normalization, config.max_val);
  auto evaluate_epoch = [&](int epoch) {
    EpochMetrics e = validate(val, m, [&](const PreparedSample& s, std::size_t) {
      return tensor_grid(r.autoencoder.forward(pressure_tensor(s.target), s.source->anthro, scale));
    });
    e.epoch = epoch;
    return e;
  };

  r.history.push_back(evaluate_epoch(0));
  Rng order_rng(mix_seed(config.seed, 20));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 1; epoch <= config.ae_epochs; ++epoch) {
    shuffle(order, order_rng);
    double total_g = 0.0, total_d = 0.0;
    for (std::size_t idx : order) {
      const PreparedSample& s = train[idx];
      for (const Tensor& x : {pressure_tensor(s.target), s.depth_condition}) {
        pg.zero_grad();
        pd.zero_grad();
        auto [loss_d, loss_g] =
            loss_unconditional_pair(x, s.source->anthro, r.autoencoder, r.discriminator, w, scale);
        loss_d.backward();
        opt_d.step(pd);
        total_d += loss_d.item();

        // The generator objective is rebuilt against the updated critic.
        pg.zero_grad();
        pd.zero_grad();
        const Tensor x_hat = r.autoencoder.forward(x, s.source->anthro, scale);
        const GeneratorLoss g = generator_loss(r.discriminator.forward(x_hat), x_hat, x, w,
                                               std::nullopt);
        g.total.backward();
        opt_g.step(pg);
        total_g += g.total.item();
      }
    }
    EpochMetrics e = evaluate_epoch(epoch);
    const double n = std::max<double>(1.0, 2.0 * static_cast<double>(train.size()));
    e.train_loss = total_g / n;
    e.train_loss_d = total_d / n;
    r.history.push_back(e);
  }
  pg.freeze();
  return r;
}

TrainResult train_lbbdm(const Dataset& dataset, Generator autoencoder, const TrainConfig& config,
                        std::vector<EpochMetrics> ae_history) {
  config.validate();
  if (config.regime != Regime::lbbdm) throw ConfigError("train_lbbdm needs the lbbdm regime");
  ParamSet ae_params = autoencoder.params("ae");
  if (!ae_params.frozen()) {
    throw ContractError("latent bridge training needs a frozen autoencoder");
  }
  if (autoencoder.config().input_rows != kPressureRows ||
      autoencoder.config().neck_channels != latent_denoiser_config(false).channels) {
    throw ContractError("autoencoder latent does not match the latent denoiser");
  }
  const DatasetManifest& m = dataset.manifest;
  require_global(m);
  const std::uint64_t ae_checksum = ae_params.checksum();

  TrainResult result;
  result.manifest.config = config;
  result.manifest.dataset = m;
  result.manifest.ae_history = std::move(ae_history);
  result.models = build_models(config);
  result.models.autoencoder.emplace(std::move(autoencoder));
  result.models.ae_discriminator.reset();
  const Generator& ae = *result.models.autoencoder;
  const AnthroScale& scale = m.anthro_scale;

  const auto train = prepare(dataset.train, m.normalization, config.max_train);
  const auto val = prepare(dataset.val, m.normalization, config.max_val);
  Shape latent_shape;
  auto pairs = [&](const std::vector<PreparedSample>& samples) {
    std::vector<BridgePair> out(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
      const PreparedSample& s = samples[i];
      const Tensor zp = ae.encode(pressure_tensor(s.target), s.source->anthro, scale).latent;
      const Tensor zd = ae.encode(s.depth_condition, s.source->anthro, scale).latent;
      out[i] = {zp.values().array(), zd.values().array(), &s};
    });
    return out;
  };
  latent_shape = ae.encode(val.empty() ? train.front().depth_condition : val.front().depth_condition,
                           (val.empty() ? train.front() : val.front()).source->anthro, scale)
                     .latent.shape();
  BridgeSpace space;
  space.shape = latent_shape;
  space.to_pressure = [&ae, latent_shape](const Eigen::ArrayXd& z) {
    return tensor_grid(ae.decode_latent(array_tensor(latent_shape, z)));
  };
  result.manifest.history =
      train_bridge(*result.models.denoiser, pairs(train), pairs(val), space, m, config);

  if (result.models.autoencoder->params("ae").checksum() != ae_checksum) {
    throw VerificationError("frozen autoencoder changed during latent bridge training");
  }
  result.manifest.ae_checksum = ae_checksum;
  result.manifest.param_checksum = result.models.inference_params().checksum();
  return result;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  switch (config.regime) {
    case Regime::cgan: return train_cgan(dataset, config);
    case Regime::bbdm: return train_bbdm(dataset, config, false);
    case Regime::bbdm_ils: return train_bbdm(dataset, config, true);
    case Regime::lbbdm: {
      if (!config.pretrained.empty()) {
        Checkpoint pre = load_checkpoint(config.pretrained);
        if (!pre.models.autoencoder) {
          throw ConfigError(config.pretrained + " holds no pretrained autoencoder");
        }
        if (pre.manifest.config.ae_ils != config.ae_ils) {
          throw ConfigError("--pretrained autoencoder disagrees with ae_ils");
        }
        return train_lbbdm(dataset, std::move(*pre.models.autoencoder), config,
                           pre.manifest.ae_history);
      }
      PretrainResult pre = pretrain_autoencoder(dataset, config);
      return train_lbbdm(dataset, std::move(pre.autoencoder), config, std::move(pre.history));
    }
  }
  throw ConfigError("unknown regime");
}

// ---------------------------------------------------------------------------
// Checkpoints and inference

void save_checkpoint(const TrainResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  const RunManifest& m = result.manifest;
  write_params(dir / (m.config.snapshot + ".bprs"), result.models.inference_params());
  write_file_atomic(dir / "config.cfg", format_config(m.config.to_config()));
  write_file_atomic(dir / "metrics.csv", metrics_csv(m.history, m.run_id()));
  write_file_atomic(dir / "manifest.txt", m.to_text());
}

Checkpoint load_checkpoint(const fs::path& path) {
  const fs::path dir = fs::is_directory(path) ? path : path.parent_path();
  if (!fs::exists(dir / "manifest.txt")) {
    throw ManifestError("no checkpoint manifest in " + dir.string());
  }
  Checkpoint ckpt;
  ckpt.manifest = RunManifest::parse(read_file(dir / "manifest.txt"));
  ckpt.models = build_models(ckpt.manifest.config);
  ckpt.models.discriminator.reset();
  ckpt.models.ae_discriminator.reset();
  ParamSet params = ckpt.models.inference_params();
  const fs::path file =
      fs::is_directory(path) ? dir / (ckpt.manifest.config.snapshot + ".bprs") : path;
  read_params(file, params);
  params.freeze();
  if (params.checksum() != ckpt.manifest.param_checksum) {
    throw FormatError(file.string() + ": parameter checksum does not match the manifest");
  }
  return ckpt;
}

Prediction infer(const Checkpoint& ckpt, const Grid& depth, const AnthroRecord& anthro,
                 int sample_steps, std::uint64_t seed) {
  const RunManifest& rm = ckpt.manifest;
  const DatasetManifest& m = rm.dataset;
  const AnthroScale& scale = m.anthro_scale;
  if (sample_steps < 1) throw ConfigError("sampling needs at least one step");
  const Tensor condition = grid_tensor(resize_area(depth, kPressureRows, kPressureCols));
  Grid normalized;
  switch (rm.config.regime) {
    case Regime::cgan: {
      if (!ckpt.models.generator) throw ContractError("cgan checkpoint without a generator");
      normalized = tensor_grid(ckpt.models.generator->forward(grid_tensor(depth), anthro, scale));
      break;
    }
    case Regime::bbdm:
    case Regime::bbdm_ils: {
      if (!ckpt.models.denoiser) throw ContractError("bridge checkpoint without a denoiser");
      const BridgeSchedule sched = make_schedule(rm.config.steps, rm.config.s_scale);
      const Shape shape{1, kPressureRows, kPressureCols};
      const SampleResult r =
          sample(condition.values().array(), denoiser_predictor(*ckpt.models.denoiser, shape, anthro, scale),
                 sched, sample_steps, seed);
      normalized = Grid(kPressureRows, kPressureCols);
      Eigen::Map<Eigen::ArrayXd>(normalized.data(), normalized.size()) = r.x0;
      break;
    }
    case Regime::lbbdm: {
      if (!ckpt.models.denoiser || !ckpt.models.autoencoder) {
        throw ContractError("lbbdm checkpoint needs an autoencoder and a denoiser");
      }
      const Generator& ae = *ckpt.models.autoencoder;
      const BridgeSchedule sched = make_schedule(rm.config.steps, rm.config.s_scale);
      const Tensor zy = ae.encode(condition, anthro, scale).latent;
      const SampleResult r =
          sample(zy.values().array(),
                 denoiser_predictor(*ckpt.models.denoiser, zy.shape(), anthro, scale), sched,
                 sample_steps, seed);
      normalized = tensor_grid(ae.decode_latent(array_tensor(zy.shape(), r.x0)));
      break;
    }
  }
  Prediction p;
  p.pressure = to_kpa(normalized, m);
  p.mass_kg = mass_from_pressure(p.pressure);
  return p;
}

std::vector<Prediction> infer_all(const Checkpoint& ckpt, const std::vector<Sample>& samples,
                                  int sample_steps, std::uint64_t seed) {
  std::vector<Prediction> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    out[i] = infer(ckpt, samples[i].depth, samples[i].anthro, sample_steps, mix_seed(seed, i));
  });
  return out;
}

}  // namespace bridgepress
