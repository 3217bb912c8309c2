// bridgepress command-line interface.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bridgepress/config.hpp"
#include "bridgepress/container.hpp"
#include "bridgepress/data.hpp"
#include "bridgepress/gradcheck_suite.hpp"
#include "bridgepress/metrics.hpp"
#include "bridgepress/pipeline.hpp"

namespace fs = std::filesystem;
using namespace bridgepress;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// FNV-1a over relative paths and contents of every regular file, in path order.
std::uint64_t tree_checksum(const fs::path& dir, const std::vector<std::string>& skip) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const fs::path& f : files) {
    if (std::find(skip.begin(), skip.end(), f.generic_string()) != skip.end()) continue;
    mix(f.generic_string());
    mix(read_file(dir / f));
  }
  return h;
}

bool non_empty_dir(const fs::path& dir) {
  return fs::exists(dir) && (!fs::is_directory(dir) || !fs::is_empty(dir));
}

// ---------------------------------------------------------------------------
// gen-data / ingest

struct GenDataArgs {
  std::string spec, out;
  std::uint64_t seed = 0;
  std::optional<int> subjects, samples_per_subject;
  bool force = false;
};

int cmd_gen_data(const GenDataArgs& a) {
  ConfigMap spec_config = a.spec.empty() ? ConfigMap{} : read_config(a.spec);
  if (a.subjects) spec_config["subjects"] = std::to_string(*a.subjects);
  if (a.samples_per_subject) {
    spec_config["samples_per_subject"] = std::to_string(*a.samples_per_subject);
  }
  const ToySpec spec = toy_spec_from(spec_config);
  const fs::path out(a.out);
  if (non_empty_dir(out)) {
    if (!a.force) throw ConfigError(out.string() + " is not empty (use --force to overwrite)");
    for (const char* entry : {"train", "val", "test", "manifest.txt", "gen-data.cfg"}) {
      fs::remove_all(out / entry);
    }
  }
  ConfigMap resolved = to_config(spec);
  resolved["seed"] = std::to_string(a.seed);
  write_file_atomic(out / "gen-data.cfg", format_config(resolved));

  const Dataset ds = generate_toy_dataset(spec, a.seed);
  write_dataset(ds, out);
  std::cout << "subjects train/val/test: " << ds.manifest.train.size() << "/"
            << ds.manifest.val.size() << "/" << ds.manifest.test.size() << "\n";
  std::cout << "samples: " << ds.size() << "\n";
  std::cout << "global_max_kpa: " << format_double(ds.manifest.normalization.global_max_kpa) << "\n";
  std::cout << "checksum: " << hex64(tree_checksum(out, {})) << "\n";
  return 0;
}

struct IngestArgs {
  std::string src, out, exclude, normalization = "global";
  std::uint64_t seed = 0;
  bool force = false;
};

int cmd_ingest(const IngestArgs& a) {
  IngestOptions o;
  o.seed = a.seed;
  o.normalization = parse_normalization_mode(a.normalization);
  std::stringstream ss(a.exclude);
  for (std::string id; std::getline(ss, id, ',');) {
    if (!id.empty()) o.excluded.push_back(id);
  }
  const fs::path out(a.out);
  if (non_empty_dir(out) && !a.force) {
    throw ConfigError(out.string() + " is not empty (use --force to overwrite)");
  }
  write_file_atomic(out / "ingest.cfg",
                    format_config({{"src", a.src},
                                   {"seed", std::to_string(a.seed)},
                                   {"exclude", a.exclude},
                                   {"normalization", a.normalization}}));
  const Dataset ds = ingest_slp_like(a.src, o, std::cout);
  write_dataset(ds, out);
  std::cout << "samples: " << ds.size() << "\n";
  std::cout << "global_max_kpa: " << format_double(ds.manifest.normalization.global_max_kpa) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const std::string& config_file, const std::map<std::string, std::string>& flags,
              const std::string& out) {
  ConfigMap config = config_file.empty() ? ConfigMap{} : read_config(config_file);
  for (const auto& [k, v] : flags) config[k] = v;
  const TrainConfig cfg = TrainConfig::from_config(config);
  if (cfg.data.empty()) throw ConfigError("train needs --data");
  if (!fs::exists(fs::path(cfg.data) / "manifest.txt")) {
    throw ManifestError("no dataset manifest in " + cfg.data);
  }
  const fs::path dir(out);
  write_file_atomic(dir / "config.cfg", format_config(cfg.to_config()));

  const Dataset ds = load_dataset(cfg.data);
  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = train(ds, cfg);
  save_checkpoint(result, dir);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const EpochMetrics& e : result.manifest.history) {
    std::printf("epoch %3d  val_mse_kpa2 %.6g  val_ssim %.4f  val_bm_mae_kg %.4f\n", e.epoch,
                e.val_mse_kpa2, e.val_ssim, e.val_bm_mae_kg);
  }
  std::printf("run %s trained in %.1f s -> %s\n", result.manifest.run_id().c_str(), seconds,
              dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// sample / eval

struct SampleArgs {
  std::string ckpt, out, data, split = "test";
  std::optional<int> steps;
  std::uint64_t seed = 0;
  int limit = 0;
};

std::vector<Sample> select_samples(const Dataset& ds, const std::string& split, int limit) {
  std::vector<Sample> samples = ds.split(split);
  if (limit > 0 && samples.size() > static_cast<std::size_t>(limit)) samples.resize(limit);
  if (samples.empty()) throw ManifestError("split '" + split + "' holds no samples");
  return samples;
}

void write_predictions(const Checkpoint& ckpt, const std::vector<Sample>& samples,
                       const std::vector<Prediction>& preds, int steps, std::uint64_t seed,
                       const fs::path& out) {
  const std::string run_id = ckpt.manifest.run_id();
  std::string diag = "id,cover,mass_pred_kg,mass_ref_kg\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const Prediction& p = preds[i];
    ArrayRecord r;
    r.shape = {p.pressure.rows(), p.pressure.cols()};
    r.role = "pressure";
    r.units = "kPa";
    r.name = s.id();
    r.values = Eigen::Map<const Eigen::VectorXd>(p.pressure.values.data(), p.pressure.values.size());
    r.extra["taxel_area_m2"] = format_double(p.pressure.taxel_area_m2);
    r.extra["gravity"] = format_double(p.pressure.gravity);
    r.extra["preprocessed"] = "true";
    r.extra["run_id"] = run_id;
    r.extra["steps"] = std::to_string(steps);
    r.extra["seed"] = std::to_string(seed);
    write_container(out / s.subject / (to_string(s.posture) + "_" + to_string(s.cover) +
                                       ".pressure.bprs"),
                    r);
    diag += s.id() + "," + to_string(s.cover) + "," + format_double(p.mass_kg) + "," +
            format_double(s.anthro.mass_kg) + "\n";
  }
  write_file_atomic(out / "diagnostics.csv", diag);
}

int cmd_sample(const SampleArgs& a) {
  if (a.steps && *a.steps < 1) throw ConfigError("--steps must be at least 1");
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const int steps = a.steps.value_or(ckpt.manifest.config.sample_steps);
  if (steps > ckpt.manifest.config.steps) throw ConfigError("--steps exceeds the trained T");
  const std::string data = a.data.empty() ? ckpt.manifest.config.data : a.data;
  const fs::path out(a.out);
  write_file_atomic(out / "sample.cfg", format_config({{"ckpt", a.ckpt},
                                                       {"steps", std::to_string(steps)},
                                                       {"seed", std::to_string(a.seed)},
                                                       {"data", data},
                                                       {"split", a.split},
                                                       {"limit", std::to_string(a.limit)}}));
  const Dataset ds = load_dataset(data);
  const std::vector<Sample> samples = select_samples(ds, a.split, a.limit);
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Prediction> preds = infer_all(ckpt, samples, steps, a.seed);
  write_predictions(ckpt, samples, preds, steps, a.seed, out);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("sampled %zu maps with %d steps in %.1f s -> %s\n", samples.size(), steps, seconds,
              out.string().c_str());
  return 0;
}

struct RefEntry {
  PressureMap pressure;
  std::optional<double> measured_mass;
};

PressureMap read_pressure(const fs::path& path) {
  const ArrayRecord r = read_container(path);
  if (r.role != "pressure" || r.shape.size() != 2) {
    throw ManifestError(path.string() + " is not a pressure map");
  }
  PressureMap p;
  p.values = Grid(r.shape[0], r.shape[1]);
  Eigen::Map<Eigen::VectorXd>(p.values.data(), p.values.size()) = r.values;
  const auto area = r.extra.find("taxel_area_m2");
  if (area == r.extra.end()) throw ManifestError(path.string() + " lacks taxel_area_m2");
  p.taxel_area_m2 = config_double("taxel_area_m2", area->second);
  const auto g = r.extra.find("gravity");
  if (g != r.extra.end()) p.gravity = config_double("gravity", g->second);
  return p;
}

/// subject/stem -> file, for every *.pressure.bprs one level below `dir`.
std::map<std::string, fs::path> pressure_files(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& subject : fs::directory_iterator(dir)) {
    if (!subject.is_directory()) continue;
    for (const auto& f : fs::directory_iterator(subject.path())) {
      const std::string name = f.path().filename().string();
      const std::string suffix = ".pressure.bprs";
      if (name.size() > suffix.size() &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
        out[subject.path().filename().string() + "/" +
            name.substr(0, name.size() - suffix.size())] = f.path();
      }
    }
  }
  return out;
}

struct EvalInput {
  std::vector<EvalPair> pairs;
  double global_max_kpa = 0.0;
};

EvalInput collect_pairs(const fs::path& pred_dir, const fs::path& ref_dir) {
  const auto preds = pressure_files(pred_dir);
  if (preds.empty()) throw ManifestError("no predicted pressure maps under " + pred_dir.string());
  std::map<std::string, fs::path> refs;
  EvalInput in;
  if (fs::exists(ref_dir / "manifest.txt")) {
    const DatasetManifest m = DatasetManifest::parse(read_file(ref_dir / "manifest.txt"));
    in.global_max_kpa = m.normalization.global_max_kpa;
    for (const char* split : {"train", "val", "test"}) {
      for (auto& [id, path] : pressure_files(ref_dir / split)) refs[id] = path;
    }
  } else {
    refs = pressure_files(ref_dir);
  }
  for (const auto& [id, path] : preds) {
    const auto it = refs.find(id);
    if (it == refs.end()) throw ManifestError("prediction " + id + " has no reference");
    EvalPair pair;
    pair.id = id;
    const std::string stem = id.substr(id.find('/') + 1);
    pair.cover = parse_cover(stem.substr(stem.find('_') + 1));
    pair.pred = read_pressure(path);
    pair.ref = read_pressure(it->second);
    fs::path anthro = it->second;
    anthro.replace_filename(stem + ".anthro.bprs");
    if (fs::exists(anthro)) pair.measured_mass_kg = read_container(anthro).values[0];
    in.pairs.push_back(std::move(pair));
  }
  if (!(in.global_max_kpa > 0.0)) {
    for (const EvalPair& p : in.pairs) {
      in.global_max_kpa = std::max(in.global_max_kpa, p.ref.values.maxCoeff());
    }
  }
  return in;
}

MetricReport evaluate_dirs(const fs::path& pred, const fs::path& ref) {
  const EvalInput in = collect_pairs(pred, ref);
  return evaluate(in.pairs, in.global_max_kpa);
}

void print_summary(const MetricSummary& s) {
  std::printf("%-10s n=%-4zu ssim %.4f  psnr %.2f dB  mppa %.4f  mse %.5g kPa^2  iou %.4f  "
              "bm_mae %.3f kg\n",
              s.label.c_str(), s.count, s.ssim, s.psnr, s.mppa, s.mse_kpa, s.iou, s.bm_mae_gt);
}

int cmd_eval(const std::string& pred, const std::string& ref, const std::string& report) {
  fs::path cfg_path = report;
  cfg_path += ".cfg";
  write_file_atomic(cfg_path, format_config({{"pred", pred}, {"ref", ref}, {"report", report}}));
  const MetricReport r = evaluate_dirs(pred, ref);
  write_file_atomic(report, r.to_csv());
  for (const MetricSummary& s : r.summaries) print_summary(s);
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

int cmd_gradcheck(const std::string& module, const std::string& fault, double tolerance) {
  if (fault == "softmax-sign") {
    testing::inject_fault(testing::Fault::softmax_backward_sign);
  } else if (!fault.empty() && fault != "none") {
    throw ConfigError("unknown fault '" + fault + "'");
  }
  const auto start = std::chrono::steady_clock::now();
  const std::vector<GradcheckCase> results = run_gradcheck_suite(module, tolerance);
  int failed = 0;
  for (const GradcheckCase& c : results) {
    std::printf("%-4s %-10s %-26s rel_err %.3e  coords %ld\n", c.passed ? "ok" : "FAIL",
                c.module.c_str(), c.name.c_str(), c.report.max_relative_error,
                static_cast<long>(c.report.coordinates_checked));
    failed += c.passed ? 0 : 1;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%zu checks, %d failed, %.1f s\n", results.size(), failed, seconds);
  if (failed) throw VerificationError(std::to_string(failed) + " gradient checks failed");
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string recipe, out, ckpt, data, split = "test", values, seeds;
  std::uint64_t seed = 0;
  std::optional<int> limit, epochs;
};

std::string summary_row(const MetricSummary& s) {
  return std::to_string(s.count) + "," + format_double(s.ssim) + "," + format_double(s.psnr) +
         "," + format_double(s.mppa) + "," + format_double(s.mse_kpa) + "," + format_double(s.iou) +
         "," + format_double(s.bm_mae_gt) + "," +
         (s.bm_mae_measured ? format_double(*s.bm_mae_measured) : "") + "," +
         (s.frechet ? format_double(*s.frechet) : "");
}

int cmd_sweep(const SweepArgs& a) {
  ConfigMap recipe = read_config(a.recipe);
  reject_unknown(recipe, {"kind", "values", "seeds", "epochs", "lr", "limit", "split", "max_train",
                          "max_val"},
                 "recipe");
  if (!a.values.empty()) recipe["values"] = a.values;
  if (!a.seeds.empty()) recipe["seeds"] = a.seeds;
  if (a.limit) recipe["limit"] = std::to_string(*a.limit);
  if (a.epochs) recipe["epochs"] = std::to_string(*a.epochs);
  if (!recipe.count("split")) recipe["split"] = a.split;
  const std::string kind = recipe.count("kind") ? recipe.at("kind") : "";
  const int limit = recipe.count("limit") ? static_cast<int>(config_int("limit", recipe["limit"])) : 0;
  const fs::path out(a.out);
  ConfigMap resolved = recipe;
  resolved["seed"] = std::to_string(a.seed);
  resolved["ckpt"] = a.ckpt;
  resolved["data"] = a.data;
  write_file_atomic(out / "sweep.cfg", format_config(resolved));
  const std::string header =
      "count,ssim,psnr_db,mppa,mse_kpa2,posture_iou,bm_mae_gt_kg,bm_mae_measured_kg,mfid\n";

  if (kind == "steps") {
    if (a.ckpt.empty()) throw ConfigError("a steps sweep needs --ckpt");
    const std::vector<int> values = config_ints("values", recipe.at("values"));
    if (values.empty()) throw ConfigError("recipe lists no step counts");
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    const std::string data = a.data.empty() ? ckpt.manifest.config.data : a.data;
    const Dataset ds = load_dataset(data);
    const std::vector<Sample> samples = select_samples(ds, recipe.at("split"), limit);
    for (int s : values) {
      if (s < 1 || s > ckpt.manifest.config.steps) {
        throw ConfigError("step count " + std::to_string(s) + " outside [1, T]");
      }
    }
    std::string table = "steps," + header;
    for (int steps : values) {
      const fs::path dir = out / ("S" + std::to_string(steps));
      const auto start = std::chrono::steady_clock::now();
      write_predictions(ckpt, samples, infer_all(ckpt, samples, steps, a.seed), steps, a.seed, dir);
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const MetricReport report = evaluate_dirs(dir, data);
      write_file_atomic(dir / "report.csv", report.to_csv());
      table += std::to_string(steps) + "," + summary_row(report.summaries.front()) + "\n";
      std::printf("S=%-5d %.1f s  ", steps, seconds);
      print_summary(report.summaries.front());
    }
    write_file_atomic(out / "comparison.csv", table);
    return 0;
  }
  if (kind == "gamma") {
    if (a.data.empty()) throw ConfigError("a gamma sweep needs --data");
    const std::vector<double> values = config_doubles("values", recipe.at("values"));
    const std::vector<int> seeds =
        recipe.count("seeds") ? config_ints("seeds", recipe.at("seeds")) : std::vector<int>{0};
    if (values.empty() || seeds.empty()) throw ConfigError("recipe lists no values or seeds");
    const Dataset ds = load_dataset(a.data);
    const std::vector<Sample> samples = select_samples(ds, recipe.at("split"), limit);
    std::string table = "gamma,seeds,mean_bm_mae_gt_kg,mean_mse_kpa2,mean_ssim\n";
    for (double gamma : values) {
      double bm = 0.0, mse = 0.0, ss = 0.0;
      for (int seed : seeds) {
        ConfigMap c{{"regime", "cgan"},
                    {"data", a.data},
                    {"seed", std::to_string(seed)},
                    {"gamma", format_double(gamma)}};
        for (const char* key : {"epochs", "lr", "max_train", "max_val"}) {
          if (recipe.count(key)) c[key] = recipe.at(key);
        }
        const TrainConfig cfg = TrainConfig::from_config(c);
        const TrainResult result = train(ds, cfg);
        const fs::path dir =
            out / ("gamma_" + format_double(gamma)) / ("seed_" + std::to_string(seed));
        save_checkpoint(result, dir);
        const Checkpoint ckpt = load_checkpoint(dir);
        write_predictions(ckpt, samples, infer_all(ckpt, samples, 1, a.seed), 1, a.seed,
                          dir / "samples");
        const MetricReport report = evaluate_dirs(dir / "samples", a.data);
        write_file_atomic(dir / "report.csv", report.to_csv());
        bm += report.summaries.front().bm_mae_gt / static_cast<double>(seeds.size());
        mse += report.summaries.front().mse_kpa / static_cast<double>(seeds.size());
        ss += report.summaries.front().ssim / static_cast<double>(seeds.size());
      }
      table += format_double(gamma) + "," + std::to_string(seeds.size()) + "," +
               format_double(bm) + "," + format_double(mse) + "," + format_double(ss) + "\n";
      std::printf("gamma=%-8g mean bm_mae %.3f kg  mse %.5g kPa^2  ssim %.4f\n", gamma, bm, mse, ss);
    }
    write_file_atomic(out / "comparison.csv", table);
    return 0;
  }
  throw ConfigError("recipe kind must be 'steps' or 'gamma'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-to-pressure estimation toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic toy dataset");
  gen_cmd->add_option("--spec", gen.spec, "Toy spec file (key=value)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed");
  gen_cmd->add_option("--subjects", gen.subjects, "Override the subject count");
  gen_cmd->add_option("--samples-per-subject", gen.samples_per_subject,
                      "Override samples per subject");
  gen_cmd->add_flag("--force", gen.force, "Overwrite a non-empty output directory");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Preprocess <subject>/<pose>_<cover> containers");
  ingest_cmd->add_option("--src", ingest.src, "Source directory")->required();
  ingest_cmd->add_option("--out", ingest.out, "Output dataset directory")->required();
  ingest_cmd->add_option("--seed", ingest.seed, "Split seed");
  ingest_cmd->add_option("--exclude", ingest.exclude, "Comma-separated subject ids to skip");
  ingest_cmd->add_option("--normalization", ingest.normalization, "global or individual");
  ingest_cmd->add_flag("--force", ingest.force, "Write into a non-empty output directory");

  std::string train_config, train_out;
  std::map<std::string, std::string> train_values;
  auto* train_cmd = app.add_subcommand("train", "Train one regime and write a checkpoint");
  train_cmd->add_option("--config", train_config, "Config file (key=value); flags override it");
  train_cmd->add_option("--out", train_out, "Checkpoint directory")->required();
  const std::vector<std::pair<std::string, std::string>> train_flags{
      {"--regime", "regime"},         {"--data", "data"},
      {"--seed", "seed"},             {"--epochs", "epochs"},
      {"--lr", "lr"},                 {"--gamma", "gamma"},
      {"--lambda", "lambda"},         {"--alpha", "alpha"},
      {"--beta", "beta"},             {"--T", "T"},
      {"--s-scale", "s_scale"},       {"--sample-steps", "sample_steps"},
      {"--eval-steps", "eval_steps"}, {"--use-ils", "use_ils"},
      {"--ae-ils", "ae_ils"},         {"--denoiser-ils", "denoiser_ils"},
      {"--ae-epochs", "ae_epochs"},   {"--pretrained", "pretrained"},
      {"--max-train", "max_train"},   {"--max-val", "max_val"},
      {"--snapshot", "snapshot"},
  };
  for (const auto& [flag, key] : train_flags) {
    train_cmd->add_option(flag, train_values[key], "Overrides '" + key + "'");
  }

  SampleArgs sample_args;
  auto* sample_cmd = app.add_subcommand("sample", "Predict pressure maps from a checkpoint");
  sample_cmd->add_option("--ckpt", sample_args.ckpt, "Checkpoint directory")->required();
  sample_cmd->add_option("--steps", sample_args.steps, "Sampling steps S (bridge regimes)");
  sample_cmd->add_option("--seed", sample_args.seed, "Sampling seed");
  sample_cmd->add_option("--out", sample_args.out, "Output directory")->required();
  sample_cmd->add_option("--data", sample_args.data, "Dataset (defaults to the training data)");
  sample_cmd->add_option("--split", sample_args.split, "train, val or test");
  sample_cmd->add_option("--limit", sample_args.limit, "Use only the first N samples");

  std::string pred_dir, ref_dir, report_path;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against references");
  eval_cmd->add_option("--pred", pred_dir, "Prediction directory")->required();
  eval_cmd->add_option("--ref", ref_dir, "Reference dataset or directory")->required();
  eval_cmd->add_option("--report", report_path, "Output CSV")->required();

  std::string module, fault;
  double tolerance = 1e-4;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  grad_cmd->add_option("--module", module, "tensorcore, ils, losses or models");
  grad_cmd->add_option("--tolerance", tolerance, "Maximum relative error");
  grad_cmd->add_option("--inject-fault", fault)->group("");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an ablation recipe");
  sweep_cmd->add_option("--recipe", sweep.recipe, "Recipe file")->required();
  sweep_cmd->add_option("--out", sweep.out, "Output directory")->required();
  sweep_cmd->add_option("--ckpt", sweep.ckpt, "Checkpoint (steps sweeps)");
  sweep_cmd->add_option("--data", sweep.data, "Dataset directory");
  sweep_cmd->add_option("--seed", sweep.seed, "Sampling seed");
  sweep_cmd->add_option("--split", sweep.split, "Evaluation split");
  sweep_cmd->add_option("--limit", sweep.limit, "Use only the first N samples");
  sweep_cmd->add_option("--values", sweep.values, "Override the recipe values");
  sweep_cmd->add_option("--seeds", sweep.seeds, "Override the recipe training seeds");
  sweep_cmd->add_option("--epochs", sweep.epochs, "Override the recipe epoch count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*ingest_cmd) return cmd_ingest(ingest);
    if (*train_cmd) {
      std::map<std::string, std::string> given;
      for (const auto& [flag, key] : train_flags) {
        if (train_cmd->count(flag)) given[key] = train_values[key];
      }
      return cmd_train(train_config, given, train_out);
    }
    if (*sample_cmd) return cmd_sample(sample_args);
    if (*eval_cmd) return cmd_eval(pred_dir, ref_dir, report_path);
    if (*grad_cmd) return cmd_gradcheck(module, fault, tolerance);
    if (*sweep_cmd) return cmd_sweep(sweep);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
