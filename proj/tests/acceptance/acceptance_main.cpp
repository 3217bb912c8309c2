// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "bridgepress/bridge.hpp"
#include "bridgepress/container.hpp"
#include "bridgepress/gradcheck_suite.hpp"
#include "bridgepress/losses.hpp"
#include "bridgepress/metrics.hpp"
#include "bridgepress/pipeline.hpp"

#ifndef BRIDGEPRESS_CLI
#error "BRIDGEPRESS_CLI must name the command-line binary"
#endif

using namespace bridgepress;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

Eigen::ArrayXd uniform_array(Eigen::Index n, std::mt19937_64& rng, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::ArrayXd a(n);
  for (Eigen::Index i = 0; i < n; ++i) a[i] = u(rng);
  return a;
}

Grid uniform_grid(Index rows, Index cols, std::mt19937_64& rng, double lo, double hi) {
  Grid g(rows, cols);
  std::uniform_real_distribution<double> u(lo, hi);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = u(rng);
  return g;
}

Tensor uniform_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  const Index n = shape_size(shape);
  Vector v(n);
  std::uniform_real_distribution<double> u(lo, hi);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return Tensor::constant(std::move(shape), v);
}

int run(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string shell_arg(const fs::path& p) { return "'" + p.string() + "'"; }

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "bridgepress_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

// ---------------------------------------------------------------------------

Outcome gradient_verification() {
  const auto start = Clock::now();
  const std::vector<GradcheckCase> cases = run_gradcheck_suite("", 1e-4);
  const double elapsed = seconds_since(start);
  int failed = 0;
  double worst = 0.0;
  std::string names;
  for (const GradcheckCase& c : cases) {
    worst = std::max(worst, c.report.max_relative_error);
    if (!c.passed) {
      ++failed;
      names += " " + c.module + "/" + c.name;
    }
  }
  return {failed == 0 && elapsed < 60.0 && !cases.empty(),
          fmt("%zu checks, %d failed, worst rel err %.2e, %.1f s", cases.size(), failed, worst,
              elapsed) + names};
}

Outcome endpoint_pinning() {
  const auto start = Clock::now();
  const BridgeSchedule s = make_schedule(1000, 1.0);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::ArrayXd x0 = uniform_array(64, rng), y = uniform_array(64, rng);
    Eigen::ArrayXd eps(64);
    for (Index i = 0; i < 64; ++i) eps[i] = normal(rng);
    worst = std::max(worst, (forward_diffuse(x0, y, 0, eps, s) - x0).abs().maxCoeff());
    worst = std::max(worst, (forward_diffuse(x0, y, 1000, eps, s) - y).abs().maxCoeff());
  }
  // Monte-Carlo marginal at t = T/2 against (x0 + y)/2 and delta = s/2.
  Eigen::ArrayXd x0(1), y(1);
  x0 << 0.4;
  y << -0.6;
  const int n = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::ArrayXd eps(1);
    eps << normal(rng);
    const double v = forward_diffuse(x0, y, 500, eps, s)[0];
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n, var = sum_sq / n - mean * mean;
  const double expect_mean = 0.5 * (x0[0] + y[0]), expect_var = 0.5;
  const double sigma = std::sqrt(expect_var / n);
  const bool mean_ok = std::abs(mean - expect_mean) <= 3.0 * sigma;
  const bool var_ok = std::abs(var - expect_var) <= 0.05 * expect_var;
  const double elapsed = seconds_since(start);
  return {worst <= 1e-12 && mean_ok && var_ok && elapsed < 30.0,
          fmt("endpoint max |d| %.1e; mean %.5f vs %.5f (3 sigma %.5f); var %.5f vs %.3f; %.2f s",
              worst, mean, expect_mean, 3.0 * sigma, var, expect_var, elapsed)};
}

Outcome oracle_sampler() {
  const BridgeSchedule s = make_schedule(1000, 0.0);
  std::mt19937_64 rng(12);
  const Eigen::ArrayXd x0 = uniform_array(27 * 64, rng), y = uniform_array(27 * 64, rng);
  const NoisePredictor oracle = [&](const Eigen::ArrayXd&, const Eigen::ArrayXd& yy, int t) {
    return Eigen::ArrayXd(s.m[static_cast<std::size_t>(t)] * (yy - x0));
  };
  double worst = 0.0, spread = 0.0;
  Eigen::ArrayXd first;
  for (int S : {1, 10, 200}) {
    const Eigen::ArrayXd out = sample(y, oracle, s, S, 5).x0;
    worst = std::max(worst, (out - x0).abs().maxCoeff());
    if (first.size() == 0) first = out;
    spread = std::max(spread, (out - first).abs().maxCoeff());
  }
  return {worst <= 1e-10 && spread <= 1e-10,
          fmt("max |x0_hat - x0| %.1e, max difference across S %.1e", worst, spread)};
}

Outcome wol_algebra() {
  std::mt19937_64 rng(13);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const Grid a = uniform_grid(27, 64, rng, 0.0, 1.0), b = uniform_grid(27, 64, rng, 0.0, 1.0);
    if (wol(a, b) > wol_l1(a, b)) ++violations;
  }
  Grid p(1, 2), q(1, 2);
  p << 1, 2;
  q << 2, 1;
  const bool witness = wol(p, q) == 0.0 && wol_l1(p, q) > 0.0;

  // Slope of the generator objective in gamma against lambda * E[L_WOL].
  const Generator g(cgan_generator_config(true), 3);
  const Discriminator d(DiscriminatorConfig{2, 8}, 4);
  const AnthroScale scale{110.0, 1.95};
  std::vector<ConditionalExample> batch;
  for (int i = 0; i < 4; ++i) {
    ConditionalExample ex;
    ex.depth = uniform_tensor({1, 54, 128}, rng, 0.05, 0.95);
    ex.depth_condition = uniform_tensor({1, 27, 64}, rng, 0.05, 0.95);
    ex.target.values = uniform_grid(27, 64, rng, 0.0, 0.6);
    ex.target.taxel_area_m2 = 1.92 * 0.84 / 1728.0;
    ex.target.normalized = true;
    ex.target.divisor_kpa = 9.8;
    ex.anthro = AnthroRecord{50.0 + 10.0 * i, 1.6 + 0.05 * i, i % 2};
    batch.push_back(ex);
  }
  LossWeights w;
  auto mean_loss = [&](double gamma, double* mean_wol) {
    w.gamma = gamma;
    double total = 0.0, wol_total = 0.0;
    for (const ConditionalExample& ex : batch) {
      const GeneratorLoss l = loss_generator_cond(ex, g, d, w, scale);
      total += l.total.item();
      wol_total += l.wol.item();
    }
    if (mean_wol) *mean_wol = wol_total / batch.size();
    return total / batch.size();
  };
  double e_wol = 0.0;
  const double l0 = mean_loss(0.0, &e_wol);
  double worst = 0.0;
  for (double gamma : {0.001, 0.0182, 0.1, 1.0}) {
    const double slope = (mean_loss(gamma, nullptr) - l0) / gamma;
    worst = std::max(worst, std::abs(slope - w.lambda * e_wol));
  }
  return {violations == 0 && witness && worst <= 1e-9,
          fmt("%d violations in 1000 pairs; witness wol=%g wol_l1=%g; slope error %.1e",
              violations, wol(p, q), wol_l1(p, q), worst)};
}

Outcome mass_physics() {
  const Dataset ds = generate_toy_dataset(ToySpec{}, 0);
  double worst = 0.0;
  std::size_t count = 0;
  for (const char* split : {"train", "val", "test"}) {
    for (const Sample& s : ds.split(split)) {
      worst = std::max(worst, std::abs(mass_from_pressure(s.pressure) - s.anthro.mass_kg));
      ++count;
    }
  }
  std::mt19937_64 rng(14);
  double resize_worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    PressureMap p;
    p.values = uniform_grid(54, 128, rng, 0.0, 40.0);
    p.taxel_area_m2 = 1.92 * 0.84 / (54.0 * 128.0);
    const PressureMap q = resize_pressure(p, 27, 64);
    resize_worst = std::max(resize_worst, std::abs(mass_from_pressure(q) - mass_from_pressure(p)));
  }
  for (const Sample& s : ds.train) {
    const PressureMap q = resize_pressure(s.pressure, 9, 16);
    resize_worst = std::max(resize_worst, std::abs(mass_from_pressure(q) - s.anthro.mass_kg));
  }
  return {count == 200 && worst <= 1e-9 && resize_worst <= 1e-9,
          fmt("%zu samples, max mass error %.1e kg, max resize error %.1e kg", count, worst,
              resize_worst)};
}

Outcome ils_reduction() {
  Generator g(cgan_generator_config(true), 15);
  std::mt19937_64 rng(16);
  const Tensor input = uniform_tensor({1, 54, 128}, rng, 0.05, 0.95);
  const AnthroScale scale{110.0, 1.95};
  const AnthroRecord rec{70.0, 1.72, 1};
  AnthroRecord heavier = rec;
  heavier.mass_kg = 92.0;

  const Vector a = g.forward(input, rec, scale).values();
  const Vector b = g.forward(input, heavier, scale).values();
  const double sensitivity = (a - b).cwiseAbs().maxCoeff();

  g.ils()->zero_params();
  const Vector zeroed = g.forward(input, rec, scale).values();
  Generator::Encoding enc = g.encode_features(input);
  const Index h = enc.latent.dim(1), w = enc.latent.dim(2);
  enc.latent = unflatten_latent(layer_norm(flatten_latent(enc.latent)), h, w);
  const double reduction = (zeroed - g.decode(enc).values()).cwiseAbs().maxCoeff();
  return {reduction <= 1e-12 && sensitivity > 0.0,
          fmt("zeroed-ILS max |d| %.1e; mass change moves output by up to %.3e", reduction,
              sensitivity)};
}

Outcome metric_identities() {
  std::mt19937_64 rng(17);
  const Grid x = uniform_grid(27, 64, rng, 0.0, 1.0);
  PressureMap p;
  p.values = x * 10.0;
  p.taxel_area_m2 = 1e-3;
  const double s = ssim(x, x);
  const double iou = posture_iou(x, x, 0.01);
  const double mse = mse_kpa(p, p);
  const double bm = bm_mae({p}, {p});
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = 400, dim = 6;
  Eigen::MatrixXd a(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) a(i, j) = normal(rng);
  }
  const double self = frechet_distance(a, a).distance;
  const double delta = 0.5;
  const Eigen::MatrixXd b = a.array() + delta;
  const double offset = frechet_distance(a, b).distance;
  const bool ok = std::abs(s - 1.0) < 1e-12 && iou == 1.0 && mse == 0.0 && bm == 0.0 &&
                  self <= 1e-6 && std::abs(offset - delta * delta * dim) <= 1e-6;
  return {ok, fmt("ssim %.15f, iou %g, mse %g, bm_mae %g, fd(A,A) %.1e, offset fd %.9f vs %.9f", s,
                  iou, mse, bm, self, offset, delta * delta * dim)};
}

Outcome toy_training() {
  const fs::path data = work_dir() / "toy";
  const std::string cli = BRIDGEPRESS_CLI;
  if (run(shell_arg(cli) + " gen-data --out " + shell_arg(data) + " --seed 0 > /dev/null") != 0) {
    return {false, "gen-data failed"};
  }
  double times[2] = {0, 0};
  for (int i = 0; i < 2; ++i) {
    const fs::path out = work_dir() / ("cgan_run" + std::to_string(i));
    const auto start = Clock::now();
    const int code = run(shell_arg(cli) + " train --regime cgan --epochs 30 --seed 0 --data " +
                         shell_arg(data) + " --out " + shell_arg(out) + " > /dev/null");
    times[i] = seconds_since(start);
    if (code != 0) return {false, fmt("train exited with %d", code)};
  }
  const std::string csv0 = read_file(work_dir() / "cgan_run0" / "metrics.csv");
  const std::string csv1 = read_file(work_dir() / "cgan_run1" / "metrics.csv");
  const auto rows = read_csv(work_dir() / "cgan_run0" / "metrics.csv");
  if (rows.size() < 3) return {false, "metrics.csv too short"};
  const double first = std::stod(rows[1][3]);
  const double last = std::stod(rows.back()[3]);
  const double drop = 1.0 - last / first;
  const bool ok = csv0 == csv1 && drop >= 0.5 && times[0] < 300.0 && times[1] < 300.0;
  return {ok, fmt("val MSE %.4g -> %.4g kPa^2 (-%.1f%%), runs %.1f s and %.1f s, CSVs %s", first,
                  last, 100.0 * drop, times[0], times[1], csv0 == csv1 ? "identical" : "differ")};
}

Outcome wol_ablation() {
  const fs::path data = work_dir() / "toy";
  if (!fs::exists(data / "manifest.txt")) return {false, "toy dataset missing"};
  const Dataset ds = load_dataset(data);
  const int seeds = 5;
  double mae[2] = {0.0, 0.0};
  const double gammas[2] = {1.0, 0.0};
  std::string per_seed;
  const auto start = Clock::now();
  for (int gi = 0; gi < 2; ++gi) {
    per_seed += fmt(" gamma=%g:", gammas[gi]);
    for (int seed = 0; seed < seeds; ++seed) {
      TrainConfig c;
      c.regime = Regime::cgan;
      c.seed = static_cast<std::uint64_t>(seed);
      c.epochs = 10;
      c.weights.gamma = gammas[gi];
      c.gamma_given = true;
      const TrainResult r = train(ds, c);
      const Checkpoint ck{r.manifest, r.models};
      const std::vector<Prediction> preds = infer_all(ck, ds.test, 1, 0);
      std::vector<PressureMap> pred_maps, refs;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        pred_maps.push_back(preds[i].pressure);
        refs.push_back(ds.test[i].pressure);
      }
      const double m = bm_mae(pred_maps, refs);
      per_seed += fmt(" %.2f", m);
      mae[gi] += m / seeds;
    }
  }
  return {mae[0] < mae[1],
          fmt("mean test BM MAE %.3f kg (gamma=1) vs %.3f kg (gamma=0), 10 epochs, %.0f s;",
              mae[0], mae[1], seconds_since(start)) + per_seed};
}

Outcome steps_sweep() {
  const fs::path data = work_dir() / "toy";
  const std::string cli = BRIDGEPRESS_CLI;
  const fs::path ckpt = work_dir() / "bbdm";
  const fs::path out = work_dir() / "steps_sweep";
  const fs::path recipe = work_dir() / "steps.cfg";
  write_file_atomic(recipe, "kind=steps\nvalues=10,200,1000\nsplit=test\n");
  int code = run(shell_arg(cli) + " train --regime bbdm --epochs 1 --max-train 20 --max-val 4 --data " +
                 shell_arg(data) + " --out " + shell_arg(ckpt) + " > /dev/null");
  if (code != 0) return {false, fmt("bbdm train exited with %d", code)};
  code = run(shell_arg(cli) + " sweep --recipe " + shell_arg(recipe) + " --ckpt " + shell_arg(ckpt) +
             " --limit 4 --out " + shell_arg(out) + " > /dev/null");
  if (code != 0) return {false, fmt("sweep exited with %d", code)};
  const auto rows = read_csv(out / "comparison.csv");
  bool ok = rows.size() == 4 && rows[0].size() == 10 && rows[0][0] == "steps";
  const char* expected[3] = {"10", "200", "1000"};
  for (std::size_t i = 1; ok && i < rows.size(); ++i) {
    ok = rows[i].size() == rows[0].size() && rows[i][0] == expected[i - 1] && rows[i][1] == "4";
    for (std::size_t k = 2; ok && k < 8; ++k) ok = std::isfinite(std::stod(rows[i][k]));
  }
  for (const char* s : expected) {
    ok = ok && fs::exists(out / (std::string("S") + s) / "report.csv");
  }
  return {ok, fmt("comparison.csv has %zu rows for S in {10, 200, 1000}", rows.empty() ? 0 : rows.size() - 1)};
}

Outcome format_robustness() {
  std::mt19937_64 rng(18);
  const fs::path path = work_dir() / "roundtrip.bprs";
  bool bitwise = true;
  for (int i = 0; i < 20; ++i) {
    ArrayRecord r;
    r.shape = {27, 64};
    r.role = "pressure";
    r.units = "kPa";
    r.name = "map" + std::to_string(i);
    r.values = uniform_array(27 * 64, rng, -1e3, 1e3).matrix();
    r.values[0] = 5e-324;  // subnormal
    r.values[1] = -0.0;
    write_container(path, r);
    const ArrayRecord back = read_container(path);
    bitwise = bitwise && back.shape == r.shape &&
              std::memcmp(back.values.data(), r.values.data(), 8 * r.values.size()) == 0;
  }
  const std::string good = read_file(path);
  auto error_of = [](const std::string& bytes) -> std::string {
    try {
      std::size_t offset = 0;
      decode_record(bytes, offset);
      return "none";
    } catch (const FormatError&) {
      return "format";
    } catch (const LengthError&) {
      return "length";
    } catch (const UnsupportedVersionError&) {
      return "version";
    } catch (...) {
      return "other";
    }
  };
  std::string bad_magic = good;
  bad_magic[1] = 'Q';
  std::string newer = good;
  newer[4] = 9;
  const std::string magic = error_of(bad_magic);
  const std::string truncated = error_of(good.substr(0, good.size() - 3));
  const std::string header_cut = error_of(good.substr(0, 16));
  const std::string version = error_of(newer);

  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) ids.push_back(subject_name(i));
  int overlaps = 0, incomplete = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const DatasetManifest m = make_splits(ids, {}, seed);
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto* split : {&m.train, &m.val, &m.test}) {
      for (const std::string& id : *split) {
        ++total;
        if (!seen.insert(id).second) ++overlaps;
      }
    }
    if (seen.size() != ids.size() || total != ids.size()) ++incomplete;
  }
  const bool ok = bitwise && magic == "format" && truncated == "length" && header_cut == "length" &&
                  version == "version" && overlaps == 0 && incomplete == 0;
  return {ok, fmt("round trip %s; bad magic -> %s, truncated payload -> %s, truncated header -> "
                  "%s, newer version -> %s; 100 seeds: %d overlaps, %d incomplete",
                  bitwise ? "bitwise" : "DIFFERS", magic.c_str(), truncated.c_str(),
                  header_cut.c_str(), version.c_str(), overlaps, incomplete)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient verification", gradient_verification},
      {"bridge endpoint pinning", endpoint_pinning},
      {"oracle sampler recovery", oracle_sampler},
      {"WOL algebra", wol_algebra},
      {"mass physics", mass_physics},
      {"ILS reduction and sensitivity", ils_reduction},
      {"metric identities", metric_identities},
      {"toy cGAN training", toy_training},
      {"WOL ablation direction", wol_ablation},
      {"sampling-step sweep", steps_sweep},
      {"format robustness", format_robustness},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.passed ? 0 : 1;
    std::printf("criterion %zu: %s - %s (%s)\n", i + 1, o.passed ? "PASS" : "FAIL",
                criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
