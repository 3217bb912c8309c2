#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bridgepress/physics.hpp"

namespace bridgepress {

struct SsimParams {
  Eigen::Index window = 11;
  double sigma = 1.5;
  double c1 = 1e-4;
  double c2 = 9e-4;
};

/// Mean SSIM over every full Gaussian window of the two grids.
double ssim(const Grid& a, const Grid& b, const SsimParams& params = {});

/// 10 log10(peak^2 / MSE), capped at `cap_db` (identical inputs hit the cap).
double psnr(const Grid& a, const Grid& b, double peak = 1.0, double cap_db = 100.0);

/// Fraction of pixels with |a - b| <= tolerance.
double mppa(const Grid& a, const Grid& b, double tolerance = 0.01);

/// Mean squared difference in kPa^2; both maps must be in physical units.
double mse_kpa(const PressureMap& a, const PressureMap& b);

/// IoU of the supports {p > threshold_kpa}. Throws DegenerateInputError when
/// both supports are empty.
double posture_iou(const Grid& a, const Grid& b, double threshold);

/// Mean |M_ref - M(pred)|. References are the masses of `refs` unless
/// `ref_masses` is supplied (measured masses).
double bm_mae(const std::vector<PressureMap>& preds, const std::vector<PressureMap>& refs,
              const std::optional<std::vector<double>>& ref_masses = std::nullopt);

struct FrechetResult {
  double distance = 0.0;
  bool regularized = false;  // a covariance needed epsilon * I
};

/// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}) over feature rows.
/// The square-root trace comes from the symmetric S_a^{1/2} S_b S_a^{1/2}.
FrechetResult frechet_distance(const Eigen::MatrixXd& features_a,
                               const Eigen::MatrixXd& features_b, double epsilon = 1e-6);

/// Fixed-seed random convolutional features for Frechet distances: a bank
/// of 3x3 stride-2 filters followed by ReLU and per-channel mean and RMS.
class RandomConvFeatures {
 public:
  explicit RandomConvFeatures(std::uint64_t seed = 1234, Eigen::Index channels = 4);
  Eigen::Index dimension() const { return 2 * filters_.rows(); }
  Eigen::VectorXd operator()(const Grid& image) const;
  Eigen::MatrixXd batch(const std::vector<Grid>& images) const;

 private:
  Eigen::MatrixXd filters_;  // channels x 9
  Eigen::VectorXd bias_;
};

enum class CoverCondition { uncovered = 0, cov1mm = 1, cov3mm = 2 };
std::string to_string(CoverCondition c);
CoverCondition parse_cover(const std::string& text);

struct SampleMetrics {
  std::string id;
  CoverCondition cover = CoverCondition::uncovered;
  double ssim = 0.0;
  double psnr = 0.0;
  double mppa = 0.0;
  double mse_kpa = 0.0;
  double iou = 0.0;
  double mass_pred_kg = 0.0;
  double mass_gt_kg = 0.0;
  std::optional<double> mass_measured_kg;
};

struct MetricSummary {
  std::string label;
  std::size_t count = 0;
  double ssim = 0.0, psnr = 0.0, mppa = 0.0, mse_kpa = 0.0, iou = 0.0;
  double bm_mae_gt = 0.0;
  std::optional<double> bm_mae_measured;
  std::optional<double> frechet;
};

struct MetricOptions {
  double mppa_tolerance = 0.01;
  double iou_threshold_fraction = 0.01;  // of the global max
  double psnr_cap_db = 100.0;
  SsimParams ssim;
  std::uint64_t feature_seed = 1234;
};

/// Per-sample metrics with means overall and per cover condition.
struct MetricReport {
  MetricOptions options;
  double global_max_kpa = 0.0;
  std::vector<SampleMetrics> samples;
  std::vector<MetricSummary> summaries;  // overall first, then each present cover

  std::string to_csv() const;
};

struct EvalPair {
  std::string id;
  CoverCondition cover = CoverCondition::uncovered;
  PressureMap pred;  // kPa
  PressureMap ref;   // kPa
  std::optional<double> measured_mass_kg;
};

MetricReport evaluate(const std::vector<EvalPair>& pairs, double global_max_kpa,
                      const MetricOptions& options = {});

}  // namespace bridgepress
