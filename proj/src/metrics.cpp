#include "bridgepress/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

namespace bridgepress {

using Eigen::Index;

namespace {

void require_same(const Grid& a, const Grid& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch");
  }
}

// Separable "valid" correlation with a symmetric 1-D kernel.
Grid filter_valid(const Grid& g, const Eigen::ArrayXd& k) {
  const Index n = k.size();
  const Index R = g.rows() - n + 1, C = g.cols() - n + 1;
  Grid horizontal(g.rows(), C);
  for (Index r = 0; r < g.rows(); ++r)
    for (Index c = 0; c < C; ++c) horizontal(r, c) = (g.row(r).segment(c, n).transpose() * k).sum();
  Grid out(R, C);
  for (Index r = 0; r < R; ++r)
    for (Index c = 0; c < C; ++c) out(r, c) = (horizontal.col(c).segment(r, n) * k).sum();
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

double ssim(const Grid& a, const Grid& b, const SsimParams& p) {
  require_same(a, b, "ssim");
  if (p.window < 1 || p.window % 2 == 0) throw ConfigError("SSIM window must be odd");
  if (a.rows() < p.window || a.cols() < p.window) {
    throw DimensionError("SSIM window larger than the image");
  }
  Eigen::ArrayXd k(p.window);
  const Index r = p.window / 2;
  for (Index i = -r; i <= r; ++i) k[i + r] = std::exp(-0.5 * double(i * i) / (p.sigma * p.sigma));
  k /= k.sum();
  const Grid mu_a = filter_valid(a, k), mu_b = filter_valid(b, k);
  const Grid var_a = filter_valid(a * a, k) - mu_a * mu_a;
  const Grid var_b = filter_valid(b * b, k) - mu_b * mu_b;
  const Grid cov = filter_valid(a * b, k) - mu_a * mu_b;
  const Grid map = ((2.0 * mu_a * mu_b + p.c1) * (2.0 * cov + p.c2)) /
                   ((mu_a * mu_a + mu_b * mu_b + p.c1) * (var_a + var_b + p.c2));
  return map.mean();
}

double psnr(const Grid& a, const Grid& b, double peak, double cap_db) {
  require_same(a, b, "psnr");
  const double mse = (a - b).square().mean();
  if (mse == 0.0) return cap_db;
  return std::min(cap_db, 10.0 * std::log10(peak * peak / mse));
}

double mppa(const Grid& a, const Grid& b, double tolerance) {
  require_same(a, b, "mppa");
  if (tolerance < 0.0) throw ConfigError("MPPA tolerance must be non-negative");
  return static_cast<double>(((a - b).abs() <= tolerance).count()) / static_cast<double>(a.size());
}

double mse_kpa(const PressureMap& a, const PressureMap& b) {
  if (a.normalized || b.normalized) throw ContractError("mse_kpa needs maps in kPa");
  require_same(a.values, b.values, "mse_kpa");
  return (a.values - b.values).square().mean();
}

double posture_iou(const Grid& a, const Grid& b, double threshold) {
  require_same(a, b, "posture_iou");
  const auto sa = a > threshold, sb = b > threshold;
  const Index inter = (sa && sb).count(), uni = (sa || sb).count();
  if (uni == 0) throw DegenerateInputError("posture IoU of two empty supports");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double bm_mae(const std::vector<PressureMap>& preds, const std::vector<PressureMap>& refs,
              const std::optional<std::vector<double>>& ref_masses) {
  if (preds.size() != refs.size() || (ref_masses && ref_masses->size() != preds.size())) {
    throw DimensionError("bm_mae: prediction and reference counts differ");
  }
  if (preds.empty()) throw DegenerateInputError("bm_mae of an empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double ref = ref_masses ? (*ref_masses)[i] : mass_from_pressure(refs[i]);
    total += std::abs(ref - mass_from_pressure(preds[i]));
  }
  return total / static_cast<double>(preds.size());
}

namespace {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Moments moments(const Eigen::MatrixXd& f) {
  Moments m;
  m.mean = f.colwise().mean().transpose();
  const Eigen::MatrixXd centered = f.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * centered / static_cast<double>(f.rows() - 1);
  m.cov = 0.5 * (m.cov + m.cov.transpose());
  return m;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

FrechetResult frechet_distance(const Eigen::MatrixXd& features_a,
                               const Eigen::MatrixXd& features_b, double epsilon) {
  const Index dim = features_a.cols();
  if (features_b.cols() != dim) throw DimensionError("feature dimensions differ");
  if (features_a.rows() < dim + 1 || features_b.rows() < dim + 1) {
    throw DegenerateInputError("Frechet distance needs at least dim + 1 samples per set");
  }
  Moments a = moments(features_a), b = moments(features_b);
  FrechetResult result;
  const double rank_tol = 1e-12;
  for (Moments* m : {&a, &b}) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m->cov, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= rank_tol * std::max(1.0, eig.eigenvalues().maxCoeff())) {
      m->cov += epsilon * Eigen::MatrixXd::Identity(dim, dim);
      result.regularized = true;
    }
  }
  const Eigen::MatrixXd root_a = sqrt_psd(a.cov);
  Eigen::MatrixXd middle = root_a * b.cov * root_a;
  middle = 0.5 * (middle + middle.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(middle, Eigen::EigenvaluesOnly);
  const double trace_root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  result.distance = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() -
                    2.0 * trace_root;
  result.distance = std::max(result.distance, 0.0);
  return result;
}

RandomConvFeatures::RandomConvFeatures(std::uint64_t seed, Index channels)
    : filters_(channels, 9), bias_(channels) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / 3.0);
  for (Index i = 0; i < filters_.size(); ++i) filters_.data()[i] = normal(rng);
  for (Index i = 0; i < bias_.size(); ++i) bias_[i] = 0.1 * normal(rng);
}

Eigen::VectorXd RandomConvFeatures::operator()(const Grid& image) const {
  const Index C = filters_.rows();
  const Index Ho = (image.rows() - 1) / 2 + 1, Wo = (image.cols() - 1) / 2 + 1;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(C), total_sq = Eigen::VectorXd::Zero(C);
  Eigen::VectorXd patch(9);
  for (Index oy = 0; oy < Ho; ++oy) {
    for (Index ox = 0; ox < Wo; ++ox) {
      for (Index ki = 0; ki < 3; ++ki) {
        for (Index kj = 0; kj < 3; ++kj) {
          const Index y = 2 * oy - 1 + ki, x = 2 * ox - 1 + kj;
          const bool inside = y >= 0 && y < image.rows() && x >= 0 && x < image.cols();
          patch[ki * 3 + kj] = inside ? image(y, x) : 0.0;
        }
      }
      const Eigen::VectorXd act = (filters_ * patch + bias_).cwiseMax(0.0);
      total += act;
      total_sq += act.cwiseAbs2();
    }
  }
  const double n = static_cast<double>(Ho * Wo);
  Eigen::VectorXd out(2 * C);
  out << total / n, (total_sq / n).cwiseSqrt();
  return out;
}

Eigen::MatrixXd RandomConvFeatures::batch(const std::vector<Grid>& images) const {
  Eigen::MatrixXd out(static_cast<Index>(images.size()), dimension());
  for (std::size_t i = 0; i < images.size(); ++i) {
    out.row(static_cast<Index>(i)) = (*this)(images[i]).transpose();
  }
  return out;
}

std::string to_string(CoverCondition c) {
  switch (c) {
    case CoverCondition::uncovered: return "uncovered";
    case CoverCondition::cov1mm: return "cov1mm";
    case CoverCondition::cov3mm: return "cov3mm";
  }
  return "unknown";
}

CoverCondition parse_cover(const std::string& text) {
  if (text == "uncovered") return CoverCondition::uncovered;
  if (text == "cov1mm") return CoverCondition::cov1mm;
  if (text == "cov3mm") return CoverCondition::cov3mm;
  throw ManifestError("unknown cover condition '" + text + "'");
}

MetricReport evaluate(const std::vector<EvalPair>& pairs, double global_max_kpa,
                      const MetricOptions& options) {
  if (!(global_max_kpa > 0.0)) throw ConfigError("evaluation needs a positive global max");
  if (pairs.empty()) throw DegenerateInputError("nothing to evaluate");
  MetricReport report;
  report.options = options;
  report.global_max_kpa = global_max_kpa;
  const double threshold = options.iou_threshold_fraction * global_max_kpa;

  for (const EvalPair& p : pairs) {
    const Grid a = p.pred.values / global_max_kpa, b = p.ref.values / global_max_kpa;
    SampleMetrics m;
    m.id = p.id;
    m.cover = p.cover;
    m.ssim = ssim(a, b, options.ssim);
    m.psnr = psnr(a, b, 1.0, options.psnr_cap_db);
    m.mppa = mppa(a, b, options.mppa_tolerance);
    m.mse_kpa = mse_kpa(p.pred, p.ref);
    m.iou = posture_iou(p.pred.values, p.ref.values, threshold);
    m.mass_pred_kg = mass_from_pressure(p.pred);
    m.mass_gt_kg = mass_from_pressure(p.ref);
    m.mass_measured_kg = p.measured_mass_kg;
    report.samples.push_back(m);
  }

  const RandomConvFeatures features(options.feature_seed);
  auto summarize = [&](const std::string& label, const std::vector<std::size_t>& idx) {
    MetricSummary s;
    s.label = label;
    s.count = idx.size();
    const double n = static_cast<double>(idx.size());
    bool all_measured = true;
    double measured = 0.0;
    std::vector<Grid> pred_images, ref_images;
    for (std::size_t i : idx) {
      const SampleMetrics& m = report.samples[i];
      s.ssim += m.ssim / n;
      s.psnr += m.psnr / n;
      s.mppa += m.mppa / n;
      s.mse_kpa += m.mse_kpa / n;
      s.iou += m.iou / n;
      s.bm_mae_gt += std::abs(m.mass_gt_kg - m.mass_pred_kg) / n;
      if (m.mass_measured_kg) {
        measured += std::abs(*m.mass_measured_kg - m.mass_pred_kg) / n;
      } else {
        all_measured = false;
      }
      pred_images.push_back(pairs[i].pred.values / global_max_kpa);
      ref_images.push_back(pairs[i].ref.values / global_max_kpa);
    }
    if (all_measured) s.bm_mae_measured = measured;
    if (static_cast<Index>(idx.size()) >= features.dimension() + 1) {
      s.frechet = frechet_distance(features.batch(pred_images), features.batch(ref_images)).distance;
    }
    report.summaries.push_back(s);
  };

  std::vector<std::size_t> all(pairs.size());
  std::map<int, std::vector<std::size_t>> by_cover;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    all[i] = i;
    by_cover[static_cast<int>(pairs[i].cover)].push_back(i);
  }
  summarize("overall", all);
  for (const auto& [cover, idx] : by_cover) {
    summarize(to_string(static_cast<CoverCondition>(cover)), idx);
  }
  return report;
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << "# mppa_tolerance=" << fmt(options.mppa_tolerance)
      << " iou_threshold_fraction=" << fmt(options.iou_threshold_fraction)
      << " psnr_cap_db=" << fmt(options.psnr_cap_db) << " global_max_kpa=" << fmt(global_max_kpa)
      << " ssim_window=" << options.ssim.window << "\n";
  out << "kind,id,cover,count,ssim,psnr_db,mppa,mse_kpa2,posture_iou,mass_pred_kg,mass_gt_kg,"
         "mass_measured_kg,bm_mae_gt_kg,bm_mae_measured_kg,mfid\n";
  for (const SampleMetrics& m : samples) {
    out << "sample," << m.id << ',' << to_string(m.cover) << ",1," << fmt(m.ssim) << ','
        << fmt(m.psnr) << ',' << fmt(m.mppa) << ',' << fmt(m.mse_kpa) << ',' << fmt(m.iou) << ','
        << fmt(m.mass_pred_kg) << ',' << fmt(m.mass_gt_kg) << ',' << fmt(m.mass_measured_kg)
        << ',' << fmt(std::abs(m.mass_gt_kg - m.mass_pred_kg)) << ','
        << (m.mass_measured_kg ? fmt(std::abs(*m.mass_measured_kg - m.mass_pred_kg)) : "") << ",\n";
  }
  for (const MetricSummary& s : summaries) {
    out << "summary,mean," << s.label << ',' << s.count << ',' << fmt(s.ssim) << ','
        << fmt(s.psnr) << ',' << fmt(s.mppa) << ',' << fmt(s.mse_kpa) << ',' << fmt(s.iou)
        << ",,,," << fmt(s.bm_mae_gt) << ',' << fmt(s.bm_mae_measured) << ','
        << fmt(s.frechet) << "\n";
  }
  return out.str();
}

}  // namespace bridgepress
