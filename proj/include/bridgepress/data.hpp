#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "bridgepress/ils.hpp"
#include "bridgepress/metrics.hpp"
#include "bridgepress/physics.hpp"

namespace bridgepress {

enum class Posture { supine = 0, left = 1, right = 2 };
std::string to_string(Posture p);
Posture parse_posture(const std::string& text);

/// Synthetic stand-in for a depth/pressure mat dataset. Pressure comes from
/// Gaussian body-contact blobs scaled to integrate to the subject's mass;
/// depth is the camera distance to a body surface whose thickness saturates
/// with contact intensity, blurred by the cover level.
struct ToySpec {
  Index depth_rows = 54;
  Index depth_cols = 128;
  Index pressure_rows = kPressureRows;
  Index pressure_cols = kPressureCols;
  double taxel_area_m2 = 1.92 * 0.84 / 1728.0;
  double gravity = kGravity;
  double mass_min_kg = 45.0;
  double mass_max_kg = 110.0;
  double height_min_m = 1.50;
  double height_max_m = 1.95;
  double camera_height_m = 2.2;
  double max_thickness_m = 0.35;
  double thickness_kpa = 4.0;  // contact pressure at which thickness reaches 63% of max
  std::array<double, 3> cover_blur{0.0, 1.0, 2.0};  // depth-pixel sigma per cover level
  int subjects = 40;
  int samples_per_subject = 5;  // pose = k % 3, cover = (k / 3) % 3

  void validate() const;
};

struct Sample {
  std::string subject;
  Posture posture = Posture::supine;
  CoverCondition cover = CoverCondition::uncovered;
  Grid depth;             // per-image normalized to (0, 1)
  PressureMap pressure;   // kPa
  AnthroRecord anthro;
  bool synthetic = false;

  /// "<subject>/<pose>_<cover>"
  std::string id() const;
};

/// Subject-level draws: anthropometrics and body-shape jitter.
struct ToySubject {
  AnthroRecord anthro;
  double lateral_offset = 0.0;  // taxel rows
  double axial_offset = 0.0;    // taxel columns
  double build = 1.0;           // width multiplier
};

ToySubject draw_subject(const ToySpec& spec, std::uint64_t subject_seed);
/// Unnormalized contact intensity on a rows x cols grid covering the mat.
Grid body_contact(const ToySpec& spec, const ToySubject& subject, Posture posture, Index rows,
                  Index cols);
/// Pressure in kPa integrating to exactly the subject's mass.
PressureMap toy_pressure(const ToySpec& spec, const ToySubject& subject, Posture posture);
/// Camera distance in metres before cover blur and normalization.
Grid render_depth_raw(const ToySpec& spec, const ToySubject& subject, Posture posture);
/// Min-max scaling into [0.05, 0.95].
Grid normalize_depth(const Grid& depth);

Sample gen_toy_sample(const ToySpec& spec, std::uint64_t subject_seed, CoverCondition cover,
                      Posture posture = Posture::supine);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  NormalizationSpec normalization;
  AnthroScale anthro_scale;
  double taxel_area_m2 = 0.0;
  double gravity = kGravity;
  std::vector<std::string> train, val, test, excluded;
  std::map<std::string, std::size_t> cover_counts;  // by cover name

  std::string to_text() const;
  static DatasetManifest parse(const std::string& text);
  /// Which split a subject belongs to, or "" when absent.
  std::string split_of(const std::string& subject) const;
};

/// Seeded shuffle then round(0.6 n) / round(0.2 n) / rest. Synthetic ids
/// are appended to the training split only.
DatasetManifest make_splits(const std::vector<std::string>& subject_ids, const SplitRatios& ratios,
                            std::uint64_t seed, const std::vector<std::string>& synthetic_ids = {});

struct Dataset {
  DatasetManifest manifest;
  std::vector<Sample> train, val, test;

  const std::vector<Sample>& split(const std::string& name) const;
  std::size_t size() const { return train.size() + val.size() + test.size(); }
};

std::string subject_name(int index);
/// Splits, generates every sample in parallel from derived seeds, and fills
/// the manifest (normalization global max = observed maximum).
Dataset generate_toy_dataset(const ToySpec& spec, std::uint64_t seed);

/// <dir>/<split>/<subject>/<pose>_<cover>.{depth,pressure,anthro}.bprs plus manifest.txt.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes <dir>/<subject>/<pose>_<cover>.* without split folders or
/// manifest, flagged as already preprocessed.
void export_raw(const Dataset& dataset, const std::filesystem::path& dir);

struct IngestOptions {
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::vector<std::string> excluded;
  NormalizationSpec::Mode normalization = NormalizationSpec::Mode::global;
  Index depth_rows = 54;
  Index depth_cols = 128;
};

/// Reads <dir>/<subject>/<pose>_<cover>.{depth,pressure,anthro}.bprs.
/// Containers not marked preprocessed=true are resized and (pressure only)
/// smoothed with sigma 1.4; depth is normalized per image. Excluded
/// subjects are skipped with a line on `log`.
Dataset ingest_slp_like(const std::filesystem::path& dir, const IngestOptions& options,
                        std::ostream& log);

}  // namespace bridgepress
