#include "bridgepress/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "bridgepress/container.hpp"
#include "bridgepress/parallel.hpp"

namespace bridgepress {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ',';
    s += items[i];
  }
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Blob {
  double row, col, sigma_row, sigma_col, weight;
};

std::vector<Blob> posture_blobs(const ToySpec& spec, const ToySubject& s, Posture posture) {
  const double length = s.anthro.height_m / 1.92 * static_cast<double>(spec.pressure_cols) * 0.95;
  const double head = 2.0 + s.axial_offset;
  const double mid = 0.5 * static_cast<double>(spec.pressure_rows - 1) + s.lateral_offset;
  const double b = s.build;
  auto at = [&](double f) { return head + f * length; };
  std::vector<Blob> blobs;
  if (posture == Posture::supine) {
    blobs = {
        {mid, at(0.05), 1.6 * b, 1.8, 0.8},
        {mid, at(0.22), 3.2 * b, 3.0, 1.0},
        {mid - 5.5 * b, at(0.36), 1.0, 5.0, 0.4},
        {mid + 5.5 * b, at(0.36), 1.0, 5.0, 0.4},
        {mid, at(0.48), 3.0 * b, 2.8, 1.5},
        {mid - 1.8 * b, at(0.65), 1.2 * b, 4.0, 0.6},
        {mid + 1.8 * b, at(0.65), 1.2 * b, 4.0, 0.6},
        {mid - 1.8 * b, at(0.85), 1.0 * b, 3.5, 0.4},
        {mid + 1.8 * b, at(0.85), 1.0 * b, 3.5, 0.4},
        {mid - 1.9 * b, at(0.97), 0.8, 0.9, 0.5},
        {mid + 1.9 * b, at(0.97), 0.8, 0.9, 0.5},
    };
  } else {
    // Lying on one side: a narrow trunk, stacked legs with knees drawn
    // forward. The right side is the mirror image of the left.
    const double dir = posture == Posture::left ? 1.0 : -1.0;
    blobs = {
        {mid, at(0.05), 1.3 * b, 1.8, 0.9},
        {mid + dir * 0.5, at(0.22), 1.8 * b, 3.2, 1.4},
        {mid - dir * 2.5, at(0.33), 1.0, 3.0, 0.4},
        {mid + dir * 0.8, at(0.48), 2.0 * b, 3.0, 1.8},
        {mid - dir * 2.2, at(0.64), 1.4 * b, 4.0, 0.8},
        {mid - dir * 1.0, at(0.84), 1.1 * b, 3.8, 0.5},
        {mid - dir * 0.6, at(0.97), 0.9, 1.0, 0.5},
    };
  }
  return blobs;
}

}  // namespace

std::string to_string(Posture p) {
  switch (p) {
    case Posture::supine: return "supine";
    case Posture::left: return "left";
    case Posture::right: return "right";
  }
  return "unknown";
}

Posture parse_posture(const std::string& text) {
  if (text == "supine") return Posture::supine;
  if (text == "left") return Posture::left;
  if (text == "right") return Posture::right;
  throw ManifestError("unknown posture '" + text + "'");
}

void ToySpec::validate() const {
  if (depth_rows < 8 || depth_cols < 8 || pressure_rows < 8 || pressure_cols < 8) {
    throw ConfigError("toy grids must be at least 8x8");
  }
  if (!(taxel_area_m2 > 0.0) || !(gravity > 0.0)) {
    throw ConfigError("taxel area and gravity must be positive");
  }
  if (!(mass_min_kg > 0.0) || mass_max_kg < mass_min_kg || !(height_min_m > 0.0) ||
      height_max_m < height_min_m) {
    throw ConfigError("invalid mass or height range");
  }
  if (!(camera_height_m > max_thickness_m) || !(max_thickness_m > 0.0) || !(thickness_kpa > 0.0)) {
    throw ConfigError("camera must sit above the thickest body surface");
  }
  for (double s : cover_blur) {
    if (s < 0.0) throw ConfigError("cover blur must be non-negative");
  }
  if (subjects < 1 || samples_per_subject < 1) {
    throw ConfigError("subjects and samples_per_subject must be positive");
  }
}

std::string Sample::id() const {
  return subject + "/" + to_string(posture) + "_" + to_string(cover);
}

ToySubject draw_subject(const ToySpec& spec, std::uint64_t subject_seed) {
  std::mt19937_64 rng(subject_seed);
  ToySubject s;
  s.anthro.mass_kg = spec.mass_min_kg + (spec.mass_max_kg - spec.mass_min_kg) * uniform01(rng);
  s.anthro.height_m =
      spec.height_min_m + (spec.height_max_m - spec.height_min_m) * uniform01(rng);
  s.anthro.gender = uniform01(rng) < 0.5 ? 0 : 1;
  s.lateral_offset = 3.0 * (2.0 * uniform01(rng) - 1.0);
  s.axial_offset = 2.0 * uniform01(rng);
  // Heavier bodies are broader.
  const double mass_mid = 0.5 * (spec.mass_min_kg + spec.mass_max_kg);
  s.build = std::sqrt(s.anthro.mass_kg / mass_mid) * (0.95 + 0.1 * uniform01(rng));
  return s;
}

Grid body_contact(const ToySpec& spec, const ToySubject& subject, Posture posture, Index rows,
                  Index cols) {
  const std::vector<Blob> blobs = posture_blobs(spec, subject, posture);
  const double sr = static_cast<double>(spec.pressure_rows) / static_cast<double>(rows);
  const double sc = static_cast<double>(spec.pressure_cols) / static_cast<double>(cols);
  Grid g = Grid::Zero(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const double r = (static_cast<double>(i) + 0.5) * sr - 0.5;
    for (Index j = 0; j < cols; ++j) {
      const double c = (static_cast<double>(j) + 0.5) * sc - 0.5;
      double v = 0.0;
      for (const Blob& b : blobs) {
        const double dr = (r - b.row) / b.sigma_row, dc = (c - b.col) / b.sigma_col;
        v += b.weight * std::exp(-0.5 * (dr * dr + dc * dc));
      }
      g(i, j) = v;
    }
  }
  // Cells with negligible load lose contact with the mat.
  const double floor = 1e-3 * g.maxCoeff();
  g = (g < floor).select(0.0, g);
  return g;
}

PressureMap toy_pressure(const ToySpec& spec, const ToySubject& subject, Posture posture) {
  const Grid raw = body_contact(spec, subject, posture, spec.pressure_rows, spec.pressure_cols);
  PressureMap p;
  p.taxel_area_m2 = spec.taxel_area_m2;
  p.gravity = spec.gravity;
  // sum(p) * 1000 * A / g = mass.
  const double kpa_per_unit =
      subject.anthro.mass_kg * spec.gravity / (spec.taxel_area_m2 * raw.sum()) / 1000.0;
  p.values = raw * kpa_per_unit;
  return p;
}

Grid render_depth_raw(const ToySpec& spec, const ToySubject& subject, Posture posture) {
  const Grid coarse = body_contact(spec, subject, posture, spec.pressure_rows, spec.pressure_cols);
  const double kpa_per_unit =
      subject.anthro.mass_kg * spec.gravity / (spec.taxel_area_m2 * coarse.sum()) / 1000.0;
  const Grid fine = body_contact(spec, subject, posture, spec.depth_rows, spec.depth_cols);
  const Grid thickness =
      spec.max_thickness_m * (1.0 - (-(fine * kpa_per_unit) / spec.thickness_kpa).exp());
  return spec.camera_height_m - thickness;
}

Grid normalize_depth(const Grid& depth) {
  const double lo = depth.minCoeff(), hi = depth.maxCoeff();
  if (!(hi > lo)) throw DegenerateInputError("depth image is constant");
  return 0.05 + 0.9 * (depth - lo) / (hi - lo);
}

Sample gen_toy_sample(const ToySpec& spec, std::uint64_t subject_seed, CoverCondition cover,
                      Posture posture) {
  spec.validate();
  const ToySubject subject = draw_subject(spec, subject_seed);
  Sample s;
  s.posture = posture;
  s.cover = cover;
  s.anthro = subject.anthro;
  s.pressure = toy_pressure(spec, subject, posture);
  Grid depth = render_depth_raw(spec, subject, posture);
  const double sigma = spec.cover_blur[static_cast<std::size_t>(cover)];
  if (sigma > 0.0) depth = gaussian_smooth(depth, sigma);
  s.depth = normalize_depth(depth);
  return s;
}

// ---------------------------------------------------------------------------
// Splits and manifests

DatasetManifest make_splits(const std::vector<std::string>& subject_ids, const SplitRatios& ratios,
                            std::uint64_t seed, const std::vector<std::string>& synthetic_ids) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  if (subject_ids.size() < 5) throw ConfigError("at least 5 subjects are needed to split");
  std::set<std::string> seen;
  for (const auto& id : subject_ids) {
    if (!seen.insert(id).second) throw ConfigError("duplicate subject id " + id);
  }
  for (const auto& id : synthetic_ids) {
    if (!seen.insert(id).second) throw ConfigError("duplicate subject id " + id);
  }
  std::vector<std::string> order = subject_ids;
  std::sort(order.begin(), order.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
  const std::size_t n = order.size();
  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * double(n)));
  const auto n_val =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios.val * double(n))));
  DatasetManifest m;
  m.seed = seed;
  m.train.assign(order.begin(), order.begin() + n_train);
  m.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  m.test.assign(order.begin() + n_train + n_val, order.end());
  m.train.insert(m.train.end(), synthetic_ids.begin(), synthetic_ids.end());
  for (auto* v : {&m.train, &m.val, &m.test}) std::sort(v->begin(), v->end());
  return m;
}

std::string DatasetManifest::split_of(const std::string& subject) const {
  auto has = [&](const std::vector<std::string>& ids) {
    return std::find(ids.begin(), ids.end(), subject) != ids.end();
  };
  if (has(train)) return "train";
  if (has(val)) return "val";
  if (has(test)) return "test";
  return "";
}

std::string DatasetManifest::to_text() const {
  std::ostringstream out;
  out << "seed=" << seed << "\n";
  out << "normalization=" << to_string(normalization.mode) << "\n";
  out << "global_max_kpa=" << num(normalization.global_max_kpa) << "\n";
  out << "mass_max_kg=" << num(anthro_scale.mass_max_kg) << "\n";
  out << "height_max_m=" << num(anthro_scale.height_max_m) << "\n";
  out << "taxel_area_m2=" << num(taxel_area_m2) << "\n";
  out << "gravity=" << num(gravity) << "\n";
  out << "split.train=" << join(train) << "\n";
  out << "split.val=" << join(val) << "\n";
  out << "split.test=" << join(test) << "\n";
  out << "excluded=" << join(excluded) << "\n";
  for (const auto& [cover, count] : cover_counts) out << "count." << cover << "=" << count << "\n";
  return out.str();
}

DatasetManifest DatasetManifest::parse(const std::string& text) {
  DatasetManifest m;
  std::set<std::string> required{"seed",          "normalization", "global_max_kpa",
                                 "mass_max_kg",   "height_max_m",  "taxel_area_m2",
                                 "gravity",       "split.train",   "split.val",
                                 "split.test"};
  std::stringstream ss(text);
  std::string line;
  auto number = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw ManifestError("");
      return d;
    } catch (const std::exception&) {
      throw ManifestError("manifest value for " + key + " is not a number: '" + v + "'");
    }
  };
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ManifestError("manifest line without '=': " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    required.erase(key);
    if (key == "seed") {
      try {
        m.seed = std::stoull(value);
      } catch (const std::exception&) {
        throw ManifestError("bad seed '" + value + "'");
      }
    } else if (key == "normalization") {
      try {
        m.normalization.mode = parse_normalization_mode(value);
      } catch (const ConfigError& e) {
        throw ManifestError(e.what());
      }
    } else if (key == "global_max_kpa") {
      m.normalization.global_max_kpa = number(key, value);
    } else if (key == "mass_max_kg") {
      m.anthro_scale.mass_max_kg = number(key, value);
    } else if (key == "height_max_m") {
      m.anthro_scale.height_max_m = number(key, value);
    } else if (key == "taxel_area_m2") {
      m.taxel_area_m2 = number(key, value);
    } else if (key == "gravity") {
      m.gravity = number(key, value);
    } else if (key == "split.train") {
      m.train = split_list(value);
    } else if (key == "split.val") {
      m.val = split_list(value);
    } else if (key == "split.test") {
      m.test = split_list(value);
    } else if (key == "excluded") {
      m.excluded = split_list(value);
    } else if (key.rfind("count.", 0) == 0) {
      const std::string cover = key.substr(6);
      parse_cover(cover);
      m.cover_counts[cover] = static_cast<std::size_t>(number(key, value));
    } else {
      throw ManifestError("unknown manifest key '" + key + "'");
    }
  }
  if (!required.empty()) throw ManifestError("manifest lacks '" + *required.begin() + "'");
  std::set<std::string> seen;
  for (const auto* ids : {&m.train, &m.val, &m.test}) {
    for (const auto& id : *ids) {
      if (!seen.insert(id).second) throw ManifestError("subject " + id + " is in two splits");
    }
  }
  return m;
}

const std::vector<Sample>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "'");
}

std::string subject_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%03d", index);
  return buf;
}

Dataset generate_toy_dataset(const ToySpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<std::string> ids;
  for (int i = 1; i <= spec.subjects; ++i) ids.push_back(subject_name(i));
  Dataset ds;
  ds.manifest = make_splits(ids, {}, seed);

  const std::size_t per = static_cast<std::size_t>(spec.samples_per_subject);
  std::vector<Sample> all(ids.size() * per);
  parallel_for(all.size(), [&](std::size_t n) {
    const std::size_t subject = n / per;
    const int k = static_cast<int>(n % per);
    const std::uint64_t subject_seed = splitmix64(seed ^ splitmix64(subject + 1));
    all[n] = gen_toy_sample(spec, subject_seed, static_cast<CoverCondition>((k / 3) % 3),
                            static_cast<Posture>(k % 3));
    all[n].subject = ids[subject];
  });

  double global_max = 0.0;
  for (const Sample& s : all) {
    global_max = std::max(global_max, s.pressure.values.maxCoeff());
    ds.manifest.cover_counts[to_string(s.cover)] += 1;
    const std::string split = ds.manifest.split_of(s.subject);
    (split == "train" ? ds.train : split == "val" ? ds.val : ds.test).push_back(s);
  }
  ds.manifest.normalization = {NormalizationSpec::Mode::global, global_max};
  ds.manifest.anthro_scale = {spec.mass_max_kg, spec.height_max_m};
  ds.manifest.taxel_area_m2 = spec.taxel_area_m2;
  ds.manifest.gravity = spec.gravity;
  return ds;
}

// ---------------------------------------------------------------------------
// Files

namespace {

ArrayRecord grid_record(const Grid& g, const std::string& role, const std::string& units,
                        const std::string& name) {
  ArrayRecord r;
  r.shape = {g.rows(), g.cols()};
  r.role = role;
  r.units = units;
  r.name = name;
  r.values = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
  return r;
}

Grid record_grid(const ArrayRecord& r, const fs::path& path) {
  if (r.shape.size() != 2) throw ManifestError(path.string() + " is not a 2-D array");
  Grid g(r.shape[0], r.shape[1]);
  Eigen::Map<Eigen::VectorXd>(g.data(), g.size()) = r.values;
  return g;
}

std::string extra_or(const ArrayRecord& r, const std::string& key, const std::string& fallback) {
  auto it = r.extra.find(key);
  return it == r.extra.end() ? fallback : it->second;
}

void write_sample(const Sample& s, const fs::path& dir, bool preprocessed) {
  const std::string stem = to_string(s.posture) + "_" + to_string(s.cover);
  const fs::path base = dir / s.subject;
  ArrayRecord depth = grid_record(s.depth, "depth", "normalized", s.id());
  ArrayRecord pressure = grid_record(s.pressure.values, "pressure", "kPa", s.id());
  pressure.extra["taxel_area_m2"] = num(s.pressure.taxel_area_m2);
  pressure.extra["gravity"] = num(s.pressure.gravity);
  ArrayRecord anthro;
  anthro.shape = {3};
  anthro.role = "anthro";
  anthro.units = "kg,m,flag";
  anthro.name = s.id();
  anthro.values = Eigen::Vector3d(s.anthro.mass_kg, s.anthro.height_m, s.anthro.gender);
  if (s.synthetic) anthro.extra["synthetic"] = "1";
  for (ArrayRecord* r : {&depth, &pressure, &anthro}) {
    r->extra["preprocessed"] = preprocessed ? "true" : "false";
  }
  write_container(base / (stem + ".depth.bprs"), depth);
  write_container(base / (stem + ".pressure.bprs"), pressure);
  write_container(base / (stem + ".anthro.bprs"), anthro);
}

struct RawSample {
  Sample sample;
  bool depth_preprocessed = false;
  bool pressure_preprocessed = false;
};

/// Reads every <pose>_<cover> triple in one subject directory, sorted.
std::vector<RawSample> read_subject(const fs::path& dir, const std::string& subject) {
  std::map<std::string, std::map<std::string, fs::path>> groups;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string file = entry.path().filename().string();
    const std::string suffix = ".bprs";
    if (file.size() <= suffix.size() || file.compare(file.size() - suffix.size(), suffix.size(),
                                                     suffix) != 0) {
      continue;
    }
    const std::string base = file.substr(0, file.size() - suffix.size());
    const auto dot = base.rfind('.');
    if (dot == std::string::npos) throw ManifestError("container without role: " + file);
    groups[base.substr(0, dot)][base.substr(dot + 1)] = entry.path();
  }
  std::vector<RawSample> out;
  for (const auto& [stem, roles] : groups) {
    for (const char* role : {"depth", "pressure", "anthro"}) {
      if (!roles.count(role)) {
        throw ManifestError(subject + "/" + stem + " is missing its " + role + " container");
      }
    }
    const auto us = stem.find('_');
    if (us == std::string::npos) throw ManifestError("bad sample name " + stem);
    RawSample raw;
    Sample& s = raw.sample;
    s.subject = subject;
    s.posture = parse_posture(stem.substr(0, us));
    s.cover = parse_cover(stem.substr(us + 1));

    const ArrayRecord depth = read_container(roles.at("depth"));
    const ArrayRecord pressure = read_container(roles.at("pressure"));
    const ArrayRecord anthro = read_container(roles.at("anthro"));
    if (depth.role != "depth" || pressure.role != "pressure" || anthro.role != "anthro") {
      throw ManifestError(subject + "/" + stem + ": container roles do not match file names");
    }
    s.depth = record_grid(depth, roles.at("depth"));
    s.pressure.values = record_grid(pressure, roles.at("pressure"));
    const auto area = pressure.extra.find("taxel_area_m2");
    if (area == pressure.extra.end()) {
      throw ManifestError(subject + "/" + stem + ": pressure container lacks taxel_area_m2");
    }
    s.pressure.taxel_area_m2 = std::stod(area->second);
    s.pressure.gravity = std::stod(extra_or(pressure, "gravity", num(kGravity)));
    if (anthro.values.size() != 3) throw ManifestError(subject + "/" + stem + ": bad anthro record");
    s.anthro = {anthro.values[0], anthro.values[1], static_cast<int>(anthro.values[2])};
    s.synthetic = extra_or(anthro, "synthetic", "0") == "1";
    raw.depth_preprocessed = extra_or(depth, "preprocessed", "false") == "true";
    raw.pressure_preprocessed = extra_or(pressure, "preprocessed", "false") == "true";
    out.push_back(std::move(raw));
  }
  std::sort(out.begin(), out.end(), [](const RawSample& a, const RawSample& b) {
    return std::pair(a.sample.posture, a.sample.cover) < std::pair(b.sample.posture, b.sample.cover);
  });
  return out;
}

std::vector<std::string> subdirectories(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  for (const char* split : {"train", "val", "test"}) {
    for (const Sample& s : dataset.split(split)) write_sample(s, dir / split, true);
  }
  write_file_atomic(dir / "manifest.txt", dataset.manifest.to_text());
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.txt")) {
    throw ManifestError("no manifest.txt in " + dir.string());
  }
  Dataset ds;
  ds.manifest = DatasetManifest::parse(read_file(dir / "manifest.txt"));
  std::map<std::string, std::size_t> counts;
  for (const char* split : {"train", "val", "test"}) {
    const auto& ids = split == std::string("train") ? ds.manifest.train
                      : split == std::string("val") ? ds.manifest.val
                                                     : ds.manifest.test;
    auto& target = split == std::string("train") ? ds.train
                   : split == std::string("val") ? ds.val
                                                  : ds.test;
    for (const std::string& subject : ids) {
      const fs::path sdir = dir / split / subject;
      if (!fs::is_directory(sdir)) {
        throw ManifestError("subject " + subject + " listed in " + split + " has no directory");
      }
      for (RawSample& raw : read_subject(sdir, subject)) {
        counts[to_string(raw.sample.cover)] += 1;
        target.push_back(std::move(raw.sample));
      }
    }
  }
  if (counts != ds.manifest.cover_counts) {
    throw ManifestError("per-cover counts in the manifest do not match the files present");
  }
  return ds;
}

void export_raw(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  for (const char* split : {"train", "val", "test"}) {
    for (const Sample& s : dataset.split(split)) write_sample(s, dir, true);
  }
}

Dataset ingest_slp_like(const fs::path& dir, const IngestOptions& options, std::ostream& log) {
  if (!fs::is_directory(dir)) throw ManifestError(dir.string() + " is not a directory");
  const std::set<std::string> excluded(options.excluded.begin(), options.excluded.end());
  std::vector<Sample> samples;
  std::vector<std::string> real_ids, synthetic_ids;
  for (const std::string& subject : subdirectories(dir)) {
    if (excluded.count(subject)) {
      log << "skipping excluded subject " << subject << "\n";
      continue;
    }
    bool synthetic = false;
    for (RawSample& raw : read_subject(dir / subject, subject)) {
      Sample& s = raw.sample;
      if (!raw.pressure_preprocessed) {
        if (s.pressure.rows() != kPressureRows || s.pressure.cols() != kPressureCols) {
          s.pressure = resize_pressure(s.pressure);
        }
        s.pressure = gaussian_smooth(s.pressure, kSmoothingSigma);
      }
      if (!raw.depth_preprocessed) {
        if (s.depth.rows() != options.depth_rows || s.depth.cols() != options.depth_cols) {
          s.depth = resize_area(s.depth, options.depth_rows, options.depth_cols);
        }
        s.depth = normalize_depth(s.depth);
      }
      synthetic = synthetic || s.synthetic;
      samples.push_back(std::move(s));
    }
    (synthetic ? synthetic_ids : real_ids).push_back(subject);
  }
  if (samples.empty()) throw ManifestError("no samples found under " + dir.string());

  Dataset ds;
  ds.manifest = make_splits(real_ids, options.ratios, options.seed, synthetic_ids);
  ds.manifest.excluded = options.excluded;
  std::sort(ds.manifest.excluded.begin(), ds.manifest.excluded.end());
  double global_max = 0.0;
  for (Sample& s : samples) {
    global_max = std::max(global_max, s.pressure.values.maxCoeff());
    ds.manifest.anthro_scale.mass_max_kg =
        std::max(ds.manifest.anthro_scale.mass_max_kg, s.anthro.mass_kg);
    ds.manifest.anthro_scale.height_max_m =
        std::max(ds.manifest.anthro_scale.height_max_m, s.anthro.height_m);
    ds.manifest.cover_counts[to_string(s.cover)] += 1;
    const std::string split = ds.manifest.split_of(s.subject);
    (split == "train" ? ds.train : split == "val" ? ds.val : ds.test).push_back(std::move(s));
  }
  ds.manifest.normalization = {options.normalization, global_max};
  ds.manifest.taxel_area_m2 = ds.train.empty() ? 0.0 : ds.train.front().pressure.taxel_area_m2;
  ds.manifest.gravity = kGravity;
  return ds;
}

}  // namespace bridgepress
