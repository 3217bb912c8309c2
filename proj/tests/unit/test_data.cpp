#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "bridgepress/config.hpp"
#include "bridgepress/container.hpp"
#include "bridgepress/data.hpp"
#include "helpers.hpp"

using namespace bridgepress;
using namespace bp_test;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bridgepress_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ArrayRecord random_record(std::uint64_t seed) {
  ArrayRecord r;
  r.shape = {27, 64};
  r.role = "pressure";
  r.units = "kPa";
  r.name = "s000/supine_uncovered";
  r.values = random_vector(27 * 64, seed, -50.0, 50.0);
  r.extra["taxel_area_m2"] = "0.001";
  return r;
}

ToySpec small_spec(int subjects) {
  ToySpec spec;
  spec.subjects = subjects;
  spec.samples_per_subject = 3;
  return spec;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("toy samples carry their recorded mass exactly") {
  const ToySpec spec;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (CoverCondition cover :
         {CoverCondition::uncovered, CoverCondition::cov1mm, CoverCondition::cov3mm}) {
      const Sample s = gen_toy_sample(spec, seed, cover, static_cast<Posture>(seed % 3));
      CHECK(std::abs(mass_from_pressure(s.pressure) - s.anthro.mass_kg) <= 1e-9);
      CHECK(s.pressure.values.minCoeff() >= 0.0);
      CHECK(s.depth.minCoeff() >= 0.05 - 1e-12);
      CHECK(s.depth.maxCoeff() <= 0.95 + 1e-12);
    }
  }
}

TEST_CASE("toy samples are deterministic") {
  const ToySpec spec;
  const Sample a = gen_toy_sample(spec, 17, CoverCondition::cov1mm, Posture::left);
  const Sample b = gen_toy_sample(spec, 17, CoverCondition::cov1mm, Posture::left);
  CHECK((a.depth == b.depth).all());
  CHECK((a.pressure.values == b.pressure.values).all());
  CHECK(a.anthro.mass_kg == b.anthro.mass_kg);
}

TEST_CASE("covered depth is the blurred uncovered depth") {
  const ToySpec spec;
  const Sample bare = gen_toy_sample(spec, 5, CoverCondition::uncovered);
  const Sample heavy = gen_toy_sample(spec, 5, CoverCondition::cov3mm);
  CHECK((bare.pressure.values == heavy.pressure.values).all());
  const ToySubject subject = draw_subject(spec, 5);
  const Grid raw = render_depth_raw(spec, subject, Posture::supine);
  CHECK((bare.depth == normalize_depth(raw)).all());
  CHECK((heavy.depth == normalize_depth(gaussian_smooth(raw, spec.cover_blur[2]))).all());
}

TEST_CASE("splits are subject-disjoint, sized and seeded") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back(subject_name(i));
  const DatasetManifest m = make_splits(ids, {}, 3);
  CHECK(m.train.size() == 6);
  CHECK(m.val.size() == 2);
  CHECK(m.test.size() == 2);
  const DatasetManifest again = make_splits(ids, {}, 3);
  CHECK(m.train == again.train);
  CHECK(m.test == again.test);
  std::set<std::string> all(m.train.begin(), m.train.end());
  all.insert(m.val.begin(), m.val.end());
  all.insert(m.test.begin(), m.test.end());
  CHECK(all.size() == 10);
  CHECK(m.split_of(m.val.front()) == "val");
}

TEST_CASE("synthetic subjects only join the training split") {
  std::vector<std::string> ids;
  for (int i = 0; i < 8; ++i) ids.push_back(subject_name(i));
  const DatasetManifest m = make_splits(ids, {}, 4, {"syn000", "syn001"});
  CHECK(m.split_of("syn000") == "train");
  CHECK(m.split_of("syn001") == "train");
}

TEST_CASE("split errors") {
  std::vector<std::string> ids{"a", "b", "c", "d"};
  CHECK_THROWS_AS(make_splits(ids, {}, 0), ConfigError);
  ids.push_back("e");
  CHECK_THROWS_AS(make_splits(ids, {0.5, 0.2, 0.2}, 0), ConfigError);
  ids.push_back("a");
  CHECK_THROWS_AS(make_splits(ids, {}, 0), ConfigError);
}

TEST_CASE("manifest text round trip") {
  const Dataset ds = generate_toy_dataset(small_spec(6), 11);
  const DatasetManifest back = DatasetManifest::parse(ds.manifest.to_text());
  CHECK(back.to_text() == ds.manifest.to_text());
  CHECK(back.normalization.global_max_kpa == ds.manifest.normalization.global_max_kpa);
  CHECK_THROWS_AS(DatasetManifest::parse(ds.manifest.to_text() + "bogus=1\n"), ManifestError);
}

TEST_CASE("generated dataset records the observed global max") {
  const Dataset ds = generate_toy_dataset(small_spec(6), 12);
  double observed = 0.0;
  for (const char* split : {"train", "val", "test"}) {
    for (const Sample& s : ds.split(split)) observed = std::max(observed, s.pressure.values.maxCoeff());
  }
  CHECK(ds.manifest.normalization.global_max_kpa == observed);
  CHECK(ds.size() == 18);
}

TEST_CASE("container round trip is bitwise") {
  const fs::path dir = fresh_dir("container");
  const ArrayRecord r = random_record(1);
  write_container(dir / "a.bprs", r);
  const ArrayRecord back = read_container(dir / "a.bprs");
  CHECK(back.shape == r.shape);
  CHECK(back.role == "pressure");
  CHECK(back.extra.at("taxel_area_m2") == "0.001");
  CHECK(std::memcmp(back.values.data(), r.values.data(), sizeof(double) * r.values.size()) == 0);
}

TEST_CASE("container corruption is classified") {
  const std::string good = encode_record(random_record(2));
  std::size_t offset = 0;
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_record(bad_magic, offset), FormatError);
  offset = 0;
  CHECK_THROWS_AS(decode_record(good.substr(0, good.size() - 8), offset), LengthError);
  offset = 0;
  CHECK_THROWS_AS(decode_record(good.substr(0, 20), offset), LengthError);
  std::string newer = good;
  newer[4] = 2;
  offset = 0;
  CHECK_THROWS_AS(decode_record(newer, offset), UnsupportedVersionError);

  const fs::path dir = fresh_dir("corrupt");
  write_file_atomic(dir / "extra.bprs", good + "junk");
  CHECK_THROWS_AS(read_container(dir / "extra.bprs"), LengthError);

  ArrayRecord mismatched = random_record(3);
  mismatched.shape = {27, 63};
  CHECK_THROWS_AS(encode_record(mismatched), LengthError);
  ArrayRecord nan = random_record(4);
  nan.values[5] = std::nan("");
  CHECK_THROWS_AS(encode_record(nan), NumericError);
}

TEST_CASE("container header must describe little-endian f64") {
  std::string bytes = encode_record(random_record(5));
  const auto at = bytes.find("dtype=f64");
  REQUIRE(at != std::string::npos);
  bytes.replace(at, 9, "dtype=f32");
  std::size_t offset = 0;
  CHECK_THROWS_AS(decode_record(bytes, offset), FormatError);
}

TEST_CASE("multi-record containers") {
  const fs::path dir = fresh_dir("multi");
  write_containers(dir / "m.bprs", {random_record(6), random_record(7)});
  const auto records = read_containers(dir / "m.bprs");
  REQUIRE(records.size() == 2);
  CHECK((records[1].values - random_record(7).values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dataset write and load preserve every array") {
  const fs::path dir = fresh_dir("dataset");
  const Dataset ds = generate_toy_dataset(small_spec(5), 13);
  write_dataset(ds, dir);
  CHECK(fs::exists(dir / "manifest.txt"));
  const Dataset back = load_dataset(dir);
  CHECK(back.size() == ds.size());
  for (const char* split : {"train", "val", "test"}) {
    const auto& a = ds.split(split);
    const auto& b = back.split(split);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id() == b[i].id());
      CHECK((a[i].depth == b[i].depth).all());
      CHECK((a[i].pressure.values == b[i].pressure.values).all());
      CHECK(a[i].anthro.mass_kg == b[i].anthro.mass_kg);
    }
  }
}

TEST_CASE("a missing role file is a manifest error") {
  const fs::path dir = fresh_dir("missing_role");
  const Dataset ds = generate_toy_dataset(small_spec(5), 14);
  write_dataset(ds, dir);
  const Sample& s = ds.train.front();
  fs::remove(dir / "train" / s.subject /
             (to_string(s.posture) + "_" + to_string(s.cover) + ".anthro.bprs"));
  CHECK_THROWS_AS(load_dataset(dir), ManifestError);
}

TEST_CASE("exported toy data ingests losslessly and honours exclusions") {
  const fs::path raw = fresh_dir("raw");
  const Dataset ds = generate_toy_dataset(small_spec(6), 15);
  export_raw(ds, raw);
  IngestOptions o;
  o.seed = 15;
  o.excluded = {subject_name(2)};
  std::ostringstream log;
  const Dataset in = ingest_slp_like(raw, o, log);
  CHECK(log.str().find(subject_name(2)) != std::string::npos);
  CHECK(in.size() == ds.size() - 3);
  CHECK(in.manifest.split_of(subject_name(2)).empty());
  std::map<std::string, const Sample*> original;
  for (const char* split : {"train", "val", "test"}) {
    for (const Sample& s : ds.split(split)) original[s.id()] = &s;
  }
  double observed = 0.0;
  for (const char* split : {"train", "val", "test"}) {
    for (const Sample& s : in.split(split)) {
      const Sample& o2 = *original.at(s.id());
      CHECK((s.pressure.values == o2.pressure.values).all());
      CHECK((s.depth == o2.depth).all());
      observed = std::max(observed, s.pressure.values.maxCoeff());
    }
  }
  CHECK(in.manifest.normalization.global_max_kpa == observed);
}

TEST_CASE("config parsing") {
  const ConfigMap m = parse_config("# comment\na = 1\n\nb=x,y\n");
  CHECK(m.at("a") == "1");
  CHECK(m.at("b") == "x,y");
  CHECK_THROWS_AS(parse_config("a=1\na=2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("novalue\n"), ConfigError);
  CHECK_THROWS_AS(config_int("k", "1.5"), ConfigError);
  CHECK_THROWS_AS(config_bool("k", "maybe"), ConfigError);
  CHECK(config_doubles("k", "1, 0.1,0.0182") == std::vector<double>{1.0, 0.1, 0.0182});
  CHECK(format_double(0.1) == "0.1");
  CHECK_THROWS_AS(toy_spec_from({{"colour", "red"}}), ConfigError);
  const ToySpec spec;
  const ToySpec back = toy_spec_from(to_config(spec));
  CHECK(format_config(to_config(back)) == format_config(to_config(spec)));
}

}  // TEST_SUITE
