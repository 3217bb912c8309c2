#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "bridgepress/container.hpp"

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string("'") + BRIDGEPRESS_CLI + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage and configuration errors exit with 2") {
  CHECK(cli("") == 2);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("gradcheck --module bogus") == 2);
  const fs::path out = fs::temp_directory_path() / "bridgepress_cli_cfg";
  fs::remove_all(out);
  CHECK(cli("train --regime bbdm --gamma 0.1 --data /nonexistent --out '" + out.string() + "'") == 2);
}

TEST_CASE("gen-data refuses a populated directory without --force") {
  const fs::path out = fs::temp_directory_path() / "bridgepress_cli_gen";
  fs::remove_all(out);
  fs::create_directories(out);
  bridgepress::write_file_atomic(out / "keep.txt", "x");
  CHECK(cli("gen-data --subjects 5 --samples-per-subject 1 --out '" + out.string() + "'") == 2);
  CHECK(cli("gen-data --subjects 5 --samples-per-subject 1 --force --out '" + out.string() + "'") == 0);
  CHECK(fs::exists(out / "manifest.txt"));
  CHECK(fs::exists(out / "gen-data.cfg"));
}

TEST_CASE("a missing reference map is a data error") {
  const fs::path root = fs::temp_directory_path() / "bridgepress_cli_eval";
  fs::remove_all(root);
  fs::create_directories(root / "pred" / "s000");
  CHECK(cli("eval --pred '" + (root / "pred").string() + "' --ref '" + (root / "ref").string() +
            "' --report '" + (root / "r.csv").string() + "'") != 0);
}

TEST_CASE("gradcheck passes and a flipped softmax gradient exits with 4") {
  CHECK(cli("gradcheck --module tensorcore") == 0);
  CHECK(cli("gradcheck --inject-fault softmax-sign") == 4);
}

}  // TEST_SUITE
