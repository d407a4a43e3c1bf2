#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt";
  const std::string cmd = std::string(PICKNET_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::read_file(out);
  return r;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

// Fixture clips, a small simulated set and a one-epoch model shared by the CLI cases.
struct Workspace {
  testing::TempDir dir{"cli"};
  Workspace() {
    const std::string fx = std::string(PICKNET_FIXTURES) + " --out-dir " + (dir / "clean").string() +
                           " --n-clips 2 --seconds 2 --seed 3 > /dev/null";
    REQUIRE(std::system(fx.c_str()) == 0);
    REQUIRE(run("simulate --clean-dir " + (dir / "clean").string() + " --out-dir " + (dir / "sim").string() +
                    " --n-samples 2 --seed 4",
                dir.path())
                .code == 0);
  }
  std::string manifest() const { return (dir / "sim/manifest.jsonl").string(); }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("cli: usage errors exit with 2") {
  auto& w = workspace();
  CHECK(run("", w.dir.path()).code == 2);
  CHECK(run("frobnicate", w.dir.path()).code == 2);
  CHECK(run("train --no-such-flag", w.dir.path()).code == 2);
  CHECK(run("--help", w.dir.path()).code == 0);
  CHECK(run("train --help", w.dir.path()).code == 0);
  const auto bad_key = run("train --manifest " + w.manifest() + " --out " + (w.dir / "x.pknt").string() +
                               " --set not_a_key=1",
                           w.dir.path());
  CHECK(bad_key.code == 2);
  CHECK(bad_key.out.find("not_a_key") != std::string::npos);
  CHECK_FALSE(fs::exists(w.dir / "x.pknt"));
  CHECK(run("train --manifest " + w.manifest() + " --out " + (w.dir / "x.pknt").string() + " --learning-rate -1",
            w.dir.path())
            .code == 2);
  CHECK(run("simulate --clean-dir " + (w.dir / "nowhere").string() + " --out-dir " + (w.dir / "s2").string() +
                " --n-samples 1",
            w.dir.path())
            .code != 0);
}

TEST_CASE("cli: simulate is deterministic") {
  auto& w = workspace();
  REQUIRE(run("simulate --clean-dir " + (w.dir / "clean").string() + " --out-dir " + (w.dir / "sim_b").string() +
                  " --n-samples 2 --seed 4",
              w.dir.path())
              .code == 0);
  CHECK(testing::read_file(w.dir / "sim/manifest.jsonl") == testing::read_file(w.dir / "sim_b/manifest.jsonl"));
  std::size_t wavs = 0;
  for (const auto& e : fs::recursive_directory_iterator(w.dir / "sim")) {
    if (e.path().extension() != ".wav") continue;
    ++wavs;
    const auto twin = w.dir / "sim_b" / fs::relative(e.path(), w.dir / "sim");
    CHECK(testing::read_file(e.path()) == testing::read_file(twin));
  }
  CHECK(wavs == 8);
}

TEST_CASE("cli: train, enhance, eval and bench") {
  auto& w = workspace();
  const auto ck = (w.dir / "m.pknt").string();
  const auto log = (w.dir / "train.jsonl").string();
  {
    std::FILE* f = std::fopen((w.dir / "run.toml").c_str(), "w");
    std::fputs("[train]\nepochs = 3\nbatch_frames = 64\nseed = 2\n[eval]\nsubsample_n = 1\n", f);
    std::fclose(f);
  }
  // file < --set < flag: epochs ends up 1
  const auto tr = run("--config " + (w.dir / "run.toml").string() + " --log " + log + " train --manifest " +
                          w.manifest() + " --out " + ck + " --set epochs=2 --epochs 1",
                      w.dir.path());
  REQUIRE(tr.code == 0);
  CHECK(tr.out.find("\"epochs\":1") != std::string::npos);
  const std::string frames_tag = "training on ";
  const auto at = tr.out.find(frames_tag);
  REQUIRE(at != std::string::npos);
  const std::size_t frames = std::stoul(tr.out.substr(at + frames_tag.size()));
  const std::string lines = testing::read_file(log);
  CHECK(count_lines(lines) == (frames + 63) / 64);
  CHECK(lines.find("\"step\":1,") != std::string::npos);
  CHECK(lines.find("\"mean_loss\"") != std::string::npos);

  const auto ck2 = (w.dir / "m2.pknt").string();
  REQUIRE(run("--config " + (w.dir / "run.toml").string() + " train --manifest " + w.manifest() + " --out " + ck2 +
                  " --epochs 1",
              w.dir.path())
              .code == 0);
  CHECK(testing::read_file(ck) == testing::read_file(ck2));

  const std::string inputs = (w.dir / "sim/wav/s00000_noisy0.wav").string() + " " +
                             (w.dir / "sim/wav/s00000_noisy1.wav").string();
  SUBCASE("enhance writes all artefacts deterministically") {
    const auto a = (w.dir / "out/a").string(), b = (w.dir / "out/b").string();
    REQUIRE(run("enhance " + inputs + " --checkpoint " + ck + " --out-prefix " + a + " --timeline --rttm",
                w.dir.path())
                .code == 0);
    REQUIRE(run("enhance " + inputs + " --checkpoint " + ck + " --out-prefix " + b + " --timeline --rttm",
                w.dir.path())
                .code == 0);
    for (const char* ext : {".wav", ".timeline.jsonl"}) {
      CHECK(fs::file_size(a + ext) > 0);
      CHECK(testing::read_file(a + ext) == testing::read_file(b + ext));
    }
    CHECK(testing::read_file(a + ".rttm").starts_with("SPEAKER a 1 "));
  }
  SUBCASE("bad inputs leave no partial output") {
    const auto p = (w.dir / "bad/x").string();
    CHECK(run("enhance " + inputs + " --checkpoint " + (w.dir / "missing.pknt").string() + " --out-prefix " + p,
              w.dir.path())
              .code == 2);
    std::string bytes = testing::read_file(ck);
    bytes[bytes.size() / 2] ^= 0x5a;
    {
      std::FILE* f = std::fopen((w.dir / "corrupt.pknt").c_str(), "wb");
      std::fwrite(bytes.data(), 1, bytes.size(), f);
      std::fclose(f);
    }
    const auto r = run("enhance " + inputs + " --checkpoint " + (w.dir / "corrupt.pknt").string() +
                           " --out-prefix " + p + " --timeline",
                       w.dir.path());
    CHECK(r.code == 1);
    CHECK(r.out.find("checksum") != std::string::npos);
    CHECK(run("enhance " + (w.dir / "nope.wav").string() + " --checkpoint " + ck + " --out-prefix " + p,
              w.dir.path())
              .code != 0);
    CHECK_FALSE(fs::exists(p + ".wav"));
    CHECK_FALSE(fs::exists(p + ".timeline.jsonl"));
  }
  SUBCASE("eval reports accuracy as JSON") {
    const auto json_path = (w.dir / "eval.json").string();
    const auto r = run("--config " + (w.dir / "run.toml").string() + " eval --manifest " + w.manifest() +
                           " --checkpoint " + ck + " --json " + json_path,
                       w.dir.path());
    REQUIRE(r.code == 0);
    const auto j = testing::read_file(json_path);
    CHECK(j.find("\"accuracy\"") != std::string::npos);
    CHECK(j.find("\"baseline_accuracy\"") != std::string::npos);
    CHECK(r.out.find("model accuracy") != std::string::npos);
  }
  SUBCASE("bench") {
    const auto r = run("bench --checkpoint " + ck + " --m-list 1,2 --n-frames 60", w.dir.path());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("MACs") != std::string::npos);
  }
}
