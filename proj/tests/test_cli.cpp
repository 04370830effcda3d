#include "testing.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cyclesr/imagecore.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace cyclesr;
using cyclesr::testing::read_file;
using cyclesr::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
};

Run cli(const std::string& args, const fs::path& scratch) {
  const fs::path log = scratch / "cli_output.txt";
  const std::string cmd = std::string(CYCLESR_CLI_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(log)};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Small corpus shared by the training-related cases; built once per process.
struct Fixture {
  TempDir dir{"cli"};
  fs::path manifest;
  fs::path config;

  Fixture() {
    const std::string d = dir.path().string();
    REQUIRE(cli("procgen --out " + d + "/hr --count 8 --height 64 --width 64 --seed 4", dir.path()).code == 0);
    REQUIRE(cli("synth --hr-dir " + d + "/hr --out " + d + "/corpus --seed 1 --set blur=gaussian:1.5 --set noise=poisson:256 --set shift=random:2",
                dir.path()).code == 0);
    manifest = dir / "corpus/manifest.json";
    config = dir / "tiny.cfg";
    cyclesr::testing::write_file(config,
                                 "batch = 2\nhr_patch = 64\nepochs_total = 2\ndecay_start_epoch = 1\npretrain_epochs = 1\n"
                                 "translator_blocks = 1\ntranslator_width = 8\ndisc_layers = 2\ndisc_width = 8\n"
                                 "sr_depth = 2\nsr_width = 8\neval_max_shift = 2\neval_border = 2\n");
  }
  std::string common() const {
    return "--config " + config.string() + " --manifest " + manifest.string() + " --runs-dir " + (dir / "runs").string();
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("every command answers --help") {
  TempDir dir("help");
  CHECK(cli("--help", dir.path()).code == 0);
  for (const char* cmd : {"synth", "procgen", "train", "infer", "eval", "ablate", "config"}) {
    CAPTURE(cmd);
    const Run r = cli(std::string(cmd) + " --help", dir.path());
    CHECK(r.code == 0);
    CHECK(r.out.find("--") != std::string::npos);
  }
  const Run eval = cli("eval --help", dir.path());
  CHECK(eval.out.find("40") != std::string::npos);  // defaults are printed
}

TEST_CASE("synth") {
  TempDir dir("synth");
  const std::string d = dir.path().string();
  REQUIRE(cli("procgen --out " + d + "/hr --count 10 --height 32 --width 32 --seed 2", dir.path()).code == 0);
  const Run ok = cli("synth --hr-dir " + d + "/hr --out " + d + "/a --seed 7 --set noise=poisson:64", dir.path());
  REQUIRE(ok.code == 0);
  const auto m = nlohmann::json::parse(read_file(dir / "a/manifest.json"));
  int images = 0;
  for (const auto& e : m["entries"])
    for (const char* k : {"hr", "lr_syn", "lr_real"})
      if (e.contains(k) && !e[k].is_null()) ++images;
  CHECK(images == 30);

  REQUIRE(cli("synth --hr-dir " + d + "/hr --out " + d + "/b --seed 7 --set noise=poisson:64", dir.path()).code == 0);
  CHECK(read_file(dir / "a/manifest.json") == read_file(dir / "b/manifest.json"));
  for (const auto& f : fs::directory_iterator(dir / "a/lr_real"))
    CHECK(read_file(f.path()) == read_file(dir / "b/lr_real" / f.path().filename()));

  const Run missing = cli("synth --out " + d + "/c --seed 1", dir.path());
  CHECK(missing.code == 2);
  CHECK(missing.out.find("--hr-dir") != std::string::npos);
  CHECK(cli("synth --hr-dir " + d + "/nope --out " + d + "/c --seed 1", dir.path()).code == 1);
  CHECK(cli("synth --hr-dir " + d + "/hr --out " + d + "/c --seed 1 --set blur=box", dir.path()).code == 2);
}

TEST_CASE("config echoes the resolved configuration") {
  TempDir dir("config");
  const Run r = cli("config --set batch=7 --mode sr_syn", dir.path());
  CHECK(r.code == 0);
  CHECK(r.out.find("batch = 7") != std::string::npos);
  CHECK(r.out.find("mode = sr_syn") != std::string::npos);
  CHECK(cli("config --set nonsense=1", dir.path()).code == 2);
}

TEST_CASE("train, resume and infer") {
  Fixture& f = fixture();
  const fs::path run = f.dir / "runs/t";
  const Run r = cli("train " + f.common() + " --name t --seed 3", f.dir.path());
  INFO(r.out);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(run / "ckpt_1"));
  CHECK(fs::exists(run / "ckpt_2"));
  CHECK(fs::exists(run / "config.txt"));
  CHECK(read_file(run / "config.txt").find("seed = 3") != std::string::npos);
  const auto log = lines(read_file(run / "train_log.jsonl"));
  CHECK(log.size() == 4);  // 4 HR-domain images / batch 2, two epochs

  // Resume from epoch 1: the log keeps contiguous step indices.
  const Run again = cli("train --resume " + (run / "ckpt_1").string() + " " + f.common() + " --name t --seed 3",
                        f.dir.path());
  INFO(again.out);
  REQUIRE(again.code == 0);
  const auto resumed = lines(read_file(run / "train_log.jsonl"));
  REQUIRE(resumed.size() == 4);
  for (std::size_t i = 0; i < resumed.size(); ++i) CHECK(nlohmann::json::parse(resumed[i])["step"] == i + 1);

  // Inference: five inputs, four times larger, bit-identical on rerun.
  fs::create_directories(f.dir / "lr");
  for (int i = 0; i < 5; ++i)
    save_image(cyclesr::testing::random_image(10 + i, 12, i), f.dir / "lr" / ("x" + std::to_string(i) + ".png"));
  const std::string ckpt = (run / "ckpt_2").string();
  REQUIRE(cli("infer --ckpt " + ckpt + " --in " + (f.dir / "lr").string() + " --out " + (f.dir / "sr1").string(), f.dir.path()).code == 0);
  REQUIRE(cli("infer --ckpt " + ckpt + " --in " + (f.dir / "lr").string() + " --out " + (f.dir / "sr2").string(), f.dir.path()).code == 0);
  for (int i = 0; i < 5; ++i) {
    const std::string name = "x" + std::to_string(i) + ".png";
    const Image out = load_image(f.dir / "sr1" / name);
    CHECK(out.height() == 4 * (10 + i));
    CHECK(out.width() == 48);
    CHECK(read_file(f.dir / "sr1" / name) == read_file(f.dir / "sr2" / name));
  }

  // A corrupt checkpoint fails without leaving outputs behind.
  fs::copy(run / "ckpt_2", f.dir / "broken");
  std::string bytes = read_file(f.dir / "broken/weights.bin");
  bytes.resize(bytes.size() / 2);
  cyclesr::testing::write_file(f.dir / "broken/weights.bin", bytes);
  const Run bad = cli("infer --ckpt " + (f.dir / "broken").string() + " --in " + (f.dir / "lr").string() + " --out " +
                          (f.dir / "sr3").string(), f.dir.path());
  CHECK(bad.code != 0);
  CHECK((!fs::exists(f.dir / "sr3") || fs::is_empty(f.dir / "sr3")));
  CHECK(cli("infer --ckpt " + (f.dir / "nothing").string() + " --in " + (f.dir / "lr").string() + " --out " +
                (f.dir / "sr4").string(), f.dir.path()).code != 0);
}

TEST_CASE("sr_paired needs paired real LR") {
  Fixture& f = fixture();
  auto m = nlohmann::json::parse(read_file(f.manifest));
  for (auto& e : m["entries"])
    if (e["role"] == "hr") e.erase("lr_real");
  fs::create_directories(f.dir / "unpaired");
  const fs::path path = f.dir / "corpus/unpaired.json";
  cyclesr::testing::write_file(path, m.dump());
  const Run r = cli("train --config " + f.config.string() + " --manifest " + path.string() + " --runs-dir " +
                        (f.dir / "runs").string() + " --name p --mode sr_paired", f.dir.path());
  CHECK(r.code != 0);
  CHECK(r.out.find("sr_paired") != std::string::npos);
}

TEST_CASE("eval") {
  TempDir dir("eval");
  const std::string d = dir.path().string();
  REQUIRE(cli("procgen --out " + d + "/hr --count 4 --height 48 --width 48 --seed 9", dir.path()).code == 0);
  const Run self = cli("eval --sr-dir " + d + "/hr --hr-dir " + d + "/hr --max-shift 2 --border 2", dir.path());
  REQUIRE(self.code == 0);
  const auto rows = lines(self.out);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == "image_id,psnr_db,ssim,dx,dy");
  const auto mean = split(rows.back(), ',');
  CHECK(mean[0] == "mean");
  CHECK(std::stod(mean[1]) == kPsnrCap);
  CHECK(std::stod(mean[2]) == doctest::Approx(1.0).epsilon(1e-9));

  fs::create_directories(dir / "noisy");
  for (const auto& f : fs::directory_iterator(dir / "hr")) {
    const Image hr = load_image(f.path());
    Image sr = hr;
    std::mt19937 rng(3);
    std::normal_distribution<double> n(0, 0.05);
    for (double& v : sr.values()) v += n(rng);
    save_image(sr, dir / "noisy" / f.path().filename());
  }
  const Run r = cli("eval --sr-dir " + d + "/noisy --hr-dir " + d + "/hr --max-shift 4 --border 2 --out " + d + "/scores.csv --plot " + d + "/scores.svg",
                    dir.path());
  REQUIRE(r.code == 0);
  const auto csv = lines(read_file(dir / "scores.csv"));
  REQUIRE(csv.size() == 6);
  double psnr_sum = 0, ssim_sum = 0;
  for (std::size_t i = 1; i + 1 < csv.size(); ++i) {
    const auto cols = split(csv[i], ',');
    psnr_sum += std::stod(cols[1]);
    ssim_sum += std::stod(cols[2]);
  }
  const auto agg = split(csv.back(), ',');
  CHECK(std::stod(agg[1]) == doctest::Approx(psnr_sum / 4).epsilon(1e-9));
  CHECK(std::stod(agg[2]) == doctest::Approx(ssim_sum / 4).epsilon(1e-9));
  CHECK(read_file(dir / "scores.svg").find("<svg") != std::string::npos);

  // Zero shift search equals plain metrics.
  const Run plain = cli("eval --sr-dir " + d + "/noisy --hr-dir " + d + "/hr --max-shift 0 --border 0", dir.path());
  const auto first = split(lines(plain.out)[1], ',');
  const Image a = load_image(dir / "noisy" / (first[0] + ".png"));
  const Image b = load_image(dir / "hr" / (first[0] + ".png"));
  CHECK(std::stod(first[1]) == doctest::Approx(psnr(a, b)).epsilon(1e-9));
  CHECK(std::stod(first[2]) == doctest::Approx(ssim(a, b)).epsilon(1e-9));

  CHECK(cli("eval --sr-dir " + d + "/hr", dir.path()).code == 2);
}

TEST_CASE("ablate") {
  Fixture& f = fixture();
  const fs::path out = f.dir / "ablation";
  const Run r = cli("ablate " + f.common() + " --val-manifest " + f.manifest.string() + " --name abl --lambda-mse 10,1000,100000 --samples 2 --out " +
                        out.string(), f.dir.path());
  INFO(r.out);
  REQUIRE(r.code == 0);
  const auto csv = lines(read_file(out / "ablation.csv"));
  REQUIRE(csv.size() == 4);
  CHECK(csv[0] == "lambda_mse,psnr,ssim,run_dir");
  for (const char* v : {"10", "1000", "100000"}) {
    const fs::path samples = out / (std::string("lambda_") + v) / "samples";
    CAPTURE(v);
    CHECK(fs::exists(samples / "epoch_1"));
    CHECK(fs::exists(samples / "epoch_2"));
    int raw = 0, norm = 0;
    for (const auto& e : fs::directory_iterator(samples / "epoch_2")) {
      const std::string n = e.path().filename().string();
      raw += n.find("_raw.png") != std::string::npos;
      norm += n.find("_norm.png") != std::string::npos;
    }
    CHECK(raw == 2);
    CHECK(norm == 2);
  }
  CHECK(cli("ablate " + f.common() + " --lambda-mse 10,100 --out " + (f.dir / "x").string(), f.dir.path()).code != 0);
}

}  // TEST_SUITE
