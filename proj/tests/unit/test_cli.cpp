#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "locenc/checkpoint.hpp"
#include "locenc/csv.hpp"
#include "locenc/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "locenc_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& name) { return (workdir() / name).string(); }

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Result cli(const std::string& args) {
  const auto out = workdir() / "stdout.txt";
  const auto err = workdir() / "stderr.txt";
  const std::string cmd = std::string(LOCENC_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::size_t data_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  std::getline(in, line);
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

std::size_t header_columns(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return locenc::csv::split_fields(line).size();
}

json load(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

/// Shared small world used by most cases.
void ensure_world() {
  static bool done = false;
  if (done) return;
  REQUIRE(cli("gen-data --n 700 --seed 4 --out " + at("world")).code == 0);
  done = true;
}

const std::string kSmallModel = "--L 5 --d 16 --hidden 32 --batch 64 ";

}  // namespace

TEST_CASE("gen-data") {
  SUBCASE("row counts and reproducibility") {
    json spec{{"bump_count", 8}, {"feature_dim", 12}, {"seed", 77}};
    std::ofstream(at("spec.json")) << spec.dump();
    REQUIRE(cli("gen-data --spec " + at("spec.json") + " --n 100 --out " + at("a")).code == 0);
    REQUIRE(cli("gen-data --spec " + at("spec.json") + " --n 100 --out " + at("b")).code == 0);
    CHECK(data_rows(at("a.pairs.csv")) == 100);
    CHECK(data_rows(at("a.labels.csv")) == 100);
    CHECK(header_columns(at("a.pairs.csv")) == 2 + 12);
    CHECK(slurp(at("a.pairs.csv")) == slurp(at("b.pairs.csv")));
    CHECK(slurp(at("a.labels.csv")) == slurp(at("b.labels.csv")));
    const auto m = load(at("a.manifest.json"));
    CHECK(m["status"] == "ok");
    CHECK(m["seed"] == 77);
    CHECK(m["config"]["world"]["mixing"].size() == 8);
    CHECK(m.contains("started_at"));
    CHECK(m.contains("finished_at"));
    CHECK(m.contains("version"));
  }
  SUBCASE("missing spec file") {
    const auto r = cli("gen-data --spec " + at("nowhere.json") + " --n 10 --out " + at("c"));
    CHECK(r.code == 2);
    CHECK(r.err.find("nowhere.json") != std::string::npos);
    const auto m = load(at("c.manifest.json"));
    CHECK(m["status"] == "error");
    CHECK(m["exit_code"] == 2);
  }
  SUBCASE("usage errors") {
    CHECK(cli("").code == 2);
    CHECK(cli("gen-data --n 10").code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("--help").code == 0);
  }
}

TEST_CASE("pretrain") {
  ensure_world();
  const std::string pairs = at("world.pairs.csv");

  SUBCASE("zero epochs keep the initialization") {
    REQUIRE(cli("pretrain --pairs " + pairs + " " + kSmallModel + "--epochs 0 --seed 5 --out " + at("init.lenc")).code == 0);
    const auto ck = locenc::load_checkpoint(at("init.lenc"));
    locenc::SirenConfig cfg{25, 32, 2, 16, 30.0};
    const auto init = locenc::siren_init(cfg, locenc::derive_seed(5, "init.encoder"));
    for (std::size_t i = 0; i < init.layers.size(); ++i) CHECK(ck.encoder.layers[i].weight.value == init.layers[i].weight.value);
    CHECK(data_rows(at("init.lenc.log.csv")) == 0);
    CHECK(slurp(at("init.lenc.log.csv")) == "epoch,train_loss,val_loss,tau,seconds\n");
    const auto m = load(at("init.lenc.manifest.json"));
    CHECK(m["config"]["lr"] == 0.0001);
    CHECK(m["config"]["weight_decay"] == 0.01);
    CHECK(m["config"]["batch_size"] == 64);
    CHECK(m["config"]["tau_init"] == 0.07);
  }
  SUBCASE("rerun and replay give byte-identical checkpoints") {
    const std::string args = "pretrain --pairs " + pairs + " " + kSmallModel + "--epochs 3 --seed 8 --out ";
    const auto r = cli(args + at("r1.lenc"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("final val loss") != std::string::npos);
    CHECK(r.out.find("best val loss") != std::string::npos);
    REQUIRE(cli(args + at("r2.lenc")).code == 0);
    CHECK(slurp(at("r1.lenc")) == slurp(at("r2.lenc")));
    CHECK(slurp(at("r1.lenc.json")) == slurp(at("r2.lenc.json")));
    CHECK(data_rows(at("r1.lenc.log.csv")) == 3);

    const std::string before = slurp(at("r1.lenc"));
    fs::remove(at("r1.lenc"));
    REQUIRE(cli("replay " + at("r1.lenc.manifest.json")).code == 0);
    CHECK(slurp(at("r1.lenc")) == before);
  }
  SUBCASE("too small a dataset is an input error") {
    const auto r = cli("pretrain --pairs " + pairs + " --L 3 --d 8 --hidden 8 --batch 4096 --epochs 1 --out " + at("big.lenc"));
    CHECK(r.code == 2);
    CHECK(load(at("big.lenc.manifest.json"))["status"] == "error");
  }
  SUBCASE("divergence is a numerical failure") {
    const auto r = cli("pretrain --pairs " + pairs + " " + kSmallModel + "--epochs 3 --lr 1e300 --out " + at("nan.lenc"));
    CHECK(r.code == 3);
    CHECK(r.err.find("epoch") != std::string::npos);
    CHECK(load(at("nan.lenc.manifest.json"))["exit_code"] == 3);
  }
  SUBCASE("missing pairs file") {
    CHECK(cli("pretrain --pairs " + at("absent.csv") + " --out " + at("x.lenc")).code == 2);
  }
}

TEST_CASE("embed") {
  ensure_world();
  REQUIRE(cli("pretrain --pairs " + at("world.pairs.csv") + " " + kSmallModel + "--epochs 1 --out " + at("e.lenc")).code == 0);
  std::ofstream(at("coords.csv")) << "lon,lat\n0,0\n10.5,-20.25\n0,0\n";
  std::ofstream(at("empty.csv")) << "lon,lat\n";
  REQUIRE(cli("embed --ckpt " + at("e.lenc") + " --coords " + at("coords.csv") + " --out " + at("e1.csv")).code == 0);
  REQUIRE(cli("embed --ckpt " + at("e.lenc") + " --coords " + at("coords.csv") + " --out " + at("e2.csv")).code == 0);
  CHECK(header_columns(at("e1.csv")) == 2 + 16);
  CHECK(data_rows(at("e1.csv")) == 3);
  CHECK(slurp(at("e1.csv")) == slurp(at("e2.csv")));
  {
    std::ifstream in(at("e1.csv"));
    std::string h, a, b, c;
    std::getline(in, h);
    std::getline(in, a);
    std::getline(in, b);
    std::getline(in, c);
    CHECK(a == c);
  }
  REQUIRE(cli("embed --ckpt " + at("e.lenc") + " --coords " + at("empty.csv") + " --out " + at("e3.csv")).code == 0);
  CHECK(data_rows(at("e3.csv")) == 0);
  CHECK(header_columns(at("e3.csv")) == 18);

  std::ofstream(at("badcoords.csv")) << "x,y\n0,0\n";
  CHECK(cli("embed --ckpt " + at("e.lenc") + " --coords " + at("badcoords.csv") + " --out " + at("e4.csv")).code == 2);
  std::ofstream(at("garbage.lenc")) << "garbage";
  CHECK(cli("embed --ckpt " + at("garbage.lenc") + " --coords " + at("coords.csv") + " --out " + at("e5.csv")).code == 2);
}

TEST_CASE("downstream") {
  ensure_world();
  const std::string base = "downstream --labels " + at("world.labels.csv") +
                           " --trials 2 --search-layers 1 --search-dims 16,32 --max-epochs 30 --patience 5 ";
  SUBCASE("identity featurizer with one repeat") {
    REQUIRE(cli(base + "--featurizer identity --repeats 1 --out " + at("d1.json")).code == 0);
    const auto report = load(at("d1.json"));
    CHECK(report["std"] == 0.0);
    CHECK(report["repeat_count"] == 1);
    CHECK(report["featurizer"] == "identity");
  }
  SUBCASE("holdout with few-shot leakage is recorded") {
    REQUIRE(cli(base + "--featurizer identity --repeats 2 --split holdout:0,60,0.01 --out " + at("d2.json")).code == 0);
    const auto m = load(at("d2.json.manifest.json"));
    CHECK(m["config"]["split"]["fewshot_fraction"] == 0.01);
    CHECK(load(at("d2.json"))["split"]["fewshot_fraction"] == 0.01);
    REQUIRE(cli(base + "--featurizer identity --repeats 2 --split holdout:0,60,0.01 --out " + at("d3.json")).code == 0);
    CHECK(slurp(at("d2.json")) == slurp(at("d3.json")));
  }
  SUBCASE("embedding featurizer") {
    REQUIRE(cli("pretrain --pairs " + at("world.pairs.csv") + " " + kSmallModel + "--epochs 1 --out " + at("f.lenc")).code == 0);
    REQUIRE(cli(base + "--featurizer " + at("f.lenc") + " --repeats 1 --out " + at("d4.json")).code == 0);
    CHECK(load(at("d4.json"))["featurizer"] == "f.lenc");
  }
  SUBCASE("bad inputs") {
    CHECK(cli(base + "--featurizer identity --split holdout:5 --out " + at("d5.json")).code == 2);
    CHECK(cli(base + "--featurizer " + at("missing.lenc") + " --out " + at("d6.json")).code == 2);
  }
}

TEST_CASE("analyze") {
  ensure_world();
  REQUIRE(cli("pretrain --pairs " + at("world.pairs.csv") + " --L 5 --d 256 --hidden 32 --batch 64 --epochs 0 --out " +
                 at("wide.lenc"))
              .code == 0);
  SUBCASE("pca keeps three score columns") {
    REQUIRE(cli("analyze pca --ckpt " + at("wide.lenc") + " --coords " + at("world.labels.csv") + " --k 3 --out " +
                   at("pca.csv"))
                .code == 0);
    CHECK(header_columns(at("pca.csv.scores.csv")) == 2 + 3);
    CHECK(data_rows(at("pca.csv.scores.csv")) == 700);
    CHECK(data_rows(at("pca.csv")) == 256);
    REQUIRE(cli("embed --ckpt " + at("wide.lenc") + " --coords " + at("world.labels.csv") + " --out " + at("wide.csv")).code == 0);
    REQUIRE(cli("analyze pca --emb " + at("wide.csv") + " --k 3 --out " + at("pca2.csv")).code == 0);
    CHECK(slurp(at("pca.csv")) == slurp(at("pca2.csv")));
  }
  SUBCASE("simmap peaks at the reference cell") {
    REQUIRE(cli("analyze simmap --ckpt " + at("wide.lenc") + " --ref 20.5,-10.5 --res 1 --out " + at("grid.csv")).code == 0);
    std::ifstream in(at("grid.csv"));
    std::string line;
    for (int i = 0; i < 3; ++i) std::getline(in, line);
    double best = -2.0;
    std::string best_line;
    while (std::getline(in, line)) {
      const double v = locenc::csv::parse_double(locenc::csv::split_fields(line)[2], "grid");
      if (v > best) {
        best = v;
        best_line = line;
      }
    }
    CHECK(best == 1.0);
    CHECK(best_line == "20.5,-10.5,1");
  }
  SUBCASE("bad reference is a usage error") {
    CHECK(cli("analyze simmap --ckpt " + at("wide.lenc") + " --ref 20.5 --out " + at("g2.csv")).code == 2);
    CHECK(cli("analyze simmap --ckpt " + at("wide.lenc") + " --ref 20,95 --out " + at("g3.csv")).code == 2);
    CHECK(cli("analyze").code == 2);
  }
}
