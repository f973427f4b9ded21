#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "helpers.hpp"
#include "ssrc/io.hpp"

using namespace ssrc;
using namespace test_helpers;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ssrc_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
  std::string cmd = std::string(SSRC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  f << content;
}

std::vector<uint8_t> read_all(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                              std::istreambuf_iterator<char>());
}

std::string read_text(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kSimConfig =
    "# compact simulation setup\n"
    "phantom = shepp_logan\n"
    "size = 32\n"
    "coils = 2\n"
    "acceleration = 3\n"
    "noise_sigma = 0.01\n"
    "seed = 11\n";

void save_slice(const std::string& path, const RealImage& img) {
  ComplexImage z(img.height, img.width);
  for (size_t i = 0; i < img.data.size(); ++i) z.data[i] = img.data[i];
  container_save(path, {make_section("IMG ", encode_image(z))});
}

}  // namespace

TEST_CASE("usage and config errors map to the documented exit codes") {
  TempDir tmp;
  REQUIRE(run_cli("bogus_subcommand") == 4);
  REQUIRE(run_cli("simulate --config " + tmp.sub("missing.cfg") + " --out " + tmp.sub("o")) == 3);

  write_file(tmp.sub("bad.cfg"), "not_a_known_key = 1\n");
  REQUIRE(run_cli("simulate --config " + tmp.sub("bad.cfg") + " --out " + tmp.sub("o")) == 2);

  write_file(tmp.sub("malformed.cfg"), "just a line without equals\n");
  REQUIRE(run_cli("simulate --config " + tmp.sub("malformed.cfg") + " --out " + tmp.sub("o")) == 2);

  write_file(tmp.sub("notnum.cfg"), "size = many\n");
  REQUIRE(run_cli("simulate --config " + tmp.sub("notnum.cfg") + " --out " + tmp.sub("o")) == 2);
}

TEST_CASE("simulate emits the acquisition bundle deterministically") {
  TempDir tmp;
  write_file(tmp.sub("sim.cfg"), kSimConfig);
  REQUIRE(run_cli("simulate --config " + tmp.sub("sim.cfg") + " --out " + tmp.sub("a")) == 0);
  for (const char* name : {"truth.ssrc", "full.ssrc", "retrospective.ssrc",
                           "prospective.ssrc", "schedule.csv", "config.resolved.txt",
                           "manifest.txt"})
    REQUIRE(fs::exists(tmp.sub("a") + "/" + name));

  // retrospective container decodes into a valid problem at the right shape
  ContainerData c = container_load(tmp.sub("a") + "/retrospective.ssrc");
  MultiCoilKSpace y = decode_kspace(c.find("KSPC")->payload);
  REQUIRE(y.num_coils == 2);
  REQUIRE(y.height == 32);
  SamplingMask m = decode_mask(c.find("MASK")->payload);
  REQUIRE(std::abs(m.acceleration() - 3.0) <= 0.3);

  // identical run into a different directory is bitwise identical
  REQUIRE(run_cli("simulate --config " + tmp.sub("sim.cfg") + " --out " + tmp.sub("b")) == 0);
  for (const char* name : {"truth.ssrc", "full.ssrc", "retrospective.ssrc",
                           "prospective.ssrc", "schedule.csv"})
    REQUIRE(read_all(tmp.sub("a") + "/" + name) == read_all(tmp.sub("b") + "/" + name));

  // a different seed changes the acquisitions
  write_file(tmp.sub("sim2.cfg"), std::string(kSimConfig) + "seed = 12\n");
  REQUIRE(run_cli("simulate --config " + tmp.sub("sim2.cfg") + " --out " + tmp.sub("c")) == 0);
  REQUIRE(read_all(tmp.sub("a") + "/retrospective.ssrc") !=
          read_all(tmp.sub("c") + "/retrospective.ssrc"));
}

TEST_CASE("reconstruct: cgsense and cs produce sane images; ssdu needs params") {
  TempDir tmp;
  write_file(tmp.sub("sim.cfg"), kSimConfig);
  REQUIRE(run_cli("simulate --config " + tmp.sub("sim.cfg") + " --out " + tmp.sub("sim")) == 0);
  std::string problem = tmp.sub("sim") + "/retrospective.ssrc";

  write_file(tmp.sub("cs.cfg"), "cs.iterations = 30\n");
  REQUIRE(run_cli("reconstruct --method cgsense --in " + problem + " --out " +
                  tmp.sub("cg.ssrc")) == 0);
  REQUIRE(run_cli("reconstruct --method cs --in " + problem + " --out " + tmp.sub("cs.ssrc") +
                  " --config " + tmp.sub("cs.cfg")) == 0);

  ComplexImage truth = decode_image(
      container_load(tmp.sub("sim") + "/truth.ssrc").find("IMG ")->payload);
  for (const char* out : {"cg.ssrc", "cs.ssrc"}) {
    ContainerData c = container_load(tmp.sub(out));
    REQUIRE(c.find("META") != nullptr);
    ComplexImage img = decode_image(c.find("IMG ")->payload);
    REQUIRE(img.height == 32);
    double err = 0, ref = 0;
    for (size_t p = 0; p < img.data.size(); ++p) {
      err += std::norm(img.data[p] - truth.data[p]);
      ref += std::norm(truth.data[p]);
    }
    REQUIRE(err / ref < 0.5);  // far better than a zero image
  }

  REQUIRE(run_cli("reconstruct --method ssdu --in " + problem + " --out " +
                  tmp.sub("s.ssrc")) == 4);
  REQUIRE(run_cli("reconstruct --method warp --in " + problem + " --out " +
                  tmp.sub("w.ssrc")) == 4);
  REQUIRE(run_cli("reconstruct --method cgsense --in " + tmp.sub("nope.ssrc") + " --out " +
                  tmp.sub("x.ssrc")) != 0);
}

TEST_CASE("tune writes a score table and a selected value from the grid") {
  TempDir tmp;
  write_file(tmp.sub("sim.cfg"), kSimConfig);
  REQUIRE(run_cli("simulate --config " + tmp.sub("sim.cfg") + " --out " + tmp.sub("sim")) == 0);
  fs::create_directories(tmp.sub("data"));
  fs::copy_file(tmp.sub("sim") + "/retrospective.ssrc", tmp.sub("data") + "/p0.ssrc");

  write_file(tmp.sub("tune.cfg"), "tune.splits = 3\ncs.iterations = 10\n");
  REQUIRE(run_cli("tune --method cs --data " + tmp.sub("data") +
                  " --grid 0.0001,0.01 --out " + tmp.sub("tuned") + " --config " +
                  tmp.sub("tune.cfg")) == 0);
  REQUIRE(fs::exists(tmp.sub("tuned") + "/tune_table.csv"));
  double selected = std::stod(read_text(tmp.sub("tuned") + "/tune_selected.txt"));
  REQUIRE((selected == 0.0001 || selected == 0.01));

  REQUIRE(run_cli("tune --method cgsense --data " + tmp.sub("data") +
                  " --grid 0.1,1 --out " + tmp.sub("t2")) == 4);
}

TEST_CASE("train then reconstruct with the learned ssdu parameters") {
  TempDir tmp;
  write_file(tmp.sub("sim.cfg"), kSimConfig);
  REQUIRE(run_cli("simulate --config " + tmp.sub("sim.cfg") + " --out " + tmp.sub("sim")) == 0);
  fs::create_directories(tmp.sub("data"));
  fs::copy_file(tmp.sub("sim") + "/retrospective.ssrc", tmp.sub("data") + "/p0.ssrc");

  const char* ssdu_cfg =
      "ssdu.unrolls = 2\n"
      "ssdu.epochs = 2\n"
      "ssdu.stages = 2\n"
      "ssdu.channels = 4\n"
      "ssdu.dc_cg_iters = 8\n";
  write_file(tmp.sub("ssdu.cfg"), ssdu_cfg);
  REQUIRE(run_cli("train --method ssdu --data " + tmp.sub("data") + " --out " +
                  tmp.sub("model") + " --config " + tmp.sub("ssdu.cfg")) == 0);
  REQUIRE(fs::exists(tmp.sub("model") + "/ssdu_params.ssrc"));
  std::string loss_csv = read_text(tmp.sub("model") + "/train_loss.csv");
  REQUIRE(loss_csv.rfind("epoch,loss", 0) == 0);

  REQUIRE(run_cli("reconstruct --method ssdu --in " + tmp.sub("data") + "/p0.ssrc" +
                  " --out " + tmp.sub("ssdu.ssrc") + " --params " + tmp.sub("model") +
                  "/ssdu_params.ssrc --config " + tmp.sub("ssdu.cfg")) == 0);
  ComplexImage img = decode_image(
      container_load(tmp.sub("ssdu.ssrc")).find("IMG ")->payload);
  REQUIRE(img.height == 32);

  REQUIRE(run_cli("train --method dd --data " + tmp.sub("data") + " --out " +
                  tmp.sub("m2")) == 4);
}

TEST_CASE("evaluate: full-reference metrics with pairwise significance table") {
  TempDir tmp;
  RealImage ref = magnitude(make_phantom(PhantomKind::shepp_logan, 64, 1).image);
  save_slice(tmp.sub("ref.ssrc"), ref);

  // four methods x eight slices with method-specific noise levels; eight
  // paired slices are the minimum where the exact two-sided p-value (2/2^n)
  // can clear the 0.05/6 Bonferroni threshold
  const std::vector<std::pair<std::string, double>> levels{
      {"alpha", 0.01}, {"beta", 0.03}, {"gamma", 0.06}, {"delta", 0.10}};
  std::string recon_flags;
  Rng rng(5);
  for (const auto& [name, sigma] : levels) {
    fs::create_directories(tmp.sub(name));
    for (int s = 0; s < 8; ++s) {
      RealImage img = ref;
      for (double& v : img.data) v = std::max(0.0, v + sigma * rng.gaussian());
      char fname[32];
      std::snprintf(fname, sizeof fname, "slice%02d.ssrc", s);
      save_slice(tmp.sub(name) + "/" + fname, img);
    }
    recon_flags += " --recon " + name + "=" + tmp.sub(name);
  }

  REQUIRE(run_cli("evaluate" + recon_flags + " --ref " + tmp.sub("ref.ssrc") + " --out " +
                  tmp.sub("eval")) == 0);
  for (const char* f : {"psnr.csv", "ssim.csv", "percdis.csv", "wilcoxon.csv"})
    REQUIRE(fs::exists(tmp.sub("eval") + "/" + f));

  // psnr table: 4 methods x (8 slices + mean + stddev) rows after the header
  std::string psnr_csv = read_text(tmp.sub("eval") + "/psnr.csv");
  REQUIRE(std::count(psnr_csv.begin(), psnr_csv.end(), '\n') == 1 + 4 * 10);
  REQUIRE(psnr_csv.find("alpha,mean,") != std::string::npos);
  REQUIRE(psnr_csv.find("delta,stddev,") != std::string::npos);

  // wilcoxon: 3 metrics x C(4,2)=6 pairs
  std::string wx = read_text(tmp.sub("eval") + "/wilcoxon.csv");
  REQUIRE(std::count(wx.begin(), wx.end(), '\n') == 1 + 3 * 6);
  // the cleanest vs noisiest methods must separate decisively on psnr
  REQUIRE(wx.find("psnr,alpha,delta") != std::string::npos);
  std::istringstream lines(wx);
  std::string line;
  bool found = false;
  while (std::getline(lines, line))
    if (line.rfind("psnr,alpha,delta", 0) == 0) {
      REQUIRE(line.find("significant") != std::string::npos);
      REQUIRE(line.find("not_significant") == std::string::npos);
      found = true;
    }
  REQUIRE(found);

  REQUIRE(run_cli("evaluate --recon nopath --out " + tmp.sub("e2")) == 4);
  REQUIRE(run_cli("evaluate --recon a=" + tmp.sub("alpha") + " --out " + tmp.sub("e3")) == 4);
}

TEST_CASE("evaluate --noref scores without a reference") {
  TempDir tmp;
  RealImage ref = magnitude(make_phantom(PhantomKind::shepp_logan, 64, 1).image);
  fs::create_directories(tmp.sub("m"));
  Rng rng(6);
  for (int s = 0; s < 2; ++s) {
    RealImage img = ref;
    for (double& v : img.data) v = std::max(0.0, v + 0.03 * rng.gaussian());
    save_slice(tmp.sub("m") + "/s" + std::to_string(s) + ".ssrc", img);
  }
  REQUIRE(run_cli("evaluate --recon m=" + tmp.sub("m") + " --noref --out " +
                  tmp.sub("eval")) == 0);
  REQUIRE(fs::exists(tmp.sub("eval") + "/nrjpeg.csv"));
  REQUIRE(fs::exists(tmp.sub("eval") + "/piqe.csv"));
  REQUIRE_FALSE(fs::exists(tmp.sub("eval") + "/psnr.csv"));
}

TEST_CASE("report renders panels and a summary table") {
  TempDir tmp;
  write_file(tmp.sub("sim.cfg"), kSimConfig);
  REQUIRE(run_cli("simulate --config " + tmp.sub("sim.cfg") + " --out " + tmp.sub("sim")) == 0);
  REQUIRE(run_cli("reconstruct --method cgsense --in " + tmp.sub("sim") +
                  "/retrospective.ssrc --out " + tmp.sub("sim") + "/recon_cgsense.ssrc") == 0);
  REQUIRE(run_cli("report --in " + tmp.sub("sim") + " --out " + tmp.sub("rep")) == 0);
  REQUIRE(fs::exists(tmp.sub("rep") + "/truth.pgm"));
  REQUIRE(fs::exists(tmp.sub("rep") + "/recon_cgsense.pgm"));
  std::string summary = read_text(tmp.sub("rep") + "/summary.csv");
  REQUIRE(summary.rfind("reconstruction,psnr,ssim", 0) == 0);
  REQUIRE(summary.find("recon_cgsense,") != std::string::npos);

  REQUIRE(run_cli("report --in " + tmp.sub("nowhere") + " --out " + tmp.sub("r2")) == 3);
}
