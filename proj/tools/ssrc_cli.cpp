// Command-line driver: simulate / reconstruct / tune / train / evaluate / report.
//
// Exit codes: 0 success, 1 internal error, 2 config/validation error,
// 3 i/o error, 4 usage error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "ssrc/deep_decoder.hpp"
#include "ssrc/io.hpp"
#include "ssrc/metrics.hpp"
#include "ssrc/simulation.hpp"
#include "ssrc/solvers.hpp"
#include "ssrc/ssdu.hpp"
#include "ssrc/tuner.hpp"

namespace fs = std::filesystem;
using namespace ssrc;

namespace {

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

// ---------------------------------------------------------------------------
// RunConfig: UTF-8 key=value file, '#' comments, unknown keys rejected.
// ---------------------------------------------------------------------------

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "experiment",   "phantom",      "size",         "coils",
      "acceleration", "noise_sigma",  "mask_type",    "acs_half",
      "turbo_factor", "decay_tau",    "ordering",     "seed",
      "crop",         "cg.iterations", "cg.tol",
      "cs.lambda",    "cs.iterations", "cs.levels",   "cs.step",
      "dd.preset",    "dd.iterations", "dd.lr",
      "ssdu.unrolls", "ssdu.epochs",  "ssdu.lr",      "ssdu.split_fraction",
      "ssdu.stages",  "ssdu.channels", "ssdu.dc_cg_iters", "ssdu.dc_lambda_init",
      "tune.splits",
  };
  return keys;
}

struct RunConfig {
  std::map<std::string, std::string> kv;
  std::string resolved;  // canonical serialized form

  bool has(const std::string& k) const { return kv.count(k) != 0; }
  std::string str(const std::string& k, const std::string& dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : it->second;
  }
  double num(const std::string& k, double dflt) const {
    auto it = kv.find(k);
    if (it == kv.end()) return dflt;
    try {
      size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw CliError(2, "config: key '" + k + "' is not a number: " + it->second);
    }
  }
  int integer(const std::string& k, int dflt) const {
    double v = num(k, dflt);
    if (v != std::floor(v)) throw CliError(2, "config: key '" + k + "' must be an integer");
    return int(v);
  }
  uint64_t seed() const { return uint64_t(num("seed", 1)); }
};

RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CliError(3, "cannot open config file " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CliError(2, "config: line " + std::to_string(lineno) + " is not key=value");
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    auto vfirst = val.find_first_not_of(" \t");
    val = vfirst == std::string::npos ? "" : val.substr(vfirst);
    if (!known_config_keys().count(key))
      throw CliError(2, "config: unknown key '" + key + "'");
    cfg.kv[key] = val;
  }
  std::ostringstream out;
  for (const auto& [k, v] : cfg.kv) out << k << "=" << v << "\n";
  cfg.resolved = out.str();
  return cfg;
}

CgConfig cg_config(const RunConfig& c) {
  CgConfig g;
  g.max_iters = c.integer("cg.iterations", g.max_iters);
  g.tol = c.num("cg.tol", g.tol);
  return g;
}

CsConfig cs_config(const RunConfig& c) {
  CsConfig g;
  g.lambda = c.num("cs.lambda", g.lambda);
  g.max_iters = c.integer("cs.iterations", g.max_iters);
  g.wavelet_levels = c.integer("cs.levels", g.wavelet_levels);
  g.step = c.num("cs.step", g.step);
  return g;
}

SsduConfig ssdu_config(const RunConfig& c) {
  SsduConfig g;
  g.unrolls = c.integer("ssdu.unrolls", g.unrolls);
  g.epochs = c.integer("ssdu.epochs", g.epochs);
  g.learning_rate = c.num("ssdu.lr", g.learning_rate);
  g.split_theta_fraction = c.num("ssdu.split_fraction", g.split_theta_fraction);
  g.unet_stages = c.integer("ssdu.stages", g.unet_stages);
  g.unet_base_channels = c.integer("ssdu.channels", g.unet_base_channels);
  g.dc_cg_iters = c.integer("ssdu.dc_cg_iters", g.dc_cg_iters);
  g.dc_lambda_init = c.num("ssdu.dc_lambda_init", g.dc_lambda_init);
  return g;
}

// ---------------------------------------------------------------------------
// Artifact helpers
// ---------------------------------------------------------------------------

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError(3, "cannot create output directory " + dir);
}

struct Manifest {
  std::string dir;
  std::vector<std::pair<std::string, uint64_t>> entries;

  void add(const std::string& path) {
    entries.emplace_back(fs::path(path).filename().string(), file_fnv1a(path));
  }
  void write() const {
    std::ofstream f(dir + "/manifest.txt");
    if (!f) throw CliError(3, "cannot write manifest in " + dir);
    for (const auto& [name, hash] : entries) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)hash);
      f << name << " " << buf << "\n";
    }
  }
};

std::vector<std::pair<std::string, std::string>> base_meta(const RunConfig& cfg,
                                                           const std::string& command) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a(cfg.resolved));
  return {{"command", command},
          {"seed", std::to_string(cfg.seed())},
          {"config_hash", buf}};
}

void write_resolved_config(const RunConfig& cfg, const std::string& dir, Manifest& mf) {
  std::string path = dir + "/config.resolved.txt";
  std::ofstream f(path);
  if (!f) throw CliError(3, "cannot write " + path);
  f << cfg.resolved;
  f.close();
  mf.add(path);
}

ReconProblem load_problem(const std::string& path) {
  ContainerData c = container_load(path);
  for (const auto& w : c.warnings) std::cerr << "warning: " << path << ": " << w << "\n";
  const Section* k = c.find("KSPC");
  const Section* m = c.find("MASK");
  const Section* s = c.find("MAPS");
  if (!k || !m || !s)
    throw CliError(2, path + ": container lacks k-space, mask, or maps sections");
  ReconProblem p{decode_kspace(k->payload), decode_mask(m->payload), decode_maps(s->payload)};
  auto rep = validate(p);
  if (!rep.empty()) throw CliError(2, path + ": invalid problem: " + rep.front());
  return p;
}

ComplexImage load_image(const std::string& path) {
  ContainerData c = container_load(path);
  const Section* s = c.find("IMG ");
  if (!s) throw CliError(2, path + ": container has no image section");
  return decode_image(s->payload);
}

std::vector<std::string> list_containers(const std::string& dir_or_file) {
  if (!fs::exists(dir_or_file)) throw CliError(3, "no such path: " + dir_or_file);
  if (fs::is_regular_file(dir_or_file)) return {dir_or_file};
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir_or_file))
    if (e.is_regular_file() && e.path().extension() == ".ssrc") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  RunConfig cfg = parse_config(config_path);
  ensure_dir(out_dir);
  Manifest mf{out_dir, {}};

  const int size = cfg.integer("size", 64);
  const int coils = cfg.integer("coils", 8);
  const double accel = cfg.num("acceleration", 5.0);
  const double sigma = cfg.num("noise_sigma", 0.0);
  const int acs_half = cfg.integer("acs_half", size / 16);
  const int turbo = cfg.integer("turbo_factor", std::max(1, size / 4));
  const double tau = cfg.num("decay_tau", 0.0);  // 0 -> turbo/2 default
  const uint64_t seed = cfg.seed();

  Phantom ph = make_phantom(phantom_kind_from_string(cfg.str("phantom", "shepp_logan")), size,
                            mix_seed(seed, 1));
  SensitivityMaps maps = simulate_coils(coils, size, mix_seed(seed, 2));
  AcsRect acs{acs_half, acs_half};

  SamplingMask mask;
  std::string mask_type = cfg.str("mask_type", "poisson");
  if (mask_type == "poisson")
    mask = poisson_disk_mask(size, accel, acs, mix_seed(seed, 3));
  else if (mask_type == "variable_density")
    mask = variable_density_mask(size, accel, acs, 2.0, mix_seed(seed, 3));
  else
    throw CliError(2, "config: unknown mask_type '" + mask_type + "'");

  EchoOrdering ordering = echo_ordering_from_string(cfg.str("ordering", "center_out"));
  EchoTrainSchedule sched = echo_train_schedule(mask, turbo, ordering, mix_seed(seed, 4), tau);

  SamplingMask full(size, size);
  full.acs = acs;
  std::fill(full.values.begin(), full.values.end(), uint8_t(1));

  MultiCoilKSpace y_full = acquire(ph, maps, full, sigma, nullptr, mix_seed(seed, 5));
  MultiCoilKSpace y_retro = restrict_kspace(y_full, mask);
  MultiCoilKSpace y_prosp = acquire(ph, maps, mask, sigma, &sched, mix_seed(seed, 5));

  auto meta = base_meta(cfg, "simulate");
  meta.emplace_back("phantom", ph.descriptor);
  meta.emplace_back("acceleration_achieved", std::to_string(mask.acceleration()));
  meta.emplace_back("turbo_factor", std::to_string(turbo));
  meta.emplace_back("decay_tau", std::to_string(sched.decay_tau));

  auto save = [&](const std::string& name, std::vector<Section> secs) {
    auto m = meta;
    m.emplace_back("artifact", name);
    secs.push_back(make_section("META", encode_meta(m)));
    std::string path = out_dir + "/" + name;
    container_save(path, secs);
    mf.add(path);
  };

  save("truth.ssrc", {make_section("IMG ", encode_image(ph.image)),
                      make_section("MAPS", encode_maps(maps))});
  save("full.ssrc", {make_section("KSPC", encode_kspace(y_full)),
                     make_section("MASK", encode_mask(full)),
                     make_section("MAPS", encode_maps(maps))});
  save("retrospective.ssrc", {make_section("KSPC", encode_kspace(y_retro)),
                              make_section("MASK", encode_mask(mask)),
                              make_section("MAPS", encode_maps(maps))});
  save("prospective.ssrc", {make_section("KSPC", encode_kspace(y_prosp)),
                            make_section("MASK", encode_mask(mask)),
                            make_section("MAPS", encode_maps(maps))});

  {  // schedule table: train, echo, row, col
    std::vector<std::vector<std::string>> rows;
    for (size_t t = 0; t < sched.trains.size(); ++t)
      for (size_t e = 0; e < sched.trains[t].size(); ++e) {
        size_t p = sched.trains[t][e];
        rows.push_back({std::to_string(t), std::to_string(e),
                        std::to_string(p / size_t(size)), std::to_string(p % size_t(size))});
      }
    std::string path = out_dir + "/schedule.csv";
    write_csv(path, {"train", "echo", "row", "col"}, rows);
    mf.add(path);
  }

  write_resolved_config(cfg, out_dir, mf);
  mf.write();
  return 0;
}

// ---------------------------------------------------------------------------
// reconstruct
// ---------------------------------------------------------------------------

int cmd_reconstruct(const std::string& method, const std::string& in_path,
                    const std::string& out_path, const std::string& params_path,
                    const std::string& config_path) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : parse_config(config_path);
  ReconProblem prob = load_problem(in_path);

  auto t0 = std::chrono::steady_clock::now();
  ComplexImage img;
  if (method == "cgsense") {
    img = cg_sense(prob, cg_config(cfg));
  } else if (method == "cs") {
    img = cs_l1wavelet(prob, cs_config(cfg));
  } else if (method == "deepdecoder") {
    DecoderArch arch = decoder_preset(cfg.str("dd.preset", "desk"));
    if (arch.output_h() != prob.mask.height) {
      // scale the desk preset's latent to the problem size
      arch.latent_h = prob.mask.height >> arch.num_layers;
      arch.latent_w = prob.mask.width >> arch.num_layers;
      if (arch.output_h() != prob.mask.height || arch.output_w() != prob.mask.width)
        throw CliError(2, "deepdecoder: image size not a 2^layers multiple of a latent size");
    }
    std::optional<NetworkParams> warm;
    if (!params_path.empty()) {
      ContainerData c = container_load(params_path);
      const Section* s = c.find("PRM ");
      if (!s) throw CliError(2, params_path + ": no parameter section");
      warm = decode_params(s->payload);
    }
    img = deep_decoder_fit(prob, arch, cfg.integer("dd.iterations", 2000), warm,
                           cfg.num("dd.lr", 0.01))
              .image;
  } else if (method == "ssdu") {
    if (params_path.empty()) throw CliError(4, "ssdu requires --params <model container>");
    ContainerData c = container_load(params_path);
    const Section* s = c.find("PRM ");
    if (!s) throw CliError(2, params_path + ": no parameter section");
    img = ssdu_infer(decode_params(s->payload), prob, ssdu_config(cfg));
  } else {
    throw CliError(4, "unknown method '" + method + "'");
  }
  auto t1 = std::chrono::steady_clock::now();
  double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  auto meta = base_meta(cfg, "reconstruct");
  meta.emplace_back("method", method);
  meta.emplace_back("input", in_path);
  // timing goes to the console, not the container: reruns with the same
  // config and seed must produce bitwise-identical outputs
  std::cout << "reconstruct " << method << ": " << ms << " ms\n";
  container_save(out_path, {make_section("IMG ", encode_image(img)),
                            make_section("META", encode_meta(meta))});
  return 0;
}

// ---------------------------------------------------------------------------
// tune / train
// ---------------------------------------------------------------------------

TuneGrid parse_grid(const std::string& spec, int splits) {
  // "lo,hi,n" log-spaced, or an explicit comma list "v1,v2,..."
  std::vector<double> vals;
  std::istringstream in(spec);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      vals.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw CliError(4, "bad grid token '" + tok + "'");
    }
  }
  if (vals.size() == 3 && vals[2] == std::floor(vals[2]) && vals[2] >= 2 && vals[0] < vals[1])
    return log_grid(vals[0], vals[1], int(vals[2]), splits);
  TuneGrid g;
  g.values = vals;
  g.num_splits = splits;
  return g;
}

int cmd_tune(const std::string& method, const std::string& data_dir, const std::string& grid_spec,
             const std::string& out_dir, const std::string& config_path, int jobs) {
  if (method != "cs") throw CliError(4, "tune supports --method cs");
  RunConfig cfg = config_path.empty() ? RunConfig{} : parse_config(config_path);
  auto paths = list_containers(data_dir);
  std::vector<ReconProblem> problems;
  for (const auto& p : paths) {
    ContainerData c = container_load(p);
    if (c.find("KSPC")) problems.push_back(load_problem(p));
  }
  if (problems.empty()) throw CliError(2, "no problem containers in " + data_dir);

  TuneGrid grid = parse_grid(grid_spec, cfg.integer("tune.splits", 50));
  CsConfig base = cs_config(cfg);
  auto run = [&base](const ReconProblem& pr, double lambda) {
    CsConfig c = base;
    c.lambda = lambda;
    return cs_l1wavelet(pr, c);
  };
  TuneResult res = tune_lambda(problems, grid, run, cfg.seed(), jobs);

  ensure_dir(out_dir);
  Manifest mf{out_dir, {}};
  std::vector<std::vector<std::string>> rows;
  for (size_t gi = 0; gi < grid.values.size(); ++gi) {
    std::ostringstream v, m, s;
    v << grid.values[gi];
    m << res.mean_score[gi];
    s << res.std_score[gi];
    rows.push_back({v.str(), m.str(), s.str()});
  }
  std::string table_path = out_dir + "/tune_table.csv";
  write_csv(table_path, {"value", "mean_score", "std_score"}, rows);
  mf.add(table_path);

  std::string sel_path = out_dir + "/tune_selected.txt";
  {
    std::ofstream f(sel_path);
    f << res.selected << "\n";
  }
  mf.add(sel_path);
  write_resolved_config(cfg, out_dir, mf);
  mf.write();
  std::cout << "selected " << res.selected << "\n";
  return 0;
}

int cmd_train(const std::string& method, const std::string& data_dir, const std::string& out_dir,
              const std::string& config_path) {
  if (method != "ssdu") throw CliError(4, "train supports --method ssdu");
  RunConfig cfg = config_path.empty() ? RunConfig{} : parse_config(config_path);
  auto paths = list_containers(data_dir);
  std::vector<ReconProblem> problems;
  for (const auto& p : paths) {
    ContainerData c = container_load(p);
    if (c.find("KSPC")) problems.push_back(load_problem(p));
  }
  if (problems.empty()) throw CliError(2, "no problem containers in " + data_dir);

  SsduConfig sc = ssdu_config(cfg);
  SsduTrainResult res = ssdu_train(problems, sc, cfg.seed());

  ensure_dir(out_dir);
  Manifest mf{out_dir, {}};
  auto meta = base_meta(cfg, "train");
  meta.emplace_back("method", "ssdu");
  meta.emplace_back("epochs", std::to_string(sc.epochs));
  std::string params_path = out_dir + "/ssdu_params.ssrc";
  container_save(params_path, {make_section("PRM ", encode_params(res.params)),
                               make_section("META", encode_meta(meta))});
  mf.add(params_path);

  std::vector<std::vector<std::string>> rows;
  for (size_t e = 0; e < res.epoch_loss.size(); ++e) {
    std::ostringstream v;
    v << res.epoch_loss[e];
    rows.push_back({std::to_string(e), v.str()});
  }
  std::string loss_path = out_dir + "/train_loss.csv";
  write_csv(loss_path, {"epoch", "loss"}, rows);
  mf.add(loss_path);
  write_resolved_config(cfg, out_dir, mf);
  mf.write();
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct MethodSlices {
  std::string name;
  std::vector<RealImage> slices;
};

RealImage windowed_magnitude(const ComplexImage& img, int crop) {
  RealImage m = magnitude(img);
  if (crop > 0 && crop < std::min(m.height, m.width)) m = center_crop(m, crop, crop);
  return m;
}

int cmd_evaluate(const std::vector<std::string>& recon_args, const std::string& ref_path,
                 bool noref, const std::string& out_dir, int crop) {
  if (recon_args.empty()) throw CliError(4, "evaluate needs at least one --recon method=path");
  std::vector<MethodSlices> methods;
  for (const auto& arg : recon_args) {
    auto eq = arg.find('=');
    if (eq == std::string::npos) throw CliError(4, "--recon expects method=path, got " + arg);
    MethodSlices ms;
    ms.name = arg.substr(0, eq);
    for (const auto& p : list_containers(arg.substr(eq + 1)))
      ms.slices.push_back(windowed_magnitude(load_image(p), crop));
    if (ms.slices.empty()) throw CliError(2, "no recon containers for method " + ms.name);
    methods.push_back(std::move(ms));
  }
  size_t nslices = methods.front().slices.size();
  for (const auto& ms : methods)
    if (ms.slices.size() != nslices)
      throw CliError(2, "methods have differing slice counts");

  std::vector<RealImage> refs;
  if (!noref) {
    if (ref_path.empty()) throw CliError(4, "evaluate needs --ref or --noref");
    for (const auto& p : list_containers(ref_path))
      refs.push_back(windowed_magnitude(load_image(p), crop));
    if (refs.size() == 1 && nslices > 1) refs.assign(nslices, refs.front());
    if (refs.size() != nslices) throw CliError(2, "reference slice count mismatch");
    for (const auto& ms : methods)
      for (size_t s = 0; s < nslices; ++s)
        if (ms.slices[s].height != refs[s].height || ms.slices[s].width != refs[s].width)
          throw CliError(2, "shape mismatch with reference for method " + ms.name);
  }

  ensure_dir(out_dir);
  Manifest mf{out_dir, {}};

  struct Metric {
    std::string name;
    bool higher_better;
    std::function<double(const RealImage&, const RealImage*)> eval;
  };
  FeatureExtractor fx;
  std::vector<Metric> metric_set;
  if (!noref) {
    metric_set.push_back({"psnr", true, [](const RealImage& x, const RealImage* r) {
                            return psnr(x, *r);
                          }});
    metric_set.push_back({"ssim", true, [](const RealImage& x, const RealImage* r) {
                            return ssim(x, *r);
                          }});
    metric_set.push_back({"percdis", false, [&fx](const RealImage& x, const RealImage* r) {
                            return perc_dis(x, *r, fx);
                          }});
  } else {
    metric_set.push_back({"nrjpeg", true, [](const RealImage& x, const RealImage*) {
                            return nrjpeg(x);
                          }});
    metric_set.push_back({"piqe", false, [](const RealImage& x, const RealImage*) {
                            return piqe(x);
                          }});
  }

  // per-metric CSV: method, slice_index, value (+ summary mean/stddev rows)
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  for (const auto& metric : metric_set) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& ms : methods) {
      auto& vals = values[metric.name][ms.name];
      for (size_t s = 0; s < ms.slices.size(); ++s) {
        double v = metric.eval(ms.slices[s], noref ? nullptr : &refs[s]);
        vals.push_back(v);
        std::ostringstream vs;
        vs << v;
        rows.push_back({ms.name, std::to_string(s), vs.str()});
      }
      MetricReport rep{metric.name, metric.higher_better, vals};
      std::ostringstream m, sd;
      m << rep.mean();
      sd << rep.stddev();
      rows.push_back({ms.name, "mean", m.str()});
      rows.push_back({ms.name, "stddev", sd.str()});
    }
    std::string path = out_dir + "/" + metric.name + ".csv";
    write_csv(path, {"method", "slice_index", "value"}, rows);
    mf.add(path);
  }

  // pairwise Wilcoxon signed-rank over slices, Bonferroni verdict at 0.05/6
  if (methods.size() >= 2 && nslices >= 5) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& metric : metric_set)
      for (size_t i = 0; i < methods.size(); ++i)
        for (size_t j = i + 1; j < methods.size(); ++j) {
          const auto& a = values[metric.name][methods[i].name];
          const auto& b = values[metric.name][methods[j].name];
          std::string pstr = "nan", verdict = "n/a";
          try {
            double p = wilcoxon_signed_rank(a, b);
            std::ostringstream ps;
            ps << p;
            pstr = ps.str();
            verdict = bonferroni_significant(p) ? "significant" : "not_significant";
          } catch (const std::invalid_argument&) {
            // identical series: no nonzero differences to rank
          }
          rows.push_back({metric.name, methods[i].name, methods[j].name, pstr, verdict});
        }
    std::string path = out_dir + "/wilcoxon.csv";
    write_csv(path, {"metric", "method_a", "method_b", "p_value", "verdict_0.05_over_6"}, rows);
    mf.add(path);
  }

  mf.write();
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
  if (!fs::is_directory(in_dir)) throw CliError(3, "no such directory: " + in_dir);
  ensure_dir(out_dir);
  Manifest mf{out_dir, {}};

  std::optional<RealImage> truth;
  std::string truth_path = in_dir + "/truth.ssrc";
  if (fs::exists(truth_path)) truth = magnitude(load_image(truth_path));

  std::vector<std::string> recon_paths;
  for (const auto& e : fs::directory_iterator(in_dir)) {
    std::string name = e.path().filename().string();
    if (name.rfind("recon_", 0) == 0 && e.path().extension() == ".ssrc")
      recon_paths.push_back(e.path().string());
  }
  std::sort(recon_paths.begin(), recon_paths.end());
  if (recon_paths.empty() && !truth) throw CliError(3, "no inputs in " + in_dir);

  auto emit_panel = [&](const RealImage& img, const std::string& stem) {
    double hi = *std::max_element(img.data.begin(), img.data.end());
    if (hi <= 0) hi = 1.0;
    std::string path = out_dir + "/" + stem + ".pgm";
    export_pgm(img, path, 0.0, hi);
    mf.add(path);
  };

  if (truth) emit_panel(*truth, "truth");

  std::vector<std::vector<std::string>> rows;
  for (const auto& p : recon_paths) {
    RealImage img = magnitude(load_image(p));
    std::string stem = fs::path(p).stem().string();
    emit_panel(img, stem);
    if (truth && truth->height == img.height && truth->width == img.width) {
      std::ostringstream ps, ss;
      ps << psnr(img, *truth);
      ss << ssim(img, *truth);
      rows.push_back({stem, ps.str(), ss.str()});
    } else {
      rows.push_back({stem, "n/a", "n/a"});
    }
  }
  std::string summary_path = out_dir + "/summary.csv";
  write_csv(summary_path, {"reconstruction", "psnr", "ssim"}, rows);
  mf.add(summary_path);
  mf.write();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-supervised reconstruction validation toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_path, in_path, method, params_path, data_dir, grid_spec, ref_path;
  std::vector<std::string> recon_args;
  bool noref = false;
  int jobs = 1, crop = 0;

  auto* sim = app.add_subcommand("simulate", "generate phantom, coils, mask, and acquisitions");
  sim->add_option("--config", config_path)->required();
  sim->add_option("--out", out_path)->required();

  auto* rec = app.add_subcommand("reconstruct", "run one solver on one problem container");
  rec->add_option("--method", method)->required();
  rec->add_option("--in", in_path)->required();
  rec->add_option("--out", out_path)->required();
  rec->add_option("--params", params_path);
  rec->add_option("--config", config_path);

  auto* tune = app.add_subcommand("tune", "self-supervised regularization weight selection");
  tune->add_option("--method", method)->required();
  tune->add_option("--data", data_dir)->required();
  tune->add_option("--grid", grid_spec)->required();
  tune->add_option("--out", out_path)->required();
  tune->add_option("--config", config_path);
  tune->add_option("--jobs", jobs);

  auto* train = app.add_subcommand("train", "self-supervised training");
  train->add_option("--method", method)->required();
  train->add_option("--data", data_dir)->required();
  train->add_option("--out", out_path)->required();
  train->add_option("--config", config_path);

  auto* eval = app.add_subcommand("evaluate", "score reconstructions");
  eval->add_option("--recon", recon_args)->required();
  eval->add_option("--ref", ref_path);
  eval->add_flag("--noref", noref);
  eval->add_option("--out", out_path)->required();
  eval->add_option("--crop", crop);

  auto* rep = app.add_subcommand("report", "emit image panels and a summary table");
  rep->add_option("--in", in_path)->required();
  rep->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 4;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_path);
    if (rec->parsed()) return cmd_reconstruct(method, in_path, out_path, params_path, config_path);
    if (tune->parsed()) return cmd_tune(method, data_dir, grid_spec, out_path, config_path, jobs);
    if (train->parsed()) return cmd_train(method, data_dir, out_path, config_path);
    if (eval->parsed()) return cmd_evaluate(recon_args, ref_path, noref, out_path, crop);
    if (rep->parsed()) return cmd_report(in_path, out_path);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 4;
}
