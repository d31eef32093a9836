#include "protshape/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>

#include "protshape/gvae.hpp"
#include "protshape/io.hpp"
#include "protshape/pdb_ingest.hpp"
#include "protshape/registration.hpp"
#include "protshape/resnet_warp.hpp"
#include "protshape/vmf.hpp"

namespace protshape::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitEmpty = 2;

struct RunContext {
  std::string command;
  fs::path output_dir;
  json config;
  json extra;                       // command-specific manifest payload
  std::vector<std::string> inputs;
  std::vector<fs::path> outputs;
  std::vector<std::string> warnings;

  void note_output(const fs::path& p) { outputs.push_back(p); }

  void write_manifest() {
    json m;
    m["command"] = command;
    m["config"] = config;
    m["inputs"] = inputs;
    json outs = json::array();
    for (const fs::path& p : outputs)
      outs.push_back({{"path", p.filename().string()},
                      {"fnv1a64", io::file_hash(p)}});
    m["outputs"] = outs;
    m["warnings"] = warnings;
    if (!extra.is_null()) m["details"] = extra;
    std::ofstream f(output_dir / "manifest.json");
    f << m.dump(2) << '\n';
  }
};

RunContext make_context(const std::string& command, const fs::path& output_dir) {
  RunContext ctx;
  ctx.command = command;
  ctx.output_dir = output_dir;
  fs::create_directories(output_dir);
  return ctx;
}

// Sorted for deterministic processing order.
std::vector<fs::path> gather_files(const std::vector<std::string>& inputs,
                                   const std::string& extension) {
  std::vector<fs::path> files;
  for (const std::string& input : inputs) {
    const fs::path p(input);
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == extension)
          files.push_back(entry.path());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw Error("input path does not exist: " + input);
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string frag_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frag_%06zu.csv", index);
  return buf;
}

json curve_to_json(const Curve& c) {
  json points = json::array();
  for (const Vec3& p : c.points) points.push_back({p.x(), p.y(), p.z()});
  return points;
}

Srvf load_fragment_srvf(const fs::path& path, int* n_points = nullptr) {
  const Curve c = io::read_curve_csv(path);
  if (n_points) *n_points = c.size();
  return normalize_preshape(to_srvf(c));
}

double masked_rmsd(const Curve& a, const Curve& b, const std::vector<int>& atoms) {
  double s = 0.0;
  for (int i : atoms) s += (a.points[i] - b.points[i]).squaredNorm();
  return std::sqrt(s / atoms.size());
}

// ---------------------------------------------------------------- ingest ---

int cmd_ingest(const std::vector<std::string>& inputs, const std::string& chain,
               int fragment_atoms, int stride, const fs::path& output_dir) {
  RunContext ctx = make_context("ingest", output_dir);
  ctx.inputs = inputs;
  ctx.config = {{"chain", chain},
                {"fragment_atoms", fragment_atoms},
                {"stride", stride}};

  const auto files = gather_files(inputs, ".pdb");
  json fragment_map = json::object();
  std::size_t next_fragment = 0;
  for (const fs::path& file : files) {
    std::ifstream in(file);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    try {
      const auto records = parse_pdb(text);
      const BackboneChain bb = extract_backbone(records, chain.at(0));
      if (bb.dropped_incomplete > 0)
        ctx.warnings.push_back(file.filename().string() + ": dropped " +
                               std::to_string(bb.dropped_incomplete) +
                               " incomplete residue(s)");
      const FragmentSet set = fragment(bb, fragment_atoms, stride);
      if (set.chain_too_short)
        ctx.warnings.push_back(file.filename().string() + ": chain shorter than one fragment");
      for (std::size_t i = 0; i < set.fragments.size(); ++i) {
        const std::string name = frag_name(next_fragment);
        io::write_curve_csv(output_dir / name, set.fragments[i]);
        ctx.note_output(output_dir / name);
        const int start = set.start_residues[i];
        fragment_map[name] = {
            {"source", file.string()},
            {"chain", chain},
            {"first_residue", bb.residues[start].res_seq},
            {"last_residue",
             bb.residues[start + fragment_atoms / 3 - 1].res_seq}};
        ++next_fragment;
      }
    } catch (const Error& e) {
      ctx.warnings.push_back(file.filename().string() + ": " + e.what());
    }
  }
  ctx.extra["fragments"] = fragment_map;
  ctx.write_manifest();
  std::cout << "wrote " << next_fragment << " fragment(s) to " << output_dir
            << "\n";
  return next_fragment == 0 ? kExitEmpty : kExitOk;
}

// -------------------------------------------------------------- distance ---

int cmd_distance(const std::vector<std::string>& inputs, const std::string& method,
                 const fs::path& output_dir, int epochs, double lr,
                 int resnet_blocks, int resnet_channels, std::uint64_t seed) {
  RunContext ctx = make_context("distance", output_dir);
  ctx.inputs = inputs;
  ctx.config = {{"method", method}, {"epochs", epochs}, {"lr", lr},
                {"resnet_blocks", resnet_blocks},
                {"resnet_channels", resnet_channels}, {"seed", seed}};

  const auto files = gather_files(inputs, ".csv");
  if (files.empty()) {
    ctx.write_manifest();
    return kExitEmpty;
  }
  std::vector<std::string> ids;
  std::vector<Srvf> srvfs;
  for (const fs::path& f : files) {
    ids.push_back(f.stem().string());
    srvfs.push_back(load_fragment_srvf(f));
    if (srvfs.back().grid_size() != srvfs.front().grid_size())
      throw GridMismatch(f.string() + ": fragment grid differs from the first fragment");
  }

  const std::size_t n = srvfs.size();
  std::vector<std::vector<double>> matrix(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double theta;
      if (method == "dp") {
        theta = shape_distance(srvfs[i], srvfs[j]);
      } else {
        ResNetConfig cfg;
        cfg.grid = srvfs[i].grid_size();
        cfg.blocks = resnet_blocks;
        cfg.channels = resnet_channels;
        cfg.seed = seed;
        ResNetTW model = ResNetTW::build(cfg);
        FitOptions opts;
        opts.epochs = epochs;
        opts.lr = lr;
        opts.target_cost_ratio = 0.05;
        theta = fit_pair(model, srvfs[i], srvfs[j], opts).theta;
      }
      matrix[i][j] = matrix[j][i] = theta;
    }
  }
  io::write_matrix_csv(output_dir / "distances.csv", ids, matrix);
  ctx.note_output(output_dir / "distances.csv");
  ctx.write_manifest();
  return kExitOk;
}

// -------------------------------------------------------------- geodesic ---

int cmd_geodesic(const std::vector<std::string>& inputs, const std::string& space,
                 int steps, const std::string& checkpoint,
                 const fs::path& output_dir) {
  RunContext ctx = make_context("geodesic", output_dir);
  ctx.inputs = inputs;
  ctx.config = {{"space", space}, {"steps", steps}, {"checkpoint", checkpoint}};
  if (inputs.size() != 2) throw Error("geodesic needs exactly two --input fragments");

  const Srvf q1 = load_fragment_srvf(inputs[0]);
  const Srvf q2 = load_fragment_srvf(inputs[1]);

  std::vector<Srvf> path;
  json details;
  if (space == "preshape") {
    path = geodesic_path(q1, q2, steps);
  } else if (space == "shape") {
    const RegistrationResult reg = register_pair(q1, q2);
    details["theta"] = reg.theta;
    path = geodesic_path(q1, normalize_preshape(reg.q2_star), steps);
  } else if (space == "latent") {
    if (checkpoint.empty()) throw Error("latent geodesics need --checkpoint");
    const GVaeModel model = GVaeModel::load(checkpoint);
    const LatentPath lp = latent_geodesic(model, q1, q2, steps);
    path = lp.srvfs;
    json norms = json::array();
    for (const auto& z : lp.latents) norms.push_back(z.norm());
    details["latent_norms"] = norms;
  } else {
    throw Error("unknown space: " + space);
  }

  json steps_json = json::array();
  json chords = json::array();
  for (std::size_t k = 0; k < path.size(); ++k) {
    steps_json.push_back({{"curve", curve_to_json(from_srvf(path[k]))}});
    if (k > 0)
      chords.push_back(preshape_distance(normalize_preshape(path[k - 1]),
                                         normalize_preshape(path[k])));
  }
  details["space"] = space;
  details["steps"] = steps_json;
  details["chord_distances"] = chords;
  std::ofstream f(output_dir / "path.json");
  f << details.dump(2) << '\n';
  f.close();
  ctx.note_output(output_dir / "path.json");
  ctx.write_manifest();
  return kExitOk;
}

// -------------------------------------------------------------- register ---

int cmd_register(const std::vector<std::string>& inputs, const std::string& method,
                 const fs::path& output_dir, int epochs, double lr,
                 int resnet_blocks, int resnet_channels, std::uint64_t seed) {
  RunContext ctx = make_context("register", output_dir);
  ctx.inputs = inputs;
  ctx.config = {{"method", method}, {"epochs", epochs}, {"lr", lr},
                {"resnet_blocks", resnet_blocks},
                {"resnet_channels", resnet_channels}, {"seed", seed}};
  if (inputs.size() != 2) throw Error("register needs exactly two --input fragments");

  const Srvf q1 = load_fragment_srvf(inputs[0]);
  const Srvf q2 = load_fragment_srvf(inputs[1]);

  json report;
  report["method"] = method;
  if (method == "dp") {
    const RegistrationResult reg = register_pair(q1, q2);
    report["cost"] = reg.cost;
    report["theta"] = reg.theta;
    report["iterations"] = reg.iterations;
    report["cost_history"] = reg.cost_history;
    report["roughness"] = warp_roughness(reg.warp);
    report["warp"] = reg.warp.values;
  } else if (method == "resnet") {
    ResNetConfig cfg;
    cfg.grid = q1.grid_size();
    cfg.blocks = resnet_blocks;
    cfg.channels = resnet_channels;
    cfg.seed = seed;
    FitOptions opts;
    opts.epochs = epochs;
    opts.lr = lr;
    opts.target_cost_ratio = 0.05;
    const MethodComparison cmp = compare_with_dp(cfg, q1, q2, opts);
    report["cost"] = cmp.resnet.final_cost;
    report["identity_cost"] = cmp.resnet.identity_cost;
    report["theta"] = cmp.resnet.theta;
    report["epochs_run"] = cmp.resnet.cost_history.size();
    report["cost_history"] = cmp.resnet.cost_history;
    report["roughness"] = cmp.resnet.roughness;
    report["warp"] = cmp.resnet.warp.values;
    report["comparison"] = {{"dp_cost", cmp.dp_cost},
                            {"dp_theta", cmp.dp_theta},
                            {"dp_roughness", cmp.dp_roughness}};
  } else {
    throw Error("unknown method: " + method);
  }
  std::ofstream f(output_dir / "report.json");
  f << report.dump(2) << '\n';
  f.close();
  ctx.note_output(output_dir / "report.json");
  ctx.write_manifest();
  return kExitOk;
}

// ----------------------------------------------------------------- train ---

int cmd_train(const std::vector<std::string>& inputs, const fs::path& output_dir,
              double kappa, int latent_dim, int epochs, int batch_size,
              double lr, std::uint64_t seed) {
  RunContext ctx = make_context("train", output_dir);
  ctx.inputs = inputs;
  ctx.config = {{"kappa", kappa},       {"latent_dim", latent_dim},
                {"epochs", epochs},     {"batch_size", batch_size},
                {"lr", lr},             {"seed", seed}};

  const auto files = gather_files(inputs, ".csv");
  if (files.empty()) {
    ctx.write_manifest();
    return kExitEmpty;
  }
  std::vector<Curve> fragments;
  for (const fs::path& f : files) fragments.push_back(io::read_curve_csv(f));
  const PreparedDataset prepared = prepare_dataset(fragments);

  GVaeConfig cfg;
  cfg.grid = prepared.srvfs.front().grid_size();
  cfg.latent_dim = latent_dim;
  cfg.kappa = kappa;
  cfg.seed = seed;
  GVaeModel model = GVaeModel::build(cfg);
  model.reference = prepared.reference;
  model.mean_length = prepared.mean_length;

  TrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = batch_size;
  opts.lr = lr;
  opts.seed = seed;
  const TrainHistory history = train(model, prepared.srvfs, opts);

  model.save((output_dir / "gvae.ckpt").string());
  ctx.note_output(output_dir / "gvae.ckpt");
  json h;
  h["epoch_loss"] = history.epoch_loss;
  h["epoch_recon"] = history.epoch_recon;
  h["kl"] = history.kl;
  h["best_epoch"] = history.best_epoch;
  h["fragments"] = files.size();
  std::ofstream f(output_dir / "history.json");
  f << h.dump(2) << '\n';
  f.close();
  ctx.note_output(output_dir / "history.json");
  ctx.write_manifest();
  return kExitOk;
}

// -------------------------------------------------------------- generate ---

int cmd_generate(const std::string& checkpoint, int n,
                 const std::vector<std::string>& corpus_inputs,
                 const fs::path& output_dir, std::uint64_t seed) {
  RunContext ctx = make_context("generate", output_dir);
  ctx.inputs = corpus_inputs;
  ctx.inputs.push_back(checkpoint);
  ctx.config = {{"checkpoint", checkpoint}, {"n", n}, {"seed", seed}};

  const GVaeModel model = GVaeModel::load(checkpoint);
  std::mt19937_64 rng(seed);
  const std::vector<Curve> curves = generate(model, n, rng);

  for (int i = 0; i < n; ++i) {
    char base[32];
    std::snprintf(base, sizeof(base), "gen_%03d", i);
    Curve scaled = curves[i];
    for (Vec3& p : scaled.points) p *= model.mean_length;
    io::write_curve_csv(output_dir / (std::string(base) + ".csv"), scaled);
    ctx.note_output(output_dir / (std::string(base) + ".csv"));
    io::write_backbone_pdb(output_dir / (std::string(base) + ".pdb"), scaled);
    ctx.note_output(output_dir / (std::string(base) + ".pdb"));
  }

  // Novelty: nearest training fragment by shape-space distance.
  if (!corpus_inputs.empty() && n > 0) {
    const auto files = gather_files(corpus_inputs, ".csv");
    std::vector<std::string> ids;
    std::vector<Srvf> corpus;
    for (const fs::path& f : files) {
      ids.push_back(f.stem().string());
      corpus.push_back(load_fragment_srvf(f));
    }
    std::ofstream nf(output_dir / "novelty.csv");
    nf << "sample,nearest,shape_distance\n";
    nf.precision(17);
    for (int i = 0; i < n; ++i) {
      const Srvf qs = normalize_preshape(to_srvf(curves[i]));
      double best = std::numeric_limits<double>::infinity();
      std::string best_id;
      for (std::size_t c = 0; c < corpus.size(); ++c) {
        const double d = shape_distance(qs, corpus[c]);
        if (d < best) {
          best = d;
          best_id = ids[c];
        }
      }
      char base[32];
      std::snprintf(base, sizeof(base), "gen_%03d", i);
      nf << base << ',' << best_id << ',' << best << '\n';
    }
    nf.close();
    ctx.note_output(output_dir / "novelty.csv");
  }
  ctx.write_manifest();
  return n == 0 ? kExitEmpty : kExitOk;
}

// --------------------------------------------------------------- inpaint ---

int cmd_inpaint(const std::string& checkpoint, const std::string& input,
                int mask_residues, int iters, double lr,
                const fs::path& output_dir, std::uint64_t seed) {
  RunContext ctx = make_context("inpaint", output_dir);
  ctx.inputs = {input, checkpoint};
  ctx.config = {{"checkpoint", checkpoint}, {"mask_residues", mask_residues},
                {"iters", iters},           {"lr", lr},
                {"seed", seed}};

  const GVaeModel model = GVaeModel::load(checkpoint);
  const Curve truth = io::read_curve_csv(input);
  const int n_residues = truth.size() / 3;
  if (mask_residues <= 0 || mask_residues >= n_residues)
    throw Error("mask_residues must be in [1, residues-1]");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> start_pick(0, n_residues - mask_residues);
  const int start = start_pick(rng);
  std::set<int> mask;
  for (int r = start; r < start + mask_residues; ++r) mask.insert(r);

  InpaintOptions opts;
  opts.iters = iters;
  opts.lr = lr;
  const InpaintResult result = inpaint(model, truth, mask, opts, rng);

  io::write_curve_csv(output_dir / "completed.csv", result.completed);
  ctx.note_output(output_dir / "completed.csv");
  io::write_curve_csv(output_dir / "baseline.csv", result.baseline);
  ctx.note_output(output_dir / "baseline.csv");

  json report;
  report["mask_first_residue"] = start;
  report["mask_residues"] = mask_residues;
  report["masked_atoms"] = result.masked_atoms.size();
  report["rmsd_model"] = masked_rmsd(result.completed, truth, result.masked_atoms);
  report["rmsd_baseline"] = masked_rmsd(result.baseline, truth, result.masked_atoms);
  std::ofstream f(output_dir / "report.json");
  f << report.dump(2) << '\n';
  f.close();
  ctx.note_output(output_dir / "report.json");
  ctx.write_manifest();
  return kExitOk;
}

// ------------------------------------------------------------ vmf-sample ---

int cmd_vmf_sample(int m, double kappa, int n, const fs::path& output_dir,
                   std::uint64_t seed) {
  RunContext ctx = make_context("vmf-sample", output_dir);
  ctx.config = {{"m", m}, {"kappa", kappa}, {"n", n}, {"seed", seed}};

  std::mt19937_64 rng(seed);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
  mu[0] = 1.0;
  const vmf::VmfParams params{mu, kappa};

  std::ofstream f(output_dir / "samples.csv");
  f << "index";
  for (int d = 0; d < m; ++d) f << ",z" << d;
  f << '\n';
  f.precision(17);
  double mean_dot = 0.0;
  Eigen::VectorXd mean_vec = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = vmf::sample(params, rng);
    f << i;
    for (int d = 0; d < m; ++d) f << ',' << z[d];
    f << '\n';
    mean_dot += mu.dot(z) / n;
    mean_vec += z / n;
  }
  f.close();
  ctx.note_output(output_dir / "samples.csv");

  json stats;
  stats["empirical_mean_dot"] = mean_dot;
  stats["analytic_mean_resultant_length"] = vmf::mean_resultant_length(m, kappa);
  stats["mean_vector_norm"] = mean_vec.norm();
  stats["kl_to_uniform"] = vmf::kl_to_uniform(m, kappa);
  std::ofstream sf(output_dir / "stats.json");
  sf << stats.dump(2) << '\n';
  sf.close();
  ctx.note_output(output_dir / "stats.json");
  ctx.write_manifest();
  return n == 0 ? kExitEmpty : kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Elastic shape analysis and generation of protein backbone curves"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Extract backbone fragments from PDB files");
  std::vector<std::string> ingest_inputs;
  std::string ingest_chain = "A";
  int ingest_atoms = 144, ingest_stride = 3;
  std::string ingest_out;
  ingest->add_option("--input", ingest_inputs, "PDB file(s) or directories")->required();
  ingest->add_option("--chain", ingest_chain, "Chain id");
  ingest->add_option("--fragment-atoms", ingest_atoms, "Atoms per fragment");
  ingest->add_option("--stride", ingest_stride, "Window stride in atoms");
  ingest->add_option("--output-dir", ingest_out, "Output directory")->required();

  // distance
  auto* distance = app.add_subcommand("distance", "Pairwise shape distances");
  std::vector<std::string> dist_inputs;
  std::string dist_method = "dp", dist_out;
  int dist_epochs = 500, dist_blocks = 8, dist_channels = 32;
  double dist_lr = 0.01;
  std::uint64_t dist_seed = 0;
  distance->add_option("--input", dist_inputs, "Fragment CSV files or directories")->required();
  distance->add_option("--method", dist_method, "dp or resnet")
      ->check(CLI::IsMember({"dp", "resnet"}));
  distance->add_option("--epochs", dist_epochs, "ResNet fit epochs");
  distance->add_option("--lr", dist_lr, "ResNet fit learning rate");
  distance->add_option("--resnet-blocks", dist_blocks, "ResNet blocks");
  distance->add_option("--resnet-channels", dist_channels, "ResNet channels");
  distance->add_option("--seed", dist_seed, "RNG seed");
  distance->add_option("--output-dir", dist_out, "Output directory")->required();

  // geodesic
  auto* geodesic = app.add_subcommand("geodesic", "Geodesic path between two fragments");
  std::vector<std::string> geo_inputs;
  std::string geo_space = "preshape", geo_ckpt, geo_out;
  int geo_steps = 7;
  geodesic->add_option("--input", geo_inputs, "Two fragment CSVs")->required();
  geodesic->add_option("--space", geo_space, "preshape, shape or latent")
      ->check(CLI::IsMember({"preshape", "shape", "latent"}));
  geodesic->add_option("--steps", geo_steps, "Samples along the path");
  geodesic->add_option("--checkpoint", geo_ckpt, "Model checkpoint (latent mode)");
  geodesic->add_option("--output-dir", geo_out, "Output directory")->required();

  // register
  auto* reg = app.add_subcommand("register", "Align one fragment to another");
  std::vector<std::string> reg_inputs;
  std::string reg_method = "dp", reg_out;
  int reg_epochs = 1200, reg_blocks = 8, reg_channels = 32;
  double reg_lr = 0.01;
  std::uint64_t reg_seed = 0;
  reg->add_option("--input", reg_inputs, "Two fragment CSVs")->required();
  reg->add_option("--method", reg_method, "dp or resnet")
      ->check(CLI::IsMember({"dp", "resnet"}));
  reg->add_option("--epochs", reg_epochs, "ResNet fit epochs");
  reg->add_option("--lr", reg_lr, "ResNet fit learning rate");
  reg->add_option("--resnet-blocks", reg_blocks, "ResNet blocks");
  reg->add_option("--resnet-channels", reg_channels, "ResNet channels");
  reg->add_option("--seed", reg_seed, "RNG seed");
  reg->add_option("--output-dir", reg_out, "Output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the generative model");
  std::vector<std::string> train_inputs;
  std::string train_out;
  double train_kappa = 0.0, train_lr = 1e-3;
  int train_latent = 16, train_epochs = 200, train_batch = 32;
  std::uint64_t train_seed = 0;
  train_cmd->add_option("--input", train_inputs, "Fragment CSV directory")->required();
  train_cmd->add_option("--kappa", train_kappa, "Posterior concentration")->required();
  train_cmd->add_option("--latent-dim", train_latent, "Latent dimension");
  train_cmd->add_option("--epochs", train_epochs, "Training epochs");
  train_cmd->add_option("--batch-size", train_batch, "Mini-batch size");
  train_cmd->add_option("--lr", train_lr, "Learning rate");
  train_cmd->add_option("--seed", train_seed, "RNG seed")->required();
  train_cmd->add_option("--output-dir", train_out, "Output directory")->required();

  // generate
  auto* gen = app.add_subcommand("generate", "Sample new backbones from a checkpoint");
  std::string gen_ckpt, gen_out;
  std::vector<std::string> gen_corpus;
  int gen_n = 8;
  std::uint64_t gen_seed = 0;
  gen->add_option("--checkpoint", gen_ckpt, "Model checkpoint")->required();
  gen->add_option("--n", gen_n, "Number of samples");
  gen->add_option("--input", gen_corpus, "Training fragments for the novelty scan");
  gen->add_option("--seed", gen_seed, "RNG seed")->required();
  gen->add_option("--output-dir", gen_out, "Output directory")->required();

  // inpaint
  auto* inp = app.add_subcommand("inpaint", "Mask and repair a fragment");
  std::string inp_ckpt, inp_input, inp_out;
  int inp_mask = 10, inp_iters = 300;
  double inp_lr = 0.05;
  std::uint64_t inp_seed = 0;
  inp->add_option("--checkpoint", inp_ckpt, "Model checkpoint")->required();
  inp->add_option("--input", inp_input, "Fragment CSV (the uncorrupted truth)")->required();
  inp->add_option("--mask-residues", inp_mask, "Contiguous residues to mask");
  inp->add_option("--iters", inp_iters, "Latent optimization steps");
  inp->add_option("--lr", inp_lr, "Latent optimization step size");
  inp->add_option("--seed", inp_seed, "RNG seed")->required();
  inp->add_option("--output-dir", inp_out, "Output directory")->required();

  // vmf-sample
  auto* vmfs = app.add_subcommand("vmf-sample", "Draw von Mises-Fisher samples");
  int vmf_m = 3, vmf_n = 1000;
  double vmf_kappa = 1.0;
  std::string vmf_out;
  std::uint64_t vmf_seed = 0;
  vmfs->add_option("--m", vmf_m, "Ambient dimension");
  vmfs->add_option("--kappa", vmf_kappa, "Concentration");
  vmfs->add_option("--n", vmf_n, "Sample count");
  vmfs->add_option("--seed", vmf_seed, "RNG seed")->required();
  vmfs->add_option("--output-dir", vmf_out, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*ingest)
      return cmd_ingest(ingest_inputs, ingest_chain, ingest_atoms, ingest_stride,
                        ingest_out);
    if (*distance)
      return cmd_distance(dist_inputs, dist_method, dist_out, dist_epochs, dist_lr,
                          dist_blocks, dist_channels, dist_seed);
    if (*geodesic)
      return cmd_geodesic(geo_inputs, geo_space, geo_steps, geo_ckpt, geo_out);
    if (*reg)
      return cmd_register(reg_inputs, reg_method, reg_out, reg_epochs, reg_lr,
                          reg_blocks, reg_channels, reg_seed);
    if (*train_cmd)
      return cmd_train(train_inputs, train_out, train_kappa, train_latent,
                       train_epochs, train_batch, train_lr, train_seed);
    if (*gen) return cmd_generate(gen_ckpt, gen_n, gen_corpus, gen_out, gen_seed);
    if (*inp)
      return cmd_inpaint(inp_ckpt, inp_input, inp_mask, inp_iters, inp_lr, inp_out,
                         inp_seed);
    if (*vmfs) return cmd_vmf_sample(vmf_m, vmf_kappa, vmf_n, vmf_out, vmf_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace protshape::cli
