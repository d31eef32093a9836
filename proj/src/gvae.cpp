#include "protshape/gvae.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "protshape/nn/checkpoint.hpp"
#include "protshape/registration.hpp"
#include "protshape/vmf.hpp"

namespace protshape {

namespace {

using nn::NodeId;
using nn::Tape;
using nn::Tensor;

Tensor srvf_flat_tensor(const Srvf& q) {
  const int T = q.grid_size();
  Tensor t = Tensor::zeros({static_cast<std::size_t>(3 * T)});
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < T; ++i) t.v[d * T + i] = q.values[i][d];
  return t;
}

Srvf srvf_from_flat(const std::vector<double>& flat, int T) {
  Srvf q;
  q.values.resize(T);
  for (int i = 0; i < T; ++i)
    q.values[i] = Vec3(flat[i], flat[T + i], flat[2 * T + i]);
  return q;
}

Tensor vector_tensor(const Eigen::VectorXd& v) {
  Tensor t = Tensor::zeros({static_cast<std::size_t>(v.size())});
  for (int i = 0; i < v.size(); ++i) t.v[i] = v[i];
  return t;
}

// mu = normalize(dense stack(flattened srvf))
NodeId encoder_graph(Tape& tape, nn::ParamStore& params, const GVaeConfig& cfg,
                     NodeId x_flat) {
  NodeId h = x_flat;
  for (std::size_t layer = 0; layer < cfg.hidden.size(); ++layer) {
    const std::string p = "enc." + std::to_string(layer);
    h = tape.relu(tape.dense(h, tape.param(params, p + ".W"),
                             tape.param(params, p + ".b")));
  }
  const std::string p = "enc." + std::to_string(cfg.hidden.size());
  h = tape.dense(h, tape.param(params, p + ".W"), tape.param(params, p + ".b"));
  return tape.normalize_to_unit_sphere(h);
}

// q_hat = preshape projection(dense stack(z)), flat [3T] layout. The flat
// Euclidean norm is pinned to sqrt(T), i.e. unit discrete L2 norm.
NodeId decoder_graph(Tape& tape, nn::ParamStore& params, const GVaeConfig& cfg,
                     NodeId z) {
  NodeId h = z;
  const std::size_t n_hidden = cfg.hidden.size();
  for (std::size_t layer = 0; layer < n_hidden; ++layer) {
    const std::string p = "dec." + std::to_string(layer);
    h = tape.relu(tape.dense(h, tape.param(params, p + ".W"),
                             tape.param(params, p + ".b")));
  }
  const std::string p = "dec." + std::to_string(n_hidden);
  h = tape.dense(h, tape.param(params, p + ".W"), tape.param(params, p + ".b"));
  return tape.scale(tape.normalize_to_unit_sphere(h), std::sqrt(static_cast<double>(cfg.grid)));
}

double curve_length(const Curve& c) {
  double len = 0.0;
  for (int i = 0; i + 1 < c.size(); ++i)
    len += (c.points[i + 1] - c.points[i]).norm();
  return len;
}

}  // namespace

GVaeModel GVaeModel::build(const GVaeConfig& cfg) {
  if (cfg.latent_dim < 2) throw Error("latent_dim must be >= 2");
  if (cfg.grid < 4) throw Error("grid must be >= 4");
  if (cfg.kappa < 0) throw Error("kappa must be nonnegative");
  GVaeModel model;
  model.cfg_ = cfg;
  std::mt19937_64 rng(cfg.seed);
  auto& t = model.params_.tensors;

  std::vector<int> enc_dims;
  enc_dims.push_back(3 * cfg.grid);
  for (int h : cfg.hidden) enc_dims.push_back(h);
  enc_dims.push_back(cfg.latent_dim);
  for (std::size_t layer = 0; layer + 1 < enc_dims.size(); ++layer) {
    const std::size_t in = enc_dims[layer], out = enc_dims[layer + 1];
    const std::string p = "enc." + std::to_string(layer);
    t[p + ".W"] = nn::glorot_uniform({in, out}, in, out, rng);
    t[p + ".b"] = Tensor::zeros({out});
  }
  std::vector<int> dec_dims(enc_dims.rbegin(), enc_dims.rend());
  for (std::size_t layer = 0; layer + 1 < dec_dims.size(); ++layer) {
    const std::size_t in = dec_dims[layer], out = dec_dims[layer + 1];
    const std::string p = "dec." + std::to_string(layer);
    t[p + ".W"] = nn::glorot_uniform({in, out}, in, out, rng);
    t[p + ".b"] = Tensor::zeros({out});
  }
  return model;
}

Eigen::VectorXd GVaeModel::encode(const Srvf& q) const {
  if (q.grid_size() != cfg_.grid) throw GridMismatch("srvf grid does not match model");
  Tape tape;
  auto& params = const_cast<nn::ParamStore&>(params_);
  const NodeId mu = encoder_graph(tape, params, cfg_, tape.constant(srvf_flat_tensor(q)));
  const auto& v = tape.value(mu).v;
  Eigen::VectorXd out(cfg_.latent_dim);
  for (int i = 0; i < cfg_.latent_dim; ++i) out[i] = v[i];
  return out;
}

Srvf GVaeModel::decode(const Eigen::VectorXd& z) const {
  if (z.size() != cfg_.latent_dim) throw Error("latent dimension mismatch");
  if (std::abs(z.norm() - 1.0) > 1e-6)
    throw NotUnitNorm("decode requires a unit latent vector");
  Tape tape;
  auto& params = const_cast<nn::ParamStore&>(params_);
  const NodeId q = decoder_graph(tape, params, cfg_, tape.constant(vector_tensor(z)));
  return srvf_from_flat(tape.value(q).v, cfg_.grid);
}

void GVaeModel::save(const std::string& path) const {
  std::map<std::string, Tensor> out = params_.tensors;
  out["meta.grid"] = Tensor::scalar(cfg_.grid);
  out["meta.latent_dim"] = Tensor::scalar(cfg_.latent_dim);
  out["meta.kappa"] = Tensor::scalar(cfg_.kappa);
  out["meta.mean_length"] = Tensor::scalar(mean_length);
  std::vector<double> hidden(cfg_.hidden.begin(), cfg_.hidden.end());
  out["meta.hidden"] = Tensor::vector(hidden);
  if (reference.grid_size() == cfg_.grid)
    out["meta.reference"] = srvf_flat_tensor(reference);
  nn::save_checkpoint(path, out);
}

GVaeModel GVaeModel::load(const std::string& path) {
  auto tensors = nn::load_checkpoint(path);
  GVaeConfig cfg;
  try {
    cfg.grid = static_cast<int>(tensors.at("meta.grid").v.at(0));
    cfg.latent_dim = static_cast<int>(tensors.at("meta.latent_dim").v.at(0));
    cfg.kappa = tensors.at("meta.kappa").v.at(0);
    cfg.hidden.clear();
    for (double h : tensors.at("meta.hidden").v)
      cfg.hidden.push_back(static_cast<int>(h));
  } catch (const std::out_of_range&) {
    throw BadCheckpoint("checkpoint is missing model metadata");
  }
  GVaeModel model = build(cfg);
  model.mean_length = tensors.at("meta.mean_length").v.at(0);
  if (auto it = tensors.find("meta.reference"); it != tensors.end())
    model.reference = srvf_from_flat(it->second.v, cfg.grid);
  for (auto& [name, tensor] : model.params_.tensors) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw BadCheckpoint("checkpoint is missing " + name);
    if (!it->second.same_shape(tensor))
      throw BadCheckpoint("checkpoint tensor shape mismatch for " + name);
    tensor = it->second;
  }
  return model;
}

PreparedDataset prepare_dataset(const std::vector<Curve>& fragments) {
  if (fragments.empty()) throw Error("prepare_dataset needs at least one fragment");
  PreparedDataset out;
  out.srvfs.reserve(fragments.size());
  double total_length = 0.0;
  for (const Curve& c : fragments) {
    if (c.size() != fragments.front().size())
      throw LengthMismatch("fragments must share one length");
    total_length += curve_length(c);
    out.srvfs.push_back(normalize_preshape(to_srvf(c)));
  }
  out.mean_length = total_length / fragments.size();
  out.reference = out.srvfs.front();
  for (std::size_t i = 1; i < out.srvfs.size(); ++i) {
    const Rotation O = optimal_rotation(out.reference, out.srvfs[i]);
    out.srvfs[i] = apply_rotation(out.srvfs[i], O);
  }
  return out;
}

FrozenNoise draw_noise(const GVaeModel& model, const Srvf& q,
                       std::mt19937_64& rng) {
  const GVaeConfig& cfg = model.config();
  const Eigen::VectorXd mu = model.encode(q);
  FrozenNoise noise;
  noise.w = vmf::sample_w(cfg.latent_dim, cfg.kappa, rng);
  noise.offset = std::sqrt(std::max(0.0, 1.0 - noise.w * noise.w)) *
                 vmf::sample_tangent(mu, rng);
  return noise;
}

nn::NodeId elbo_recon_graph(Tape& tape, const GVaeModel& model,
                            const std::vector<Srvf>& batch,
                            const std::vector<FrozenNoise>& noise) {
  if (batch.empty()) throw Error("elbo graph needs a nonempty batch");
  if (batch.size() != noise.size()) throw Error("one noise draw per batch item");
  const GVaeConfig& cfg = model.config();
  auto& params = const_cast<nn::ParamStore&>(model.params());
  std::vector<NodeId> item_losses;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Tensor q_flat = srvf_flat_tensor(batch[b]);
    const NodeId mu = encoder_graph(tape, params, cfg, tape.constant(q_flat));
    const NodeId z = tape.add(tape.scale(mu, noise[b].w),
                              tape.constant(vector_tensor(noise[b].offset)));
    const NodeId qhat = decoder_graph(tape, params, cfg, z);
    item_losses.push_back(
        tape.scale(tape.l2_loss(qhat, tape.constant(q_flat)), 1.0 / cfg.grid));
  }
  NodeId total = item_losses.front();
  for (std::size_t i = 1; i < item_losses.size(); ++i)
    total = tape.add(total, item_losses[i]);
  return tape.scale(total, 1.0 / item_losses.size());
}

ElboParts elbo_loss(const GVaeModel& model, const std::vector<Srvf>& batch,
                    std::mt19937_64& rng) {
  if (batch.empty()) throw Error("elbo_loss needs a nonempty batch");
  const GVaeConfig& cfg = model.config();
  std::vector<FrozenNoise> noise;
  noise.reserve(batch.size());
  for (const Srvf& q : batch) noise.push_back(draw_noise(model, q, rng));
  Tape tape;
  ElboParts parts;
  parts.recon = tape.value(elbo_recon_graph(tape, model, batch, noise)).v[0];
  parts.kl = vmf::kl_to_uniform(cfg.latent_dim, cfg.kappa);
  parts.total = parts.recon + parts.kl;
  return parts;
}

TrainHistory train(GVaeModel& model, const std::vector<Srvf>& dataset,
                   const TrainOptions& opts) {
  if (dataset.empty()) throw Error("train needs a nonempty dataset");
  const GVaeConfig& cfg = model.config();
  auto& params = model.params();
  std::mt19937_64 rng(opts.seed);
  nn::AdamState adam;

  TrainHistory history;
  history.kl = vmf::kl_to_uniform(cfg.latent_dim, cfg.kappa);
  double best_loss = std::numeric_limits<double>::infinity();
  std::map<std::string, Tensor> best_params = params.tensors;

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const double lr =
        opts.lr * (1.0 - (1.0 - opts.final_lr_fraction) *
                             (opts.epochs > 1 ? static_cast<double>(epoch) /
                                                    (opts.epochs - 1)
                                              : 0.0));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t at = 0; at < order.size(); at += opts.batch_size) {
      const std::size_t batch_end = std::min(order.size(), at + opts.batch_size);
      std::vector<Srvf> batch;
      std::vector<FrozenNoise> noise;
      for (std::size_t b = at; b < batch_end; ++b) {
        batch.push_back(dataset[order[b]]);
        noise.push_back(draw_noise(model, batch.back(), rng));
      }
      Tape tape;
      const NodeId batch_loss = elbo_recon_graph(tape, model, batch, noise);
      const double loss_value = tape.value(batch_loss).v[0];
      if (!std::isfinite(loss_value))
        throw NonFinite("training loss became non-finite at epoch " +
                        std::to_string(epoch));
      tape.backward(batch_loss);
      nn::adam_step(params, tape.param_grads(), adam, lr);
    }
    // Evaluation pass with per-epoch identical noise seeding.
    std::mt19937_64 eval_rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
    const ElboParts eval = elbo_loss(model, dataset, eval_rng);
    if (!std::isfinite(eval.total))
      throw NonFinite("evaluation loss became non-finite at epoch " +
                      std::to_string(epoch));
    history.epoch_recon.push_back(eval.recon);
    history.epoch_loss.push_back(eval.total);
    if (eval.total < best_loss) {
      best_loss = eval.total;
      best_params = params.tensors;
      history.best_epoch = epoch;
    }
  }
  params.tensors = best_params;
  return history;
}

std::vector<Curve> generate(const GVaeModel& model, int n, std::mt19937_64& rng) {
  std::vector<Curve> out;
  out.reserve(std::max(0, n));
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = vmf::sample_uniform(model.config().latent_dim, rng);
    out.push_back(from_srvf(model.decode(z)));
  }
  return out;
}

std::vector<Curve> generate_near(const GVaeModel& model, const Srvf& q,
                                 double kappa_gen, int n, std::mt19937_64& rng) {
  const vmf::VmfParams posterior{model.encode(q), kappa_gen};
  std::vector<Curve> out;
  out.reserve(std::max(0, n));
  for (int i = 0; i < n; ++i)
    out.push_back(from_srvf(model.decode(vmf::sample(posterior, rng))));
  return out;
}

LatentPath latent_geodesic(const GVaeModel& model, const Srvf& q1,
                           const Srvf& q2, int steps) {
  if (steps < 2) throw Error("latent_geodesic requires steps >= 2");
  const Eigen::VectorXd a = model.encode(q1);
  const Eigen::VectorXd b = model.encode(q2);
  const double theta = std::acos(std::clamp(a.dot(b), -1.0, 1.0));
  if (theta > M_PI - 1e-6)
    throw AntipodalLatents("latent endpoints are antipodal");

  LatentPath path;
  for (int k = 0; k < steps; ++k) {
    const double tau = static_cast<double>(k) / (steps - 1);
    Eigen::VectorXd z;
    if (k == 0) {
      z = a;  // endpoints reproduce the reconstructions bit for bit
    } else if (k + 1 == steps) {
      z = b;
    } else if (theta < 1e-6) {
      z = a;
    } else {
      z = (std::sin((1.0 - tau) * theta) * a + std::sin(tau * theta) * b) /
          std::sin(theta);
      z /= z.norm();
    }
    path.latents.push_back(z);
    path.srvfs.push_back(model.decode(z));
    path.curves.push_back(from_srvf(path.srvfs.back()));
  }
  return path;
}

InpaintResult inpaint(const GVaeModel& model, const Curve& corrupted,
                      const std::set<int>& masked_residues,
                      const InpaintOptions& opts, std::mt19937_64& rng) {
  const GVaeConfig& cfg = model.config();
  const int n_atoms = corrupted.size();
  if (n_atoms != cfg.grid + 1)
    throw LengthMismatch("curve length does not match the model grid");
  if (n_atoms % 3 != 0)
    throw LengthMismatch("curve length must cover whole residues");
  const int n_residues = n_atoms / 3;

  std::vector<char> masked(n_atoms, 0);
  std::vector<int> masked_atoms;
  for (int r : masked_residues) {
    if (r < 0 || r >= n_residues) throw Error("mask residue out of range");
    for (int a = 3 * r; a < 3 * r + 3 && a < n_atoms; ++a) {
      masked[a] = 1;
      masked_atoms.push_back(a);
    }
  }
  InpaintResult result;
  result.masked_atoms = masked_atoms;
  if (masked_atoms.empty()) {
    result.completed = corrupted;
    result.baseline = corrupted;
    return result;
  }
  if (static_cast<int>(masked_atoms.size()) >= n_atoms)
    throw FullMask("all residues are masked");

  // Linear-interpolation fill between the nearest observed anchors; terminal
  // runs hold the single anchor.
  Curve filled = corrupted;
  for (int a = 0; a < n_atoms; ++a) {
    if (!masked[a]) continue;
    int left = a - 1;
    while (left >= 0 && masked[left]) --left;
    int right = a + 1;
    while (right < n_atoms && masked[right]) ++right;
    if (left >= 0 && right < n_atoms) {
      const double t = static_cast<double>(a - left) / (right - left);
      filled.points[a] =
          (1.0 - t) * corrupted.points[left] + t * corrupted.points[right];
    } else if (left >= 0) {
      filled.points[a] = corrupted.points[left];
    } else {
      filled.points[a] = corrupted.points[right];
    }
  }
  result.baseline = filled;

  const Srvf q_corr = normalize_preshape(to_srvf(filled));
  Rotation align = Rotation::identity();
  if (model.reference.grid_size() == cfg.grid)
    align = optimal_rotation(model.reference, q_corr);
  const Srvf q_aligned = apply_rotation(q_corr, align);

  // SRVF samples are trusted only where both endpoints of the velocity cell
  // are observed.
  Tensor mask01 = Tensor::zeros({static_cast<std::size_t>(3 * cfg.grid)});
  for (int i = 0; i < cfg.grid; ++i) {
    const bool observed = !masked[i] && !masked[i + 1];
    for (int d = 0; d < 3; ++d) mask01.v[d * cfg.grid + i] = observed ? 1.0 : 0.0;
  }
  const Tensor target = srvf_flat_tensor(q_aligned);

  Eigen::VectorXd z = model.encode(q_aligned);
  auto& params = const_cast<nn::ParamStore&>(model.params());
  for (int iter = 0; iter < opts.iters; ++iter) {
    Tape tape;
    const NodeId z_leaf = tape.constant(vector_tensor(z));
    const NodeId qhat = decoder_graph(tape, params, cfg, z_leaf);
    const NodeId diff = tape.add(qhat, tape.scale(tape.constant(target), -1.0));
    const NodeId masked_diff = tape.pointwise_mul(diff, tape.constant(mask01));
    const NodeId loss = tape.scale(
        tape.l2_loss(masked_diff, tape.constant(Tensor::zeros(mask01.shape))),
        1.0 / cfg.grid);
    tape.backward(loss);
    const auto& grad = tape.grad(z_leaf).v;
    for (int i = 0; i < cfg.latent_dim; ++i) z[i] -= opts.lr * grad[i];
    const double norm = z.norm();
    if (norm < 1e-12) throw NonFinite("latent collapsed during inpainting");
    z /= norm;
  }

  // Back to the input frame: undo the reference rotation, rebuild the curve,
  // then fit a similarity transform on the observed atoms.
  const Srvf q_hat = apply_rotation(model.decode(z), Rotation{align.m.transpose()});
  const Curve decoded = from_srvf(q_hat);

  const int n_observed = n_atoms - static_cast<int>(masked_atoms.size());
  Eigen::Matrix3Xd src(3, n_observed), dst(3, n_observed);
  int col = 0;
  for (int a = 0; a < n_atoms; ++a) {
    if (masked[a]) continue;
    src.col(col) = decoded.points[a];
    dst.col(col) = corrupted.points[a];
    ++col;
  }
  const Eigen::Matrix4d sim = Eigen::umeyama(src, dst, true);
  const Eigen::Matrix3d A = sim.topLeftCorner<3, 3>();
  const Eigen::Vector3d t = sim.topRightCorner<3, 1>();

  result.completed = corrupted;
  for (int a : masked_atoms) result.completed.points[a] = A * decoded.points[a] + t;
  return result;
}

}  // namespace protshape
