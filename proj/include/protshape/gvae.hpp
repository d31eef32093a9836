// Geometric VAE over SRVFs: the encoder maps a preshape element to a mean
// direction on the latent hypersphere S^{l-1}, the posterior is vMF with a
// fixed concentration (its KL against the uniform prior is a constant, so
// the latent cannot collapse), and the decoder projects back onto the
// preshape sphere. Latent geodesics, generation and inpainting all ride on
// the trained decoder.
//
// The encoder is rotation-sensitive by design: shape-space invariance is
// handled upstream by registering fragments to a corpus reference before
// training, not by an invariance layer.

#pragma once

#include <Eigen/Core>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "protshape/curve.hpp"
#include "protshape/nn/optim.hpp"
#include "protshape/nn/tape.hpp"

namespace protshape {

struct GVaeConfig {
  int grid = 143;                      // T; curves have T+1 points
  int latent_dim = 16;                 // l >= 2
  std::vector<int> hidden = {512, 256};
  double kappa = 100.0;                // fixed posterior concentration
  std::uint64_t seed = 0;
};

class GVaeModel {
 public:
  static GVaeModel build(const GVaeConfig& cfg);

  const GVaeConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Unit vector on S^{l-1}.
  Eigen::VectorXd encode(const Srvf& q) const;
  // Unit-norm SRVF (preshape projection is part of the decoder).
  // Throws NotUnitNorm unless |z| = 1 within 1e-6.
  Srvf decode(const Eigen::VectorXd& z) const;

  void save(const std::string& path) const;
  static GVaeModel load(const std::string& path);

  // Corpus alignment reference and mean fragment length (angstrom), set by
  // training from a prepared dataset and stored in checkpoints.
  Srvf reference;
  double mean_length = 1.0;

 private:
  GVaeConfig cfg_;
  nn::ParamStore params_;
};

struct PreparedDataset {
  std::vector<Srvf> srvfs;  // preshape-normalized, rotation-aligned
  Srvf reference;           // the first fragment's SRVF
  double mean_length = 1.0;
};

// to_srvf + preshape normalization + rotation alignment of every fragment to
// the first one (optimal_rotation). Fragments must share one length.
PreparedDataset prepare_dataset(const std::vector<Curve>& fragments);

struct ElboParts {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;  // constant in the parameters; depends on (l, kappa) only
};

// One reparameterized draw: z = w mu + offset with offset =
// sqrt(1 - w^2) * tangent, both held constant on the tape so the gradient
// reaches the encoder through mu alone.
struct FrozenNoise {
  double w = 1.0;
  Eigen::VectorXd offset;
};

FrozenNoise draw_noise(const GVaeModel& model, const Srvf& q, std::mt19937_64& rng);

// Mean reconstruction loss node over the batch for the given frozen noise;
// the differentiable core shared by train, elbo_loss and the gradient tests.
nn::NodeId elbo_recon_graph(nn::Tape& tape, const GVaeModel& model,
                            const std::vector<Srvf>& batch,
                            const std::vector<FrozenNoise>& noise);

// Mean over the batch of (1/T)|q - decode(z)|^2 with the reparameterized
// z = w mu + v sqrt(1-w^2); w and v are treated as constants so gradients
// flow through mu only. total = recon + kl exactly.
ElboParts elbo_loss(const GVaeModel& model, const std::vector<Srvf>& batch,
                    std::mt19937_64& rng);

struct TrainOptions {
  int epochs = 200;
  int batch_size = 16;
  double lr = 1e-3;
  // The learning rate decays linearly to lr * final_lr_fraction by the last
  // epoch.
  double final_lr_fraction = 0.05;
  std::uint64_t seed = 0;
};

struct TrainHistory {
  // Per-epoch loss from a full-dataset evaluation pass whose sampling noise
  // is reseeded identically every epoch, so the history is a deterministic
  // function of the parameters rather than of the minibatch draw.
  std::vector<double> epoch_loss;
  std::vector<double> epoch_recon;
  double kl = 0.0;
  int best_epoch = -1;  // epoch whose parameters were kept
};

// Adam over shuffled mini-batches; the lowest-loss epoch's parameters are
// restored into the model at the end. Throws NonFinite (with the epoch in
// the message) if the loss leaves the reals.
TrainHistory train(GVaeModel& model, const std::vector<Srvf>& dataset,
                   const TrainOptions& opts);

// Decodes n latents drawn uniformly on S^{l-1} (the prior).
std::vector<Curve> generate(const GVaeModel& model, int n, std::mt19937_64& rng);

// Decodes n latents drawn from vMF(encode(q), kappa_gen).
std::vector<Curve> generate_near(const GVaeModel& model, const Srvf& q,
                                 double kappa_gen, int n, std::mt19937_64& rng);

struct LatentPath {
  std::vector<Eigen::VectorXd> latents;  // unit vectors along the slerp
  std::vector<Srvf> srvfs;               // decoded steps
  std::vector<Curve> curves;
};

// Great-circle interpolation between encode(q1) and encode(q2), decoded per
// step. Endpoints equal the two reconstructions exactly. Throws
// AntipodalLatents when the latents are antipodal.
LatentPath latent_geodesic(const GVaeModel& model, const Srvf& q1,
                           const Srvf& q2, int steps);

struct InpaintOptions {
  int iters = 300;
  double lr = 0.05;
};

struct InpaintResult {
  Curve completed;               // observed atoms copied, masked atoms decoded
  Curve baseline;                // linear-interpolation fill of the mask
  std::vector<int> masked_atoms; // flat atom indices that were replaced
};

// Latent optimization: start from the encoding of the linearly-filled curve,
// run projected gradient descent of the observed-region reconstruction error
// over z on S^{l-1}, then splice the decoded masked atoms back into the
// input after a similarity alignment on the observed atoms. An empty mask
// returns the input unchanged. Throws FullMask / LengthMismatch.
InpaintResult inpaint(const GVaeModel& model, const Curve& corrupted,
                      const std::set<int>& masked_residues,
                      const InpaintOptions& opts, std::mt19937_64& rng);

}  // namespace protshape
