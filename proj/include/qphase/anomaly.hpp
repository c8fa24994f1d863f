#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qphase/error.hpp"

namespace qphase {

using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

enum class Activation { ReLU, Tanh, Identity };
Activation activation_from_string(const std::string& s);
const char* activation_name(Activation a);

// z = W a - b, a' = f(z).
struct DenseLayer {
  MatD w;
  VecD b;
  Activation act = Activation::ReLU;
};

struct AdamState {
  std::vector<MatD> mw, vw;
  std::vector<VecD> mb, vb;
  long step = 0;
};

struct Autoencoder {
  std::vector<std::size_t> dims;
  std::vector<DenseLayer> layers;
  AdamState adam;

  std::size_t input_dim() const { return dims.front(); }
  std::size_t parameter_count() const;
};

// Glorot-uniform weights, zero biases. Hidden layers use `hidden`, the last layer `output`.
Autoencoder make_autoencoder(const std::vector<std::size_t>& dims, Activation hidden, Activation output,
                             std::uint64_t seed);
// [χ, χ/2, χ/4, χ/2, χ] with ReLU hidden layers and identity output.
Autoencoder default_autoencoder(std::size_t chi, std::uint64_t seed);

struct ForwardCache {
  std::vector<VecD> z;  // pre-activations per layer
  std::vector<VecD> a;  // a[0] = input, a[k+1] = f(z[k])
};

VecD forward(const Autoencoder& ae, const VecD& x, ForwardCache* cache = nullptr);
// ‖x - y(x)‖²
double loss(const Autoencoder& ae, const VecD& x);

struct Gradients {
  std::vector<MatD> dw;
  std::vector<VecD> db;
};
// Summed over the batch.
Gradients gradients(const Autoencoder& ae, const std::vector<VecD>& batch);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int epochs = 200;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  void validate() const;
};

void adam_step(Autoencoder& ae, const Gradients& g, const TrainConfig& cfg);

struct TrainResult {
  double initial_loss = 0.0;     // mean over the training set before the first step
  std::vector<double> history;   // mean loss after each epoch
  double final_loss() const { return history.empty() ? initial_loss : history.back(); }
};

// Examples are put in a canonical order, then shuffled each epoch by a seed-derived permutation.
TrainResult train(Autoencoder& ae, const std::vector<VecD>& data, const TrainConfig& cfg);

struct LossMap {
  std::vector<double> loss;
  double train_mean = 0.0;
  double train_std = 0.0;
};
LossMap score_map(const Autoencoder& ae, const std::vector<VecD>& features,
                  const std::vector<std::size_t>& training_indices);

enum class FeatureKind { EntanglementSpectrum, CentralTensor, CorrelatorRows };
FeatureKind feature_kind_from_string(const std::string& s);
const char* feature_kind_name(FeatureKind k);

struct GridPoint {
  std::vector<double> params;
  VecD feature;
  std::string status = "ok";  // "ok" or a solver failure message
  bool ok() const { return status == "ok"; }
};

// Row-major over `shape` (last axis fastest).
struct LabeledGrid {
  std::vector<std::string> axis_names;
  std::vector<std::size_t> shape;
  FeatureKind kind = FeatureKind::EntanglementSpectrum;
  std::vector<GridPoint> points;
  std::size_t feature_dim() const;
  void validate() const;  // DimMismatch on unequal feature lengths
  std::vector<VecD> features() const;
};

LossMap score_map(const Autoencoder& ae, const LabeledGrid& grid, const std::vector<std::size_t>& training_indices);

enum class GeometricKind { Inner, Similarity };
// inner: normalized overlap with the reference; similarity: Σ|s - s_ref|².
std::vector<double> geometric_scores(const std::vector<VecD>& features, std::size_t reference, GeometricKind kind);

// Sorted descending, zero-padded (or cut) to `chi`.
VecD spectrum_feature(std::vector<double> schmidt, std::size_t chi);

}  // namespace qphase
