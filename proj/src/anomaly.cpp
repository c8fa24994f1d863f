#include "qphase/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qphase/random.hpp"

namespace qphase {

namespace {

VecD apply_act(Activation a, const VecD& z) {
  switch (a) {
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Identity: return z;
  }
  return z;
}

VecD act_derivative(Activation a, const VecD& z) {
  switch (a) {
    case Activation::ReLU: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::Identity: return VecD::Ones(z.size());
  }
  return VecD::Ones(z.size());
}

void check_dim(const Autoencoder& ae, const VecD& x) {
  if (static_cast<std::size_t>(x.size()) != ae.input_dim())
    throw Error(ErrorCode::DimMismatch, "feature length " + std::to_string(x.size()) + " but network expects " +
                                            std::to_string(ae.input_dim()));
}

}  // namespace

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw Error(ErrorCode::ConfigError, "unknown activation '" + s + "' (valid: relu, tanh, identity)");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

std::size_t Autoencoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

Autoencoder make_autoencoder(const std::vector<std::size_t>& dims, Activation hidden, Activation output,
                             std::uint64_t seed) {
  if (dims.size() < 2) throw Error(ErrorCode::ConfigError, "an autoencoder needs at least two layer sizes");
  if (dims.front() != dims.back()) throw Error(ErrorCode::DimMismatch, "input and output sizes differ");
  const std::size_t bottleneck = *std::min_element(dims.begin(), dims.end());
  if (dims.size() > 2 && bottleneck >= dims.front())
    throw Error(ErrorCode::ConfigError, "bottleneck must be narrower than the input");
  Autoencoder ae;
  ae.dims = dims;
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    DenseLayer l;
    const std::size_t fin = dims[k], fout = dims[k + 1];
    const double lim = std::sqrt(6.0 / double(fin + fout));
    l.w.resize(fout, fin);
    for (std::size_t r = 0; r < fout; ++r)
      for (std::size_t c = 0; c < fin; ++c) l.w(r, c) = rng.uniform(-lim, lim);
    l.b = VecD::Zero(fout);
    l.act = (k + 2 == dims.size()) ? output : hidden;
    ae.layers.push_back(std::move(l));
  }
  for (const auto& l : ae.layers) {
    ae.adam.mw.push_back(MatD::Zero(l.w.rows(), l.w.cols()));
    ae.adam.vw.push_back(MatD::Zero(l.w.rows(), l.w.cols()));
    ae.adam.mb.push_back(VecD::Zero(l.b.size()));
    ae.adam.vb.push_back(VecD::Zero(l.b.size()));
  }
  return ae;
}

Autoencoder default_autoencoder(std::size_t chi, std::uint64_t seed) {
  if (chi < 4) throw Error(ErrorCode::ConfigError, "default architecture needs chi >= 4");
  return make_autoencoder({chi, chi / 2, chi / 4, chi / 2, chi}, Activation::ReLU, Activation::Identity, seed);
}

VecD forward(const Autoencoder& ae, const VecD& x, ForwardCache* cache) {
  check_dim(ae, x);
  VecD a = x;
  if (cache) {
    cache->z.clear();
    cache->a.assign(1, x);
  }
  for (const auto& l : ae.layers) {
    VecD z = l.w * a - l.b;
    a = apply_act(l.act, z);
    if (cache) {
      cache->z.push_back(std::move(z));
      cache->a.push_back(a);
    }
  }
  return a;
}

double loss(const Autoencoder& ae, const VecD& x) { return (x - forward(ae, x)).squaredNorm(); }

Gradients gradients(const Autoencoder& ae, const std::vector<VecD>& batch) {
  const std::size_t nl = ae.layers.size();
  Gradients g;
  for (const auto& l : ae.layers) {
    g.dw.push_back(MatD::Zero(l.w.rows(), l.w.cols()));
    g.db.push_back(VecD::Zero(l.b.size()));
  }
  ForwardCache c;
  for (const auto& x : batch) {
    const VecD y = forward(ae, x, &c);
    VecD delta = (2.0 * (y - x)).cwiseProduct(act_derivative(ae.layers[nl - 1].act, c.z[nl - 1]));
    for (std::size_t k = nl; k-- > 0;) {
      g.dw[k].noalias() += delta * c.a[k].transpose();
      g.db[k] -= delta;  // z = W a - b
      if (k > 0) delta = (ae.layers[k].w.transpose() * delta).cwiseProduct(act_derivative(ae.layers[k - 1].act, c.z[k - 1]));
    }
  }
  return g;
}

void TrainConfig::validate() const {
  if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1))
    throw Error(ErrorCode::ConfigError, "ADAM betas must lie in (0, 1)");
  if (!(learning_rate > 0) || epochs < 0 || batch_size == 0)
    throw Error(ErrorCode::ConfigError, "learning_rate > 0, epochs >= 0, batch_size >= 1 required");
}

void adam_step(Autoencoder& ae, const Gradients& g, const TrainConfig& cfg) {
  auto& s = ae.adam;
  ++s.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(s.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(s.step));
  for (std::size_t k = 0; k < ae.layers.size(); ++k) {
    s.mw[k] = cfg.beta1 * s.mw[k] + (1 - cfg.beta1) * g.dw[k];
    s.vw[k] = cfg.beta2 * s.vw[k] + (1 - cfg.beta2) * g.dw[k].cwiseAbs2();
    s.mb[k] = cfg.beta1 * s.mb[k] + (1 - cfg.beta1) * g.db[k];
    s.vb[k] = cfg.beta2 * s.vb[k] + (1 - cfg.beta2) * g.db[k].cwiseAbs2();
    ae.layers[k].w.array() -=
        cfg.learning_rate * (s.mw[k].array() / c1) / ((s.vw[k].array() / c2).sqrt() + cfg.eps_adam);
    ae.layers[k].b.array() -=
        cfg.learning_rate * (s.mb[k].array() / c1) / ((s.vb[k].array() / c2).sqrt() + cfg.eps_adam);
  }
}

TrainResult train(Autoencoder& ae, const std::vector<VecD>& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw Error(ErrorCode::ConfigError, "empty training set");
  for (const auto& x : data) check_dim(ae, x);
  std::vector<VecD> ex = data;
  std::stable_sort(ex.begin(), ex.end(), [](const VecD& a, const VecD& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  auto mean_loss = [&] {
    double s = 0.0;
    for (const auto& x : ex) s += loss(ae, x);
    return s / double(ex.size());
  };
  TrainResult res;
  res.initial_loss = mean_loss();
  std::vector<std::size_t> order(ex.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, 0x7e4, std::uint64_t(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<VecD> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) batch.push_back(ex[order[k]]);
      adam_step(ae, gradients(ae, batch), cfg);
    }
    res.history.push_back(mean_loss());
  }
  return res;
}

LossMap score_map(const Autoencoder& ae, const std::vector<VecD>& features,
                  const std::vector<std::size_t>& training_indices) {
  LossMap m;
  for (const auto& f : features) m.loss.push_back(loss(ae, f));
  if (!training_indices.empty()) {
    double s = 0.0, s2 = 0.0;
    for (auto i : training_indices) {
      if (i >= m.loss.size()) throw Error(ErrorCode::DimMismatch, "training index outside the grid");
      s += m.loss[i];
    }
    m.train_mean = s / double(training_indices.size());
    for (auto i : training_indices) s2 += (m.loss[i] - m.train_mean) * (m.loss[i] - m.train_mean);
    m.train_std = std::sqrt(s2 / double(training_indices.size()));
  }
  return m;
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "entanglement_spectrum") return FeatureKind::EntanglementSpectrum;
  if (s == "central_tensor_flattened") return FeatureKind::CentralTensor;
  if (s == "correlator_rows") return FeatureKind::CorrelatorRows;
  throw Error(ErrorCode::ConfigError,
              "unknown feature kind '" + s + "' (valid: entanglement_spectrum, central_tensor_flattened, correlator_rows)");
}

const char* feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::EntanglementSpectrum: return "entanglement_spectrum";
    case FeatureKind::CentralTensor: return "central_tensor_flattened";
    case FeatureKind::CorrelatorRows: return "correlator_rows";
  }
  return "?";
}

std::size_t LabeledGrid::feature_dim() const { return points.empty() ? 0 : std::size_t(points.front().feature.size()); }

void LabeledGrid::validate() const {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  if (!shape.empty() && n != points.size())
    throw Error(ErrorCode::DimMismatch, "grid shape covers " + std::to_string(n) + " points, dataset has " +
                                            std::to_string(points.size()));
  for (const auto& p : points)
    if (std::size_t(p.feature.size()) != feature_dim())
      throw Error(ErrorCode::DimMismatch, "feature vectors have unequal lengths");
}

std::vector<VecD> LabeledGrid::features() const {
  std::vector<VecD> out;
  for (const auto& p : points) out.push_back(p.feature);
  return out;
}

LossMap score_map(const Autoencoder& ae, const LabeledGrid& grid, const std::vector<std::size_t>& training_indices) {
  grid.validate();
  return score_map(ae, grid.features(), training_indices);
}

std::vector<double> geometric_scores(const std::vector<VecD>& features, std::size_t reference, GeometricKind kind) {
  if (reference >= features.size()) throw Error(ErrorCode::DimMismatch, "reference index outside the grid");
  const VecD& r = features[reference];
  std::vector<double> out;
  for (const auto& f : features) {
    if (f.size() != r.size()) throw Error(ErrorCode::DimMismatch, "feature lengths differ");
    if (kind == GeometricKind::Inner) {
      const double nf = f.norm(), nr = r.norm();
      out.push_back(nf > 0 && nr > 0 ? f.dot(r) / (nf * nr) : 0.0);
    } else {
      out.push_back((f - r).squaredNorm());
    }
  }
  return out;
}

VecD spectrum_feature(std::vector<double> schmidt, std::size_t chi) {
  std::sort(schmidt.begin(), schmidt.end(), std::greater<double>());
  VecD v = VecD::Zero(chi);
  for (std::size_t k = 0; k < std::min(chi, schmidt.size()); ++k) v[k] = schmidt[k];
  return v;
}

}  // namespace qphase
