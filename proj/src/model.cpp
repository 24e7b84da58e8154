#include "ptl/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "ptl/errors.hpp"
#include "ptl/kernels.hpp"
#include "ptl/rng.hpp"

namespace ptl {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
    throw ValidationError("train: validation_fraction must be in (0,1)");
  if (learning_rate <= 0.0 || max_epochs < 1 || patience < 1)
    throw ValidationError("train: bad learning rate / epochs / patience");
}

int ProbabilisticModel::feature_dim() const {
  switch (kind) {
    case ModelKind::logreg: return input_dim();
    case ModelKind::mlp1: return hidden_width;
    case ModelKind::csp_logreg: return n_filters;
  }
  return 0;
}

namespace {

// ---- forward pieces -------------------------------------------------------

std::vector<double> csp_features(const ProbabilisticModel& m, const Epoch& e) {
  std::vector<double> out(m.n_filters);
  const double L = static_cast<double>(e.len);
  std::vector<double> proj(e.len);
  for (int f = 0; f < m.n_filters; ++f) {
    std::fill(proj.begin(), proj.end(), 0.0);
    for (int c = 0; c < e.channels; ++c)
      kernels::axpy(m.csp_filters[std::size_t(f) * e.channels + c], e.row(c),
                    proj);
    const double mean = kernels::sum(proj) / L;
    const double var = kernels::sumsq(proj) / L - mean * mean;
    out[f] = std::log(std::max(var, 1e-12));
  }
  return out;
}

// the vector the linear stack consumes
std::vector<double> input_vector(const ProbabilisticModel& m, const Epoch& e) {
  if (e.channels != m.channels || e.len != m.len)
    throw ValidationError("model: epoch dimensions do not match training dims");
  if (m.kind == ModelKind::csp_logreg) return csp_features(m, e);
  return e.samples;
}

void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : z) v /= total;
}

// logits of a linear layer W (rows x (in+1)) applied to x with implicit bias
std::vector<double> linear(const double* w, int rows, int in,
                           const std::vector<double>& x) {
  std::vector<double> z(rows);
  for (int r = 0; r < rows; ++r) {
    const double* row = w + std::size_t(r) * (in + 1);
    z[r] = kernels::dot({row, x.size()}, x) + row[in];
  }
  return z;
}

struct Forward {
  std::vector<double> x;      // input vector
  std::vector<double> hidden; // mlp1 only (post-activation)
  std::vector<double> probs;
};

int mlp_w1_size(const ProbabilisticModel& m) {
  return m.hidden_width * (m.input_dim() + 1);
}

Forward forward(const ProbabilisticModel& m, const Epoch& e) {
  Forward f;
  f.x = input_vector(m, e);
  if (m.kind == ModelKind::mlp1) {
    f.hidden = linear(m.params.data(), m.hidden_width, m.input_dim(), f.x);
    for (double& v : f.hidden) v = std::tanh(v);
    f.probs = linear(m.params.data() + mlp_w1_size(m), m.n_classes,
                     m.hidden_width, f.hidden);
  } else {
    const int in = m.kind == ModelKind::csp_logreg ? m.n_filters : m.input_dim();
    f.probs = linear(m.params.data(), m.n_classes, in, f.x);
  }
  softmax_inplace(f.probs);
  return f;
}

std::size_t param_count(const ProbabilisticModel& m) {
  switch (m.kind) {
    case ModelKind::logreg:
      return std::size_t(m.n_classes) * (m.input_dim() + 1);
    case ModelKind::mlp1:
      return std::size_t(mlp_w1_size(m)) +
             std::size_t(m.n_classes) * (m.hidden_width + 1);
    case ModelKind::csp_logreg:
      return std::size_t(m.n_classes) * (m.n_filters + 1);
  }
  return 0;
}

// ---- CSP fit ---------------------------------------------------------------

void fit_csp(ProbabilisticModel& m, const std::vector<Epoch>& data) {
  const int C = m.channels;
  Eigen::MatrixXd s0 = Eigen::MatrixXd::Zero(C, C);
  Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(C, C);
  int n0 = 0, n1 = 0;
  for (const Epoch& e : data) {
    Eigen::MatrixXd x(C, e.len);
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < e.len; ++t) x(c, t) = e.at(c, t);
    if (*e.label == 0) {
      s0 += x * x.transpose();
      ++n0;
    } else {
      s1 += x * x.transpose();
      ++n1;
    }
  }
  s0 /= std::max(n0, 1);
  s1 /= std::max(n1, 1);
  Eigen::MatrixXd total = s0 + s1;
  total += (1e-10 * total.trace() / C) * Eigen::MatrixXd::Identity(C, C);

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(s0, total);
  if (es.info() != Eigen::Success)
    throw NumericalError("CSP generalized eigendecomposition failed");

  const int pairs = std::min(3, C / 2);
  if (pairs < 1) throw ValidationError("CSP needs at least 2 channels");
  m.n_filters = 2 * pairs;
  m.csp_filters.assign(std::size_t(m.n_filters) * C, 0.0);
  // eigenvalues ascending: bottom `pairs` favor class 1, top `pairs` class 0
  for (int p = 0; p < pairs; ++p) {
    for (int c = 0; c < C; ++c) {
      m.csp_filters[std::size_t(p) * C + c] = es.eigenvectors()(c, p);
      m.csp_filters[std::size_t(pairs + p) * C + c] =
          es.eigenvectors()(c, C - 1 - p);
    }
  }
}

// ---- optimization ----------------------------------------------------------

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
};

void apply_update(std::vector<double>& params, const std::vector<double>& grad,
                  const TrainConfig& cfg, AdamState& st) {
  if (cfg.optimizer == Optimizer::sgd) {
    kernels::axpy(-cfg.learning_rate, grad, params);
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++st.t;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * grad[i];
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= cfg.learning_rate * (st.m[i] / bc1) /
                 (std::sqrt(st.v[i] / bc2) + eps);
  }
}

double run_epochs(ProbabilisticModel& model,
                  const std::vector<const Epoch*>& train_set,
                  const std::vector<const Epoch*>& val_set,
                  const TrainConfig& cfg, Rng& rng) {
  AdamState st;
  st.m.assign(model.params.size(), 0.0);
  st.v.assign(model.params.size(), 0.0);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> best_params = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale = 0;

  int epoch = 0;
  for (; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      std::vector<const Epoch*> batch;
      for (std::size_t i = start;
           i < std::min(order.size(), start + cfg.batch_size); ++i)
        batch.push_back(train_set[order[i]]);
      apply_update(model.params, ce_grad(model, batch), cfg, st);
    }
    const double val_loss =
        ce_loss(model, val_set.empty() ? train_set : val_set);
    if (val_loss < best_val - 1e-12) {
      best_val = val_loss;
      best_params = model.params;
      best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      ++epoch;
      break;
    }
  }
  model.params = std::move(best_params);
  model.meta.epochs_run = epoch;
  model.meta.best_epoch = best_epoch;
  model.meta.best_val_loss = best_val;
  model.meta.final_train_loss = ce_loss(model, train_set);
  return best_val;
}

void stratified_split(const std::vector<Epoch>& data, double val_fraction,
                      Rng& rng, std::vector<const Epoch*>& train_out,
                      std::vector<const Epoch*>& val_out) {
  std::map<int, std::vector<const Epoch*>> by_class;
  for (const Epoch& e : data) {
    if (!e.label) throw ValidationError("train: all epochs must be labeled");
    by_class[*e.label].push_back(&e);
  }
  for (auto& [label, eps] : by_class) {
    rng.shuffle(eps);
    std::size_t n_val = static_cast<std::size_t>(
        std::floor(val_fraction * static_cast<double>(eps.size())));
    if (n_val >= eps.size()) n_val = eps.size() - 1; // keep class trainable
    for (std::size_t i = 0; i < eps.size(); ++i)
      (i < n_val ? val_out : train_out).push_back(eps[i]);
  }
}

} // namespace

// ---- public API -------------------------------------------------------------

double ce_loss(const ProbabilisticModel& model,
               const std::vector<const Epoch*>& batch) {
  double acc = 0.0;
  for (const Epoch* e : batch) {
    const Forward f = forward(model, *e);
    acc -= std::log(std::max(f.probs[*e->label], 1e-300));
  }
  return acc / static_cast<double>(batch.size());
}

std::vector<double> ce_grad(const ProbabilisticModel& model,
                            const std::vector<const Epoch*>& batch) {
  std::vector<double> grad(model.params.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  for (const Epoch* e : batch) {
    const Forward f = forward(model, *e);
    std::vector<double> dz = f.probs;
    dz[*e->label] -= 1.0;

    if (model.kind == ModelKind::mlp1) {
      const int D = model.input_dim();
      const int H = model.hidden_width;
      double* g2 = grad.data() + mlp_w1_size(model);
      const double* w2 = model.params.data() + mlp_w1_size(model);
      std::vector<double> dh(H, 0.0);
      for (int r = 0; r < model.n_classes; ++r) {
        double* row = g2 + std::size_t(r) * (H + 1);
        kernels::axpy(dz[r] * inv_b, f.hidden, {row, std::size_t(H)});
        row[H] += dz[r] * inv_b;
        kernels::axpy(dz[r], {w2 + std::size_t(r) * (H + 1), std::size_t(H)},
                      dh);
      }
      for (int h = 0; h < H; ++h) {
        const double dpre = dh[h] * (1.0 - f.hidden[h] * f.hidden[h]);
        double* row = grad.data() + std::size_t(h) * (D + 1);
        kernels::axpy(dpre * inv_b, f.x, {row, std::size_t(D)});
        row[D] += dpre * inv_b;
      }
    } else {
      const int in = static_cast<int>(f.x.size());
      for (int r = 0; r < model.n_classes; ++r) {
        double* row = grad.data() + std::size_t(r) * (in + 1);
        kernels::axpy(dz[r] * inv_b, f.x, {row, std::size_t(in)});
        row[in] += dz[r] * inv_b;
      }
    }
  }
  return grad;
}

ProbabilisticModel train(const std::vector<Epoch>& data,
                         const TrainConfig& cfg, ModelKind kind) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train: no data");

  ProbabilisticModel model;
  model.kind = kind;
  model.channels = data.front().channels;
  model.len = data.front().len;
  model.hidden_width = kind == ModelKind::mlp1 ? cfg.hidden_width : 0;

  int max_label = -1;
  for (const Epoch& e : data) {
    if (!e.label) throw ValidationError("train: all epochs must be labeled");
    max_label = std::max(max_label, *e.label);
  }
  model.n_classes = max_label + 1;
  std::vector<int> class_counts(model.n_classes, 0);
  for (const Epoch& e : data) ++class_counts[*e.label];
  int present = 0;
  for (int c : class_counts) present += (c > 0);
  if (present < 2)
    throw ValidationError("train: need at least 2 classes present");
  if (kind == ModelKind::csp_logreg && model.n_classes != 2)
    throw ValidationError("train: csp_logreg supports binary problems only");

  if (kind == ModelKind::csp_logreg) fit_csp(model, data);

  model.params.assign(param_count(model), 0.0);
  Rng rng = Rng::stream(cfg.seed, 0x4du);
  if (kind == ModelKind::mlp1) {
    const int D = model.input_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(D));
    for (int i = 0; i < mlp_w1_size(model); ++i)
      model.params[i] = scale * rng.gaussian();
    // output layer starts at zero -> initial posteriors uniform
  }

  std::vector<const Epoch*> train_set, val_set;
  stratified_split(data, cfg.validation_fraction, rng, train_set, val_set);
  run_epochs(model, train_set, val_set, cfg, rng);
  return model;
}

void continue_training(ProbabilisticModel& model,
                       const std::vector<Epoch>& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ValidationError("continue_training: no data");
  Rng rng = Rng::stream(cfg.seed, 0x4eu);
  std::vector<const Epoch*> train_set, val_set;
  stratified_split(data, cfg.validation_fraction, rng, train_set, val_set);
  run_epochs(model, train_set, val_set, cfg, rng);
}

std::vector<double> posteriors(const ProbabilisticModel& model,
                               const Epoch& epoch) {
  return forward(model, epoch).probs;
}

int predict(const ProbabilisticModel& model, const Epoch& epoch) {
  const auto p = posteriors(model, epoch);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<double> penultimate_features(const ProbabilisticModel& model,
                                         const Epoch& epoch) {
  if (model.kind == ModelKind::mlp1) return forward(model, epoch).hidden;
  return input_vector(model, epoch);
}

double last_layer_change(const ProbabilisticModel& model, const Epoch& epoch,
                         int y) {
  if (y < 0 || y >= model.n_classes)
    throw ValidationError("last_layer_change: class index out of range");
  const Forward f = forward(model, epoch);
  double dz_sq = 0.0;
  for (int r = 0; r < model.n_classes; ++r) {
    const double d = f.probs[r] - (r == y ? 1.0 : 0.0);
    dz_sq += d * d;
  }
  const std::vector<double>& phi =
      model.kind == ModelKind::mlp1 ? f.hidden : f.x;
  return std::sqrt(dz_sq * kernels::sumsq(phi));
}

// ---- persistence -------------------------------------------------------------

namespace {
constexpr char kModelMagic[4] = {'P', 'T', 'L', 'M'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw ParseError("truncated model file");
  return v;
}
} // namespace

void save_model(const ProbabilisticModel& model,
                const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  os.write(kModelMagic, 4);
  put<std::uint32_t>(os, 1); // version
  put<std::uint8_t>(os, static_cast<std::uint8_t>(model.kind));
  put<std::uint32_t>(os, model.n_classes);
  put<std::uint32_t>(os, model.channels);
  put<std::uint32_t>(os, model.len);
  put<std::uint32_t>(os, model.hidden_width);
  put<std::uint32_t>(os, model.n_filters);
  put<std::uint64_t>(os, model.csp_filters.size());
  for (double v : model.csp_filters) put(os, v);
  put<std::uint64_t>(os, model.params.size());
  for (double v : model.params) put(os, v);
  if (!os) throw ValidationError("write failed: " + path.string());
}

ProbabilisticModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0)
    throw ParseError("bad model magic (expected PTLM)");
  if (get<std::uint32_t>(is) != 1)
    throw ParseError("unsupported model schema version");
  ProbabilisticModel m;
  m.kind = static_cast<ModelKind>(get<std::uint8_t>(is));
  m.n_classes = static_cast<int>(get<std::uint32_t>(is));
  m.channels = static_cast<int>(get<std::uint32_t>(is));
  m.len = static_cast<int>(get<std::uint32_t>(is));
  m.hidden_width = static_cast<int>(get<std::uint32_t>(is));
  m.n_filters = static_cast<int>(get<std::uint32_t>(is));
  m.csp_filters.resize(get<std::uint64_t>(is));
  for (double& v : m.csp_filters) v = get<double>(is);
  m.params.resize(get<std::uint64_t>(is));
  for (double& v : m.params) v = get<double>(is);
  if (m.params.size() != param_count(m))
    throw ParseError("model parameter count inconsistent with dims");
  return m;
}

} // namespace ptl
