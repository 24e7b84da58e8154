#ifndef PTL_MODEL_HPP
#define PTL_MODEL_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ptl/data.hpp"

namespace ptl {

enum class ModelKind { logreg, mlp1, csp_logreg };
enum class Optimizer { sgd, adam };

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 0.05;
  int max_epochs = 150;
  int patience = 15;
  double validation_fraction = 0.2;
  Optimizer optimizer = Optimizer::adam;
  int hidden_width = 32; // mlp1 only
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainingMeta {
  int epochs_run = 0;
  int best_epoch = 0;
  double final_train_loss = 0.0;
  double best_val_loss = 0.0;
};

/// Desk-scale probabilistic classifier with a uniform contract: class
/// posteriors, penultimate features and last-layer gradient norms.
struct ProbabilisticModel {
  ModelKind kind = ModelKind::logreg;
  int n_classes = 0;
  int channels = 0;
  int len = 0;
  int hidden_width = 0;          // mlp1
  int n_filters = 0;             // csp_logreg
  std::vector<double> csp_filters; // n_filters x channels, row-major
  std::vector<double> params;    // flat parameter vector
  TrainingMeta meta;

  int input_dim() const { return channels * len; }
  int feature_dim() const;
};

ProbabilisticModel train(const std::vector<Epoch>& data,
                         const TrainConfig& cfg, ModelKind kind);

/// Continues mini-batch training of an already-trained model on new labeled
/// data (the fine-tuning scenario). The architecture is frozen.
void continue_training(ProbabilisticModel& model,
                       const std::vector<Epoch>& data, const TrainConfig& cfg);

std::vector<double> posteriors(const ProbabilisticModel& model,
                               const Epoch& epoch);
int predict(const ProbabilisticModel& model, const Epoch& epoch);
std::vector<double> penultimate_features(const ProbabilisticModel& model,
                                         const Epoch& epoch);
/// Frobenius norm of the last-layer cross-entropy gradient (p - e_y) phi^T.
double last_layer_change(const ProbabilisticModel& model, const Epoch& epoch,
                         int y);

/// Mean cross-entropy over labeled epochs (used by training and by the
/// finite-difference gradient checks).
double ce_loss(const ProbabilisticModel& model,
               const std::vector<const Epoch*>& batch);
std::vector<double> ce_grad(const ProbabilisticModel& model,
                            const std::vector<const Epoch*>& batch);

void save_model(const ProbabilisticModel& model,
                const std::filesystem::path& path);
ProbabilisticModel load_model(const std::filesystem::path& path);

} // namespace ptl

#endif
