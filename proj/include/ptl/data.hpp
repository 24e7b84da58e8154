#ifndef PTL_DATA_HPP
#define PTL_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ptl {

/// One multichannel trial: C channels x L time points, row-major.
struct Epoch {
  int channels = 0;
  int len = 0;
  std::vector<double> samples; // channels * len, row-major
  std::optional<int> label;

  Epoch() = default;
  Epoch(int c, int l) : channels(c), len(l), samples(std::size_t(c) * l, 0.0) {}

  std::span<double> row(int c) {
    return {samples.data() + std::size_t(c) * len, std::size_t(len)};
  }
  std::span<const double> row(int c) const {
    return {samples.data() + std::size_t(c) * len, std::size_t(len)};
  }
  double& at(int c, int t) { return samples[std::size_t(c) * len + t]; }
  double at(int c, int t) const { return samples[std::size_t(c) * len + t]; }
};

/// All epochs of one subject; the unit of domain alignment.
struct SubjectDataset {
  std::string subject_id;
  double sampling_rate_hz = 0.0;
  std::vector<std::string> class_names;
  std::vector<Epoch> epochs;

  int n_classes() const { return static_cast<int>(class_names.size()); }
  int channels() const { return epochs.empty() ? 0 : epochs.front().channels; }
  int epoch_len() const { return epochs.empty() ? 0 : epochs.front().len; }

  void validate() const; // throws ValidationError on invariant breach
};

struct SyntheticSpec {
  int n_subjects = 8;
  int epochs_per_class = 100;
  int channels = 8;
  int epoch_len = 64;
  double sampling_rate_hz = 64.0;
  std::vector<double> class_freqs_hz = {7.0, 12.0};
  double noise_sigma = 0.3;
  double subject_mix_strength = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
};

std::vector<SubjectDataset> generate_synthetic(const SyntheticSpec& spec);

/// Per-epoch per-channel z-scoring (population std; flat channels -> zeros).
Epoch zscore_standardize(const Epoch& e);
SubjectDataset zscore_standardize(const SubjectDataset& ds);

enum class FileFormat { binary, csv };

void save_dataset(const SubjectDataset& ds, const std::filesystem::path& path,
                  FileFormat format);
SubjectDataset load_dataset(const std::filesystem::path& path,
                            FileFormat format);

} // namespace ptl

#endif
