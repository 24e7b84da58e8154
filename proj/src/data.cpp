#include "ptl/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ptl/errors.hpp"
#include "ptl/kernels.hpp"
#include "ptl/rng.hpp"

namespace ptl {

void SubjectDataset::validate() const {
  if (epochs.empty()) throw ValidationError("dataset has no epochs");
  if (sampling_rate_hz <= 0.0)
    throw ValidationError("sampling_rate_hz must be positive");
  const int c = epochs.front().channels;
  const int l = epochs.front().len;
  if (c < 1 || l < 2)
    throw ValidationError("epochs must have C >= 1 and L >= 2");
  const int m = n_classes();
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const Epoch& e = epochs[i];
    if (e.channels != c || e.len != l)
      throw ValidationError("epoch " + std::to_string(i) +
                            " has mismatched dimensions");
    if (e.label && (*e.label < 0 || *e.label >= m))
      throw ValidationError("epoch " + std::to_string(i) +
                            " label out of range");
    for (double v : e.samples)
      if (!std::isfinite(v))
        throw ValidationError("epoch " + std::to_string(i) +
                              " contains non-finite samples");
  }
}

void SyntheticSpec::validate() const {
  if (n_subjects < 1 || epochs_per_class < 1 || channels < 1 || epoch_len < 2)
    throw ValidationError("synthetic spec: counts must be positive (L >= 2)");
  if (sampling_rate_hz <= 0.0)
    throw ValidationError("synthetic spec: sampling rate must be positive");
  if (noise_sigma < 0.0 || subject_mix_strength < 0.0)
    throw ValidationError("synthetic spec: negative noise/mix strength");
  if (class_freqs_hz.empty())
    throw ValidationError("synthetic spec: need at least one class");
  const double nyquist = sampling_rate_hz / 2.0;
  for (std::size_t i = 0; i < class_freqs_hz.size(); ++i) {
    if (class_freqs_hz[i] <= 0.0 || class_freqs_hz[i] >= nyquist)
      throw ValidationError("synthetic spec: class frequency " +
                            std::to_string(class_freqs_hz[i]) +
                            " outside (0, Nyquist)");
    for (std::size_t j = i + 1; j < class_freqs_hz.size(); ++j)
      if (class_freqs_hz[i] == class_freqs_hz[j])
        throw ValidationError("synthetic spec: duplicate class frequencies");
  }
}

std::vector<SubjectDataset> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int M = static_cast<int>(spec.class_freqs_hz.size());
  const int C = spec.channels;
  const int L = spec.epoch_len;

  std::vector<SubjectDataset> out;
  out.reserve(spec.n_subjects);
  for (int s = 0; s < spec.n_subjects; ++s) {
    Rng rng = Rng::stream(spec.seed, 0x5u, static_cast<std::uint64_t>(s));

    // per-subject mixing matrix I + strength * G
    std::vector<double> mix(std::size_t(C) * C, 0.0);
    for (int i = 0; i < C; ++i)
      for (int j = 0; j < C; ++j)
        mix[std::size_t(i) * C + j] =
            (i == j ? 1.0 : 0.0) + spec.subject_mix_strength * rng.gaussian();

    SubjectDataset ds;
    ds.subject_id = "s" + std::to_string(s);
    ds.sampling_rate_hz = spec.sampling_rate_hz;
    for (int m = 0; m < M; ++m) ds.class_names.push_back("class_" + std::to_string(m));

    for (int e = 0; e < spec.epochs_per_class; ++e) {
      for (int m = 0; m < M; ++m) {
        const double f = spec.class_freqs_hz[m];
        const double amp = 1.0 + 1.0 * (rng.uniform() - 0.5);
        const double jitter = 0.3 * rng.uniform();

        Epoch base(C, L);
        for (int c = 0; c < C; ++c) {
          const double phase = jitter + 0.5 * c; // fixed channel offsets
          for (int t = 0; t < L; ++t)
            base.at(c, t) = amp * std::sin(2.0 * std::numbers::pi * f *
                                               (t / spec.sampling_rate_hz) +
                                           phase);
        }

        Epoch ep(C, L);
        ep.label = m;
        for (int c = 0; c < C; ++c) {
          auto dst = ep.row(c);
          for (int j = 0; j < C; ++j)
            kernels::axpy(mix[std::size_t(c) * C + j], base.row(j), dst);
        }
        if (spec.noise_sigma > 0.0)
          for (double& v : ep.samples) v += spec.noise_sigma * rng.gaussian();
        ds.epochs.push_back(std::move(ep));
      }
    }
    out.push_back(std::move(ds));
  }
  return out;
}

Epoch zscore_standardize(const Epoch& e) {
  Epoch out = e;
  const double L = static_cast<double>(e.len);
  for (int c = 0; c < e.channels; ++c) {
    auto r = out.row(c);
    const double mean = kernels::sum(r) / L;
    for (double& v : r) v -= mean;
    const double sd = std::sqrt(kernels::sumsq(r) / L); // population std
    if (sd > 0.0)
      kernels::scale(1.0 / sd, r);
    else
      for (double& v : r) v = 0.0;
  }
  return out;
}

SubjectDataset zscore_standardize(const SubjectDataset& ds) {
  SubjectDataset out = ds;
  for (auto& e : out.epochs) e = zscore_standardize(e);
  return out;
}

// ---------------------------------------------------------------------------
// file formats

namespace {

constexpr std::uint32_t kLabelSentinel = 0xFFFFFFFFu;
constexpr char kMagic[4] = {'P', 'T', 'L', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, std::size_t& offset) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw ParseError("truncated file at byte offset " + std::to_string(offset));
  offset += 4;
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

void save_binary(const SubjectDataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(ds.channels()));
  write_u32(os, static_cast<std::uint32_t>(ds.epoch_len()));
  write_u32(os, static_cast<std::uint32_t>(ds.epochs.size()));
  write_u32(os, static_cast<std::uint32_t>(ds.n_classes()));
  static_assert(sizeof(double) == 8);
  os.write(reinterpret_cast<const char*>(&ds.sampling_rate_hz), 8);
  for (const Epoch& e : ds.epochs) {
    write_u32(os, e.label ? static_cast<std::uint32_t>(*e.label)
                          : kLabelSentinel);
    for (double v : e.samples) {
      const float f = static_cast<float>(v);
      os.write(reinterpret_cast<const char*>(&f), 4);
    }
  }
  if (!os) throw ValidationError("write failed: " + path.string());
}

SubjectDataset load_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open: " + path.string());
  std::size_t offset = 0;
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("bad magic at byte offset 0 (expected PTL1)");
  offset = 4;
  const std::uint32_t C = read_u32(is, offset);
  const std::uint32_t L = read_u32(is, offset);
  const std::uint32_t N = read_u32(is, offset);
  const std::uint32_t M = read_u32(is, offset);
  if (C < 1 || L < 2 || N < 1 || M < 1)
    throw ParseError("invalid header dimensions at byte offset 4");
  SubjectDataset ds;
  ds.subject_id = path.stem().string();
  if (!is.read(reinterpret_cast<char*>(&ds.sampling_rate_hz), 8))
    throw ParseError("truncated file at byte offset " + std::to_string(offset));
  offset += 8;
  if (!(ds.sampling_rate_hz > 0.0))
    throw ParseError("non-positive sampling rate at byte offset 20");
  for (std::uint32_t m = 0; m < M; ++m)
    ds.class_names.push_back("class_" + std::to_string(m));
  for (std::uint32_t n = 0; n < N; ++n) {
    const std::uint32_t label = read_u32(is, offset);
    if (label != kLabelSentinel && label >= M)
      throw ParseError("label " + std::to_string(label) +
                       " out of range [0," + std::to_string(M) +
                       ") at byte offset " + std::to_string(offset - 4));
    Epoch e(static_cast<int>(C), static_cast<int>(L));
    if (label != kLabelSentinel) e.label = static_cast<int>(label);
    for (double& v : e.samples) {
      float f;
      if (!is.read(reinterpret_cast<char*>(&f), 4))
        throw ParseError("truncated binary payload at byte offset " +
                         std::to_string(offset));
      offset += 4;
      v = static_cast<double>(f);
    }
    ds.epochs.push_back(std::move(e));
  }
  ds.validate();
  return ds;
}

void save_csv(const SubjectDataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path.string());
  const int L = ds.epoch_len();
  os << "subject,epoch,label,channel";
  for (int t = 0; t < L; ++t) os << ",t" << t;
  os << "\n";
  os.precision(17);
  for (std::size_t n = 0; n < ds.epochs.size(); ++n) {
    const Epoch& e = ds.epochs[n];
    for (int c = 0; c < e.channels; ++c) {
      os << ds.subject_id << ',' << n << ',';
      if (e.label) os << *e.label;
      os << ',' << c;
      for (int t = 0; t < L; ++t) os << ',' << e.at(c, t);
      os << "\n";
    }
  }
  // sampling rate rides in a trailing comment row
  os << "#sampling_rate_hz," << ds.sampling_rate_hz << "\n";
  if (!os) throw ValidationError("write failed: " + path.string());
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

SubjectDataset load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty file (line 1)");
  auto header = split_csv(line);
  if (header.size() < 5 || header[0] != "subject" || header[1] != "epoch" ||
      header[2] != "label" || header[3] != "channel")
    throw ParseError("malformed header (line 1)");
  const int L = static_cast<int>(header.size()) - 4;

  SubjectDataset ds;
  ds.sampling_rate_hz = 1.0; // overridden by trailing comment if present
  int max_label = -1;
  std::size_t lineno = 1;
  Epoch cur;
  long cur_epoch = -1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto f = split_csv(line);
      if (f[0] == "#sampling_rate_hz" && f.size() == 2)
        ds.sampling_rate_hz = std::stod(f[1]);
      continue;
    }
    auto f = split_csv(line);
    if (static_cast<int>(f.size()) != L + 4)
      throw ParseError("wrong field count on line " + std::to_string(lineno));
    long epoch_idx, channel;
    try {
      epoch_idx = std::stol(f[1]);
      channel = std::stol(f[3]);
    } catch (const std::exception&) {
      throw ParseError("bad index on line " + std::to_string(lineno));
    }
    if (ds.subject_id.empty()) ds.subject_id = f[0];
    if (epoch_idx != cur_epoch) {
      if (cur_epoch >= 0) ds.epochs.push_back(std::move(cur));
      cur = Epoch(0, L);
      cur_epoch = epoch_idx;
      if (!f[2].empty()) {
        cur.label = std::stoi(f[2]);
        max_label = std::max(max_label, *cur.label);
      }
    }
    if (channel != cur.channels)
      throw ParseError("non-contiguous channel index on line " +
                       std::to_string(lineno));
    ++cur.channels;
    for (int t = 0; t < L; ++t) {
      try {
        cur.samples.push_back(std::stod(f[4 + t]));
      } catch (const std::exception&) {
        throw ParseError("bad sample value on line " + std::to_string(lineno));
      }
    }
  }
  if (cur_epoch >= 0) ds.epochs.push_back(std::move(cur));
  if (ds.epochs.empty()) throw ParseError("no data rows");
  for (int m = 0; m <= std::max(max_label, 0); ++m)
    ds.class_names.push_back("class_" + std::to_string(m));
  ds.validate();
  return ds;
}

} // namespace

void save_dataset(const SubjectDataset& ds, const std::filesystem::path& path,
                  FileFormat format) {
  ds.validate();
  if (format == FileFormat::binary)
    save_binary(ds, path);
  else
    save_csv(ds, path);
}

SubjectDataset load_dataset(const std::filesystem::path& path,
                            FileFormat format) {
  return format == FileFormat::binary ? load_binary(path) : load_csv(path);
}

} // namespace ptl
