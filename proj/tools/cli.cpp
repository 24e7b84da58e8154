// Command-line front end: generate / poison / run / sweep / report /
// trigger preview. Exit codes: 0 success, 1 validation error, 2 numerical
// or other runtime error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ptl/config.hpp"
#include "ptl/data.hpp"
#include "ptl/errors.hpp"
#include "ptl/harness.hpp"
#include "ptl/kernels.hpp"
#include "ptl/poisoning.hpp"
#include "ptl/trigger.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ptl::FullConfig load_cfg(const std::string& config_path, std::uint64_t seed,
                         bool seed_set) {
  ptl::FullConfig cfg;
  if (!config_path.empty()) cfg = ptl::load_config(config_path);
  if (seed_set) {
    cfg.experiment.seed = seed;
    cfg.synthetic.seed = seed;
  }
  return cfg;
}

std::vector<ptl::SubjectDataset> load_domains(const std::string& data_dir,
                                              const ptl::SyntheticSpec& synth) {
  if (data_dir.empty()) return ptl::generate_synthetic(synth);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(data_dir)) {
    const auto ext = e.path().extension();
    if (ext == ".ptl" || ext == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ptl::ValidationError("no .ptl or .csv datasets in " + data_dir);
  std::vector<ptl::SubjectDataset> domains;
  for (const auto& f : files)
    domains.push_back(ptl::load_dataset(
        f, f.extension() == ".csv" ? ptl::FileFormat::csv
                                   : ptl::FileFormat::binary));
  return domains;
}

void save_domains(const std::vector<ptl::SubjectDataset>& domains,
                  const std::string& out_dir, const std::string& format) {
  fs::create_directories(out_dir);
  const bool csv = format == "csv";
  for (const auto& ds : domains)
    ptl::save_dataset(ds,
                      fs::path(out_dir) /
                          (ds.subject_id + (csv ? ".csv" : ".ptl")),
                      csv ? ptl::FileFormat::csv : ptl::FileFormat::binary);
}

ptl::ExperimentResult run_one(const ptl::FullConfig& cfg,
                              const std::vector<ptl::SubjectDataset>& domains) {
  ptl::ExperimentResult res = ptl::run_experiment(domains, cfg.experiment);
  res.config_json = ptl::config_to_json(cfg);
  res.config_hash = ptl::config_hash(cfg);
  return res;
}

std::vector<ptl::ExperimentResult> parse_results_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ptl::ValidationError("cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& ex) {
    throw ptl::ParseError(path.string() + ": " + ex.what());
  }
  std::vector<ptl::ExperimentResult> out;
  for (const auto& ej : j.at("experiments")) {
    ptl::ExperimentResult r;
    if (ej.contains("config")) r.config_json = ej["config"].dump(2);
    r.config_hash = ej.value("config_hash", 0ULL);
    r.mean_bca = ej.value("mean_bca", 0.0);
    r.std_bca = ej.value("std_bca", 0.0);
    r.mean_asr = ej.value("mean_asr", 0.0);
    r.std_asr = ej.value("std_asr", 0.0);
    r.n_asr_folds = ej.value("n_asr_folds", 0);
    for (const auto& fj : ej.at("folds")) {
      ptl::FoldResult f;
      f.target_subject = fj.value("target_subject", std::string());
      f.repeat = fj.value("repeat", 0);
      f.fold = fj.value("fold", 0);
      f.bca = fj.value("bca", 0.0);
      if (fj.contains("asr") && !fj["asr"].is_null())
        f.asr = fj["asr"].get<double>();
      f.n_attackable = fj.value("n_attackable", 0);
      f.strategy = fj.value("strategy", std::string());
      f.poisoning_rate = fj.value("poisoning_rate", 0.0);
      f.scenario = fj.value("scenario", std::string());
      f.seed = fj.value("seed", 0ULL);
      f.wall_clock_s = fj.value("wall_clock_s", 0.0);
      if (fj.contains("plan_counts"))
        f.plan_counts = fj["plan_counts"].get<std::vector<int>>();
      f.error = fj.value("error", std::string());
      r.folds.push_back(std::move(f));
    }
    out.push_back(std::move(r));
  }
  return out;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"backdoor-attack simulation toolkit for transfer-learning "
               "time-series pipelines"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir = "out", format = "binary";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string simd = "auto";
  app.add_option("--kernels", simd, "force kernel backend: auto|scalar|avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  auto add_common = [&](CLI::App* cmd, bool with_data) {
    cmd->add_option("-c,--config", config_path, "JSON config file");
    cmd->add_option("-o,--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "master seed override")
        ->each([&](const std::string&) { seed_set = true; });
    if (with_data)
      cmd->add_option("-d,--data", data_dir,
                      "directory of per-subject datasets (.ptl/.csv); "
                      "omitted: synthetic data from the config");
  };

  auto* c_generate = app.add_subcommand("generate", "write synthetic datasets");
  add_common(c_generate, false);
  c_generate->add_option("--format", format, "binary|csv")
      ->check(CLI::IsMember({"binary", "csv"}));

  auto* c_poison = app.add_subcommand(
      "poison", "emit a poisoning plan and poisoned datasets");
  add_common(c_poison, true);
  c_poison->add_option("--format", format, "binary|csv")
      ->check(CLI::IsMember({"binary", "csv"}));

  auto* c_run = app.add_subcommand("run", "one experiment, all LOSO folds");
  add_common(c_run, true);

  auto* c_sweep =
      app.add_subcommand("sweep", "grid over poisoning rates and strategies");
  add_common(c_sweep, true);
  std::vector<double> rates{0.01, 0.02, 0.05, 0.10};
  std::vector<std::string> strategies{"random"};
  c_sweep->add_option("--rates", rates, "poisoning rates");
  c_sweep->add_option("--strategies", strategies, "strategy names");

  auto* c_report = app.add_subcommand("report", "re-render from results.json");
  std::string results_path;
  c_report->add_option("-i,--in", results_path, "results.json path")
      ->required();
  c_report->add_option("-o,--out", out_dir, "output directory");

  auto* c_trigger = app.add_subcommand("trigger", "trigger utilities");
  auto* c_preview =
      c_trigger->add_subcommand("preview", "write one trigger wave as CSV");
  int prev_len = 64;
  double prev_fs = 64.0, prev_amp = 1.0;
  std::string prev_out = "trigger.csv";
  c_preview->add_option("-c,--config", config_path, "JSON config file");
  c_preview->add_option("--len", prev_len, "samples");
  c_preview->add_option("--fs", prev_fs, "sampling rate (Hz)");
  c_preview->add_option("--amplitude", prev_amp, "absolute amplitude");
  c_preview->add_option("-o,--out", prev_out, "CSV path");

  CLI11_PARSE(app, argc, argv);

  ptl::kernels::force(simd);

  if (*c_generate) {
    const auto cfg = load_cfg(config_path, seed, seed_set);
    save_domains(ptl::generate_synthetic(cfg.synthetic), out_dir, format);
    std::cout << "wrote " << cfg.synthetic.n_subjects << " subjects to "
              << out_dir << "\n";
    return 0;
  }

  if (*c_poison) {
    const auto cfg = load_cfg(config_path, seed, seed_set);
    const auto& e = cfg.experiment;
    e.validate();
    auto domains = load_domains(data_dir, cfg.synthetic);
    const auto attacker = ptl::train(
        [&] {
          std::vector<ptl::Epoch> pool;
          for (const auto& ds : domains)
            pool.insert(pool.end(), ds.epochs.begin(), ds.epochs.end());
          return pool;
        }(),
        e.train, e.attacker_model_kind);
    const auto pool = ptl::build_pool(domains, attacker, e.target_class);
    const int P = static_cast<int>(
        std::llround(e.poisoning_rate * pool.entries.size()));
    const auto plan = ptl::select(pool, e.strategy, P, e.seed);
    const double amp_abs =
        e.trigger.amplitude_fraction * ptl::reference_std(domains);
    const auto poisoned =
        ptl::apply_plan(domains, plan, e.trigger, amp_abs, e.target_class);
    fs::create_directories(out_dir);
    ptl::save_plan_json(plan, fs::path(out_dir) / "plan.json",
                        static_cast<int>(domains.size()));
    save_domains(poisoned, out_dir, format);
    std::cout << "selected " << plan.selected.size() << " of "
              << pool.entries.size() << " candidates; wrote plan and "
              << poisoned.size() << " poisoned subjects to " << out_dir
              << "\n";
    return 0;
  }

  if (*c_run) {
    const auto cfg = load_cfg(config_path, seed, seed_set);
    cfg.experiment.validate();
    const auto domains = load_domains(data_dir, cfg.synthetic);
    const auto res = run_one(cfg, domains);
    ptl::report({res}, out_dir);
    std::cout << "mean BCA " << res.mean_bca << ", mean ASR " << res.mean_asr
              << " over " << res.n_asr_folds << " folds with defined ASR; "
              << "results in " << out_dir << "\n";
    return 0;
  }

  if (*c_sweep) {
    const auto base = load_cfg(config_path, seed, seed_set);
    const auto domains = load_domains(data_dir, base.synthetic);
    std::vector<ptl::ExperimentResult> results;
    for (const auto& sname : strategies) {
      std::vector<double> xs, ys;
      for (double rate : rates) {
        ptl::FullConfig cfg = base;
        cfg.experiment.strategy = ptl::strategy_from_name(sname);
        cfg.experiment.poisoning_rate = rate;
        cfg.experiment.validate();
        results.push_back(run_one(cfg, domains));
        xs.push_back(rate);
        ys.push_back(results.back().mean_asr);
        std::cout << sname << " rate " << rate << ": BCA "
                  << results.back().mean_bca << ", ASR "
                  << results.back().mean_asr << "\n";
      }
      if (xs.size() >= 2)
        std::cout << sname << " Spearman(rate, ASR) = "
                  << ptl::spearman(xs, ys) << "\n";
    }
    ptl::report(results, out_dir);
    std::cout << "results in " << out_dir << "\n";
    return 0;
  }

  if (*c_report) {
    ptl::report(parse_results_json(results_path), out_dir);
    std::cout << "rendered to " << out_dir << "\n";
    return 0;
  }

  if (*c_preview) {
    const auto cfg = load_cfg(config_path, seed, seed_set);
    const auto wave =
        ptl::synth_trigger(cfg.experiment.trigger, prev_len, prev_fs, prev_amp);
    std::ofstream os(prev_out);
    if (!os) throw ptl::ValidationError("cannot write " + prev_out);
    os << "index,value\n";
    os.precision(17);
    for (std::size_t i = 0; i < wave.values.size(); ++i)
      os << i << ',' << wave.values[i] << "\n";
    os << "#resolved_phase_s," << wave.resolved_phase_s << "\n";
    std::cout << "wrote " << prev_out << " (phase " << wave.resolved_phase_s
              << " s)\n";
    return 0;
  }

  std::cerr << "trigger: missing subcommand (try 'trigger preview')\n";
  return 1;
}

} // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ptl::ValidationError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  } catch (const ptl::NumericalError& ex) {
    std::cerr << "numerical error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
}
