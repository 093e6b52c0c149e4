#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vbmi/binio.hpp"
#include "vbmi/client.hpp"
#include "vbmi/codebook.hpp"
#include "vbmi/config.hpp"
#include "vbmi/decoder.hpp"
#include "vbmi/device_server.hpp"
#include "vbmi/harness.hpp"
#include "vbmi/hwcalc.hpp"
#include "vbmi/matrixio.hpp"
#include "vbmi/montage.hpp"
#include "vbmi/psd.hpp"
#include "vbmi/serialize.hpp"
#include "vbmi/service.hpp"
#include "vbmi/store.hpp"
#include "vbmi/synth.hpp"
#include "vbmi/wear.hpp"

// keep httplib last: its platform includes clash with Eigen's internals
#include "httplib.h"

namespace {

std::atomic<bool> g_interrupted{false};

void on_interrupt(int) { g_interrupted.store(true); }

void install_interrupt_handler() {
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
}

// "host:port" -> pair; bare ":port" keeps the default host
std::pair<std::string, std::uint16_t> split_endpoint(const std::string& endpoint,
                                                     const std::string& default_host) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("endpoint must look like host:port, got '" + endpoint + "'");
  }
  const std::string host = colon == 0 ? default_host : endpoint.substr(0, colon);
  const unsigned long port = std::stoul(endpoint.substr(colon + 1));
  if (port > 65535) throw std::invalid_argument("port out of range: " + endpoint);
  return {host, static_cast<std::uint16_t>(port)};
}

int run_code_info(const std::string& config_path, int n_targets) {
  using namespace vbmi;
  code::CodeSequence seq = config_path.empty()
                               ? code::base_code()
                               : code::code_from_config(Config::parse_file(config_path));
  const auto off = code::off_peak_autocorrelation(seq);
  const auto sched = code::target_codes(seq, static_cast<size_t>(n_targets));

  std::printf("code            %s\n", seq.to_string().c_str());
  std::printf("length          %zu bits\n", seq.length());
  std::printf("bit rate        %.6g Hz\n", seq.bit_rate_hz());
  std::printf("trial duration  %.6g s (%zu samples at 250 Hz)\n", seq.trial_duration_s(),
              seq.trial_samples(250.0));
  std::printf("hash            %08x\n", seq.hash());
  std::printf("autocorr peak   %d (lag 0)\n",
              code::periodic_autocorrelation(seq, 0));
  std::printf("off-peak range  [%d, %d], spread %d\n", off.min_value, off.max_value,
              off.spread());
  std::printf("targets         %zu\n", sched.n_targets);
  for (size_t k = 0; k < sched.n_targets; ++k) {
    std::printf("  target %zu lag %zu bits\n", k, sched.target_lags[k]);
  }
  return 0;
}

int run_hw_budget(const std::string& config_path) {
  using namespace vbmi;
  hw::HwBudget budget =
      config_path.empty() ? hw::HwBudget{} : hw::budget_from_config(Config::parse_file(config_path));
  std::fputs(hw::budget_table(budget, std::span<const double>(hw::kGainSettings)).c_str(), stdout);
  return 0;
}

int run_analyze(const std::string& in_path, const std::string& summary_path) {
  using namespace vbmi;
  const io::MatrixFile mf = io::read_matrix(in_path);
  const auto channels = mf.data.rows();
  const auto samples = mf.data.cols();
  std::printf("file      %s\n", in_path.c_str());
  std::printf("channels  %td\n", channels);
  std::printf("samples   %td (%.3f s at %.6g Hz)\n", samples,
              static_cast<double>(samples) / mf.fs_hz, mf.fs_hz);
  std::printf("%-8s %14s %14s %16s %16s\n", "channel", "v_pp [uV]", "v_rms [uV]",
              "P(1-100) [V^2]", "PSD@50 [V^2/Hz]");

  nlohmann::json summary;
  summary["fs_hz"] = mf.fs_hz;
  summary["channels"] = channels;
  summary["samples"] = samples;
  summary["per_channel"] = nlohmann::json::array();

  for (Eigen::Index c = 0; c < channels; ++c) {
    std::vector<double> x(mf.data.row(c).begin(), mf.data.row(c).end());
    const auto nm = dsp::noise_metrics(x);
    const auto psd = dsp::welch_psd(x, mf.fs_hz);
    const double inband = dsp::band_power(psd, 1.0, 100.0);
    const auto bin = static_cast<size_t>(std::lround(50.0 / psd.df_hz));
    const double p50 = bin < psd.power.size() ? psd.power[bin] : 0.0;
    std::printf("%-8td %14.4f %14.4f %16.6e %16.6e\n", c, nm.v_pp * 1e6, nm.v_rms * 1e6, inband,
                p50);
    summary["per_channel"].push_back({{"channel", c},
                                      {"v_pp_volt", nm.v_pp},
                                      {"v_rms_volt", nm.v_rms},
                                      {"band_power_1_100_v2", inband},
                                      {"psd_50hz_v2_per_hz", p50}});
  }
  if (!summary_path.empty()) {
    io::write_file(summary_path, summary.dump(2) + "\n");
    std::printf("summary written to %s\n", summary_path.c_str());
  }
  return 0;
}

int run_serve_device(const std::string& listen, const std::string& input, double seconds,
                     double pace, int spp, std::uint64_t seed, double snr_db) {
  using namespace vbmi;
  proto::DeviceSource source;
  if (!input.empty()) {
    const io::MatrixFile mf = io::read_matrix(input);
    if (mf.data.rows() != proto::kStreamChannels) {
      throw std::invalid_argument("serve-device: input must have 9 channel rows, got " +
                                  std::to_string(mf.data.rows()));
    }
    source.samples_volt = mf.data;
    source.impedance_kohm.fill(5.0);
  } else {
    // synthetic wearer idling (no stimulation): background activity only
    auto model = synth::default_subject(seed);
    model.snr_db = snr_db;
    synth::Subject subject(model, code::base_code());
    const auto total = static_cast<std::uint64_t>(std::lround(seconds * 250.0));
    source.samples_volt = subject.render_session({}, total);
    for (std::size_t c = 0; c < proto::kStreamChannels; ++c) {
      source.impedance_kohm[c] = subject.impedance_of(c);
    }
  }

  proto::DeviceSettings settings;
  std::tie(settings.host, settings.port) = split_endpoint(listen, settings.host);
  settings.pace = pace;
  settings.samples_per_packet = spp;

  const double recording_s = static_cast<double>(source.samples_volt.cols()) / 250.0;
  proto::DeviceServer server(settings, std::move(source));
  server.start();
  std::printf("device listening on %s:%u  (%.1f s of recording, pace %gx, %d samples/packet)\n",
              settings.host.c_str(), server.port(), recording_s, pace, spp);
  std::fflush(stdout);

  install_interrupt_handler();
  while (!g_interrupted.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server.stop();
  std::printf("\nserved %llu connection(s), %llu packets, %llu bytes\n",
              static_cast<unsigned long long>(server.connections_served()),
              static_cast<unsigned long long>(server.packets_sent()),
              static_cast<unsigned long long>(server.bytes_sent()));
  return 0;
}

int run_acquire(const std::string& connect, double seconds, const std::string& out_path) {
  using namespace vbmi;
  const auto [host, port] = split_endpoint(connect, "127.0.0.1");
  proto::ClientSession session(host, port);
  session.connect();
  std::printf("device: %s\n", session.command("INFO").c_str());
  std::printf("impedance: %s\n", session.command("IMPEDANCE").c_str());

  const auto want = static_cast<std::uint64_t>(std::lround(seconds * 250.0));
  std::vector<proto::SampleChunk> chunks;
  std::uint64_t got = 0;
  session.start_stream();
  while (got < want) {
    auto chunk = session.next_chunk();
    if (!chunk) break;  // device ran out of recording
    got += static_cast<std::uint64_t>(chunk->values_volt.cols());
    chunks.push_back(std::move(*chunk));
  }
  session.stop_stream();

  std::printf("received %llu samples (%.2f s)\n", static_cast<unsigned long long>(got),
              static_cast<double>(got) / 250.0);
  for (const auto& gap : session.gaps()) {
    std::printf("  gap: %u samples lost before index %u\n", gap.missing_samples,
                gap.expected_index);
  }
  if (session.corrupt_packets() > 0) {
    std::printf("  %llu corrupt packet(s) discarded\n",
                static_cast<unsigned long long>(session.corrupt_packets()));
  }

  if (got >= 250) {
    const auto states = proto::wear_state(chunks);
    std::string poor;
    for (std::size_t c = 0; c < states.size(); ++c) {
      if (states[c] == proto::WearState::poor) {
        if (!poor.empty()) poor += ", ";
        poor += c < static_cast<std::size_t>(kAcqChannels)
                    ? std::string(kMontage[c])
                    : std::string(c == kAcqChannels ? kReferenceName : kBiasName);
      }
    }
    std::printf("contact check: %s\n", poor.empty() ? "all channels good" : ("POOR: " + poor).c_str());
  }

  if (!out_path.empty() && got > 0) {
    Eigen::MatrixXd all(proto::kStreamChannels, static_cast<Eigen::Index>(got));
    Eigen::Index col = 0;
    for (const auto& chunk : chunks) {
      all.middleCols(col, chunk.values_volt.cols()) = chunk.values_volt;
      col += chunk.values_volt.cols();
    }
    io::write_matrix(out_path, all, 250.0);
    std::printf("recording written to %s\n", out_path.c_str());
  }
  return 0;
}

int run_synth_epochs(int n_targets, int reps, double snr_db, std::uint64_t seed,
                     const std::string& out_path) {
  using namespace vbmi;
  auto model = synth::default_subject(seed);
  model.snr_db = snr_db;
  model.rng_seed = seed;
  synth::Subject subject(model, code::base_code());
  const auto sched = code::target_codes(subject.code(), static_cast<std::size_t>(n_targets));

  std::vector<dsp::Epoch> epochs;
  for (int rep = 0; rep < reps; ++rep) {
    for (int k = 0; k < n_targets; ++k) {
      dsp::Epoch e;
      e.data = subject.generate_trial(sched.target_lags[static_cast<std::size_t>(k)]);
      e.data = e.data.colwise() - e.data.rowwise().mean().eval();
      e.target_label = k;
      e.trial_ordinal = rep;
      e.mean_removed = true;
      epochs.push_back(std::move(e));
    }
  }
  io::write_epochs(out_path, epochs, 250.0);
  std::printf("%zu labeled epochs (%d classes x %d reps) written to %s\n", epochs.size(),
              n_targets, reps, out_path.c_str());
  return 0;
}

int run_train(const std::string& epochs_path, const std::string& algo_name,
              const std::string& out_path) {
  using namespace vbmi;
  const io::EpochFile file = io::read_epochs(epochs_path);
  int max_label = -1;
  for (const auto& e : file.epochs) max_label = std::max(max_label, e.target_label);
  if (max_label < 0) throw std::invalid_argument("train: epochs carry no labels");
  const auto n_classes = static_cast<std::size_t>(max_label) + 1;

  const auto code = code::base_code();
  const auto sched = code::target_codes(code, n_classes);
  decode::ModelMeta meta;
  meta.fs_hz = file.fs_hz;
  meta.epoch_samples = static_cast<std::uint32_t>(file.epochs.front().data.cols());
  meta.montage_hash = montage_hash();
  meta.code_hash = code.hash();
  meta.class_lags.assign(sched.target_lags.begin(), sched.target_lags.end());

  const auto algo = backend::algo_from_name(algo_name);
  std::string blob;
  if (algo == backend::Algo::trca) {
    blob = backend::serialize_model(decode::trca_train(file.epochs, meta));
  } else {
    const std::vector<std::size_t> lags(sched.target_lags.begin(), sched.target_lags.end());
    blob = backend::serialize_model(
        decode::tdca_train(file.epochs, decode::code_references(code, lags, file.fs_hz), meta));
  }
  io::write_file(out_path, blob);
  std::printf("%s model over %zu classes (%zu epochs) -> %s (%zu bytes)\n",
              std::string(backend::algo_name(algo)).c_str(), n_classes, file.epochs.size(),
              out_path.c_str(), blob.size());
  return 0;
}

int run_infer(const std::string& epochs_path, const std::string& model_path) {
  using namespace vbmi;
  const io::EpochFile file = io::read_epochs(epochs_path);
  const std::string blob = io::read_file(model_path);
  const auto algo = backend::peek_algo(blob);

  decode::TrcaModel trca;
  decode::TdcaModel tdca;
  if (algo == backend::Algo::trca) {
    trca = backend::deserialize_trca(blob);
  } else {
    tdca = backend::deserialize_tdca(blob);
  }

  int labeled = 0;
  int correct = 0;
  std::printf("%-8s %-8s %-10s %-10s\n", "epoch", "label", "decision", "margin");
  for (std::size_t i = 0; i < file.epochs.size(); ++i) {
    const auto& e = file.epochs[i];
    const auto sv = algo == backend::Algo::trca ? decode::trca_score(trca, e.data)
                                                : decode::tdca_score(tdca, e.data);
    std::printf("%-8zu %-8d %-10d %-10.4f%s\n", i, e.target_label, sv.decision, sv.margin,
                sv.tie ? "  (tie)" : "");
    if (e.target_label >= 0) {
      ++labeled;
      if (sv.decision == e.target_label) ++correct;
    }
  }
  if (labeled > 0) {
    std::printf("accuracy %d/%d = %.2f%%\n", correct, labeled,
                100.0 * static_cast<double>(correct) / static_cast<double>(labeled));
  }
  return 0;
}

int run_serve_templates(const std::string& listen, const std::string& store_dir,
                        const std::string& tokens_file) {
  using namespace vbmi;
  const auto [host, port] = split_endpoint(listen, "127.0.0.1");
  backend::TemplateStore store(store_dir);
  backend::AuthTable auth = backend::AuthTable::from_config(Config::parse_file(tokens_file));
  if (auth.empty()) {
    throw std::invalid_argument("serve-templates: tokens file defines no tokens");
  }
  backend::TemplateService service(store, auth);

  httplib::Server server;
  service.attach(server);
  if (!server.bind_to_port(host, port)) {
    throw std::runtime_error("serve-templates: cannot bind " + host + ":" +
                             std::to_string(port));
  }
  install_interrupt_handler();
  std::thread watcher([&server] {
    while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  std::printf("template service on %s:%u, store at %s\n", host.c_str(), port, store_dir.c_str());
  std::fflush(stdout);
  server.listen_after_bind();
  watcher.join();
  std::printf("\nstopped\n");
  return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out_path,
                       bool reference_paper) {
  using namespace vbmi;
  harness::ExperimentConfig cfg = config_path.empty()
                                      ? harness::ExperimentConfig{}
                                      : harness::ExperimentConfig::from_config(
                                            Config::parse_file(config_path));
  const auto report = harness::run_experiment(cfg);

  std::printf("subjects        %d\n", cfg.n_subjects);
  std::printf("targets         %d, %d trial(s) per selection\n", cfg.n_targets,
              cfg.n_trials_per_selection);
  std::printf("selections      %d (%d skipped)\n", report.total_selections, report.total_skipped);
  std::printf("accuracy        %.2f%% +/- %.2f%%\n", report.mean_accuracy * 100.0,
              report.std_error * 100.0);
  std::printf("DTI             %.2f s\n", report.dti_s);
  std::printf("ITR             %.2f bits/min\n", report.itr_bits_per_min);
  std::printf("score latency   p50 %.3f ms, p99 %.3f ms, max %.3f ms\n", report.latency.p50_ms,
              report.latency.p99_ms, report.latency.max_ms);
  if (reference_paper) {
    std::printf("\n%s", harness::reference_comparison(report).c_str());
  }
  if (!out_path.empty()) {
    io::write_file(out_path, report.full_json() + "\n");
    std::printf("report written to %s\n", out_path.c_str());
  }
  return 0;
}

int run_calibrate_snr(double target, int subjects, std::uint64_t seed, double pace) {
  using namespace vbmi;
  harness::ExperimentConfig cfg;
  cfg.n_subjects = subjects;
  cfg.selections_per_class = 3;
  cfg.seed = seed;
  cfg.pace = pace;
  const double snr = harness::calibrate_snr(target, cfg);
  std::printf("snr_db = %.4f reaches %.1f%% accuracy (7 targets, 2 trials)\n", snr,
              target * 100.0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale visual BMI toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  int n_targets = 7;
  auto* code_info = app.add_subcommand("code-info", "print flicker-code properties");
  code_info->add_option("--config", config_path, "key=value config with a code override");
  code_info->add_option("--targets", n_targets, "number of targets for the lag schedule");

  std::string hw_config;
  auto* hw_budget = app.add_subcommand("hw-budget", "front-end voltage budget table");
  hw_budget->add_option("--config", hw_config, "key=value config with impedance overrides");

  std::string analyze_in, analyze_summary;
  auto* analyze = app.add_subcommand("analyze", "PSD and noise metrics for a matrix file");
  analyze->add_option("input", analyze_in, "binary matrix file")->required();
  analyze->add_option("--summary", analyze_summary, "write a JSON summary here");

  std::string serve_listen = "127.0.0.1:9750", serve_input;
  double serve_seconds = 60.0, serve_pace = 1.0, serve_snr = 0.0;
  int serve_spp = 10;
  std::uint64_t serve_seed = 1;
  auto* serve_device = app.add_subcommand("serve-device", "simulated headset on a TCP port");
  serve_device->add_option("--listen", serve_listen, "host:port to listen on");
  serve_device->add_option("--input", serve_input, "9-channel matrix file to stream");
  serve_device->add_option("--seconds", serve_seconds, "synthetic recording length");
  serve_device->add_option("--pace", serve_pace, "wall-clock speedup (1 = real time)");
  serve_device->add_option("--samples-per-packet", serve_spp, "samples per wire packet")
      ->check(CLI::Range(1, 255));
  serve_device->add_option("--seed", serve_seed, "synthetic wearer seed");
  serve_device->add_option("--snr-db", serve_snr, "synthetic wearer snr");

  std::string acquire_connect = "127.0.0.1:9750", acquire_out;
  double acquire_seconds = 5.0;
  auto* acquire = app.add_subcommand("acquire", "record from a device to a matrix file");
  acquire->add_option("--connect", acquire_connect, "device host:port");
  acquire->add_option("--seconds", acquire_seconds, "how much to record");
  acquire->add_option("--out", acquire_out, "write the recording here");

  int se_targets = 7, se_reps = 3;
  double se_snr = 0.0;
  std::uint64_t se_seed = 1;
  std::string se_out;
  auto* synth_epochs = app.add_subcommand("synth-epochs", "labeled synthetic trials to a file");
  synth_epochs->add_option("--targets", se_targets, "number of classes")->check(CLI::Range(1, 28));
  synth_epochs->add_option("--reps", se_reps, "trials per class");
  synth_epochs->add_option("--snr-db", se_snr, "evoked-to-noise ratio");
  synth_epochs->add_option("--seed", se_seed, "wearer seed");
  synth_epochs->add_option("--out", se_out, "epoch file to write")->required();

  std::string train_epochs, train_algo = "trca", train_out;
  auto* train = app.add_subcommand("train", "fit a decoder on an epoch file");
  train->add_option("--epochs", train_epochs, "labeled epoch file")->required();
  train->add_option("--algo", train_algo, "trca or tdca");
  train->add_option("--out", train_out, "model file to write")->required();

  std::string infer_epochs, infer_model;
  auto* infer = app.add_subcommand("infer", "score an epoch file against a model");
  infer->add_option("--epochs", infer_epochs, "epoch file")->required();
  infer->add_option("--model", infer_model, "model file")->required();

  std::string st_listen = "127.0.0.1:9760", st_store = "templates", st_tokens;
  auto* serve_templates = app.add_subcommand("serve-templates", "template store over HTTP");
  serve_templates->add_option("--listen", st_listen, "host:port to listen on");
  serve_templates->add_option("--store-dir", st_store, "store directory");
  serve_templates->add_option("--tokens-file", st_tokens, "token = user,user config")->required();

  std::string exp_config, exp_out;
  bool exp_reference = false;
  auto* run_exp = app.add_subcommand("run-experiment", "closed-loop synthetic experiment");
  run_exp->add_option("--config", exp_config, "experiment config file");
  run_exp->add_option("--out", exp_out, "write the JSON report here");
  run_exp->add_flag("--reference-paper", exp_reference,
                    "print published reference values beside measured ones");

  double cal_target = 0.9222, cal_pace = 1000.0;
  int cal_subjects = 10;
  std::uint64_t cal_seed = 42;
  auto* calibrate = app.add_subcommand("calibrate-snr", "find the snr for a target accuracy");
  calibrate->add_option("--target", cal_target, "accuracy in (1/7, 1)");
  calibrate->add_option("--subjects", cal_subjects, "subjects per probe");
  calibrate->add_option("--seed", cal_seed, "experiment seed");
  calibrate->add_option("--pace", cal_pace, "streaming speedup");

  CLI11_PARSE(app, argc, argv);

  try {
    if (code_info->parsed()) return run_code_info(config_path, n_targets);
    if (hw_budget->parsed()) return run_hw_budget(hw_config);
    if (analyze->parsed()) return run_analyze(analyze_in, analyze_summary);
    if (serve_device->parsed()) {
      return run_serve_device(serve_listen, serve_input, serve_seconds, serve_pace, serve_spp,
                              serve_seed, serve_snr);
    }
    if (acquire->parsed()) return run_acquire(acquire_connect, acquire_seconds, acquire_out);
    if (synth_epochs->parsed()) {
      return run_synth_epochs(se_targets, se_reps, se_snr, se_seed, se_out);
    }
    if (train->parsed()) return run_train(train_epochs, train_algo, train_out);
    if (infer->parsed()) return run_infer(infer_epochs, infer_model);
    if (serve_templates->parsed()) return run_serve_templates(st_listen, st_store, st_tokens);
    if (run_exp->parsed()) return run_experiment_cmd(exp_config, exp_out, exp_reference);
    if (calibrate->parsed()) {
      return run_calibrate_snr(cal_target, cal_subjects, cal_seed, cal_pace);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
