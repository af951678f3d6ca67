// Command-line driver: sampling, kernel dumps, responses, training,
// corruption, evaluation, analysis, and reporting, with per-run manifests.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <opencv2/imgcodecs.hpp>

#include "CLI11.hpp"
#include "json.hpp"
#include "v1net/analysis.hpp"
#include "v1net/augment.hpp"
#include "v1net/backend.hpp"
#include "v1net/corruptions.hpp"
#include "v1net/dataset.hpp"
#include "v1net/frontend.hpp"
#include "v1net/gabor.hpp"
#include "v1net/manifest.hpp"
#include "v1net/sampling.hpp"
#include "v1net/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

v1::TrainConfig load_train_config(const std::string& path) {
  v1::TrainConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open train config: " + path);
  json j;
  is >> j;
  if (j.contains("lr0")) cfg.lr0 = j["lr0"].get<double>();
  if (j.contains("momentum")) cfg.momentum = j["momentum"].get<double>();
  if (j.contains("weight_decay")) cfg.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
  if (j.contains("plateau_threshold"))
    cfg.plateau_threshold = j["plateau_threshold"].get<double>();
  if (j.contains("plateau_patience"))
    cfg.plateau_patience = j["plateau_patience"].get<int>();
  if (j.contains("augment")) cfg.augment = j["augment"].get<bool>();
  return cfg;
}

void save_image_png(const float* img, int H, int W, const fs::path& path) {
  cv::Mat m(H, W, CV_8UC3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      auto& px = m.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) {
        float v = img[c * plane + y * W + x];
        v = std::min(1.0f, std::max(0.0f, v));
        px[2 - c] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  if (!cv::imwrite(path.string(), m))
    throw std::runtime_error("failed to write " + path.string());
}

v1::VariantAnalysis analyze_model(const v1::FilterBank& bank,
                                  const v1::Backend& net,
                                  const v1::LoadedDataset& data, int batch) {
  const int n = std::min<int>(batch, data.images.dim(0));
  v1::Tensor imgs({n, 3, data.images.dim(2), data.images.dim(3)});
  std::copy(data.images.v.begin(),
            data.images.v.begin() + imgs.size(), imgs.v.begin());
  v1::normalize_batch(imgs);

  // Chunked V1 forward with running per-unit sums so the full activation
  // tensor never materializes.
  const std::size_t per_img = static_cast<std::size_t>(3) * imgs.dim(2) * imgs.dim(3);
  const int C = bank.num_channels();
  std::vector<double> s1, s2;
  int units = 0;
  const int chunk = 50;
  for (int s = 0; s < n; s += chunk) {
    const int B = std::min(chunk, n - s);
    v1::Tensor part({B, 3, imgs.dim(2), imgs.dim(3)});
    std::copy(imgs.data() + s * per_img, imgs.data() + (s + B) * per_img,
              part.data());
    auto acts = v1::vone_forward(bank, part);
    if (s == 0) {
      units = acts.dim(2) * acts.dim(3);
      s1.assign(static_cast<std::size_t>(C) * units, 0.0);
      s2.assign(s1.size(), 0.0);
    }
    for (int b = 0; b < B; ++b) {
      const float* p = acts.data() + static_cast<std::size_t>(b) * C * units;
      for (std::size_t i = 0; i < s1.size(); ++i) {
        s1[i] += p[i];
        s2[i] += static_cast<double>(p[i]) * p[i];
      }
    }
  }
  v1::ResponseStats stats;
  stats.mean_act.resize(C);
  stats.sparseness.resize(C);
  for (int c = 0; c < C; ++c) {
    double act = 0.0, sp = 0.0;
    for (int u = 0; u < units; ++u) {
      const std::size_t i = static_cast<std::size_t>(c) * units + u;
      act += s1[i];
      if (s2[i] > 0.0) {
        const double num = 1.0 - (s1[i] / n) * (s1[i] / n) / (s2[i] / n);
        sp += num / (1.0 - 1.0 / n);
      }
    }
    stats.mean_act[c] = act / (static_cast<double>(n) * units);
    stats.sparseness[c] = sp / units;
  }

  v1::VariantAnalysis v;
  v.descriptors = bank.descriptors;
  v.stats = stats;
  v.weights = v1::mean_abs_downstream_weights(net.bottleneck_weight());
  return v;
}

int run(int argc, char** argv) {
  CLI::App app{"V1 front-end robustness workbench"};
  app.require_subcommand(1);

  // ---- synth-data ----
  auto* synth = app.add_subcommand("synth-data", "generate the synthetic dataset");
  std::string synth_out;
  int synth_classes = 10, synth_train = 100, synth_val = 20;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output dataset root")->required();
  synth->add_option("--classes", synth_classes);
  synth->add_option("--train-per-class", synth_train);
  synth->add_option("--val-per-class", synth_val);
  synth->add_option("--seed", synth_seed);

  // ---- sample ----
  auto* sample = app.add_subcommand("sample", "sample a filter bank");
  std::string sample_regime = "bio", sample_out, sample_table;
  std::uint64_t sample_seed = 0;
  int n_simple = 256, n_complex = 256;
  bool linear_sf = false;
  sample->add_option("--regime", sample_regime, "bio|uniform")->required();
  sample->add_option("--seed", sample_seed);
  sample->add_option("--out", sample_out, "bank output file")->required();
  sample->add_option("--table", sample_table, "distribution table (bio)");
  sample->add_option("--n-simple", n_simple);
  sample->add_option("--n-complex", n_complex);
  sample->add_flag("--linear-sf", linear_sf, "uniform regime: linear SF scale");

  // ---- dump-kernels ----
  auto* dumpk = app.add_subcommand("dump-kernels", "write kernels as PGM images");
  std::string dump_bank, dump_out;
  int dump_count = -1;
  dumpk->add_option("--bank", dump_bank)->required();
  dumpk->add_option("--out", dump_out)->required();
  dumpk->add_option("--count", dump_count);

  // ---- respond ----
  auto* respond = app.add_subcommand("respond", "V1 activations for a dataset");
  std::string resp_bank, resp_images, resp_out, resp_split = "val";
  int resp_limit = -1;
  respond->add_option("--bank", resp_bank)->required();
  respond->add_option("--images", resp_images)->required();
  respond->add_option("--split", resp_split);
  respond->add_option("--out", resp_out)->required();
  respond->add_option("--limit", resp_limit);

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train the backend");
  std::string train_bank, train_data, train_cfg_path, train_out;
  std::uint64_t train_seed = 0;
  int train_epochs = -1;
  train_cmd->add_option("--bank", train_bank)->required();
  train_cmd->add_option("--data", train_data)->required();
  train_cmd->add_option("--config", train_cfg_path, "JSON train config");
  train_cmd->add_option("--out", train_out, "checkpoint directory")->required();
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--epochs", train_epochs, "override config epochs");

  // ---- corrupt ----
  auto* corrupt_cmd = app.add_subcommand("corrupt", "write corrupted images");
  std::string cor_in, cor_kind, cor_out, cor_levels, cor_split = "val";
  int cor_sev = 3;
  std::uint64_t cor_seed = 0;
  corrupt_cmd->add_option("--in", cor_in, "dataset root")->required();
  corrupt_cmd->add_option("--split", cor_split);
  corrupt_cmd->add_option("--kind", cor_kind)->required();
  corrupt_cmd->add_option("--severity", cor_sev)->required();
  corrupt_cmd->add_option("--out", cor_out)->required();
  corrupt_cmd->add_option("--levels", cor_levels, "severity constants JSON");
  corrupt_cmd->add_option("--seed", cor_seed);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "clean + corruption accuracy");
  std::string ev_ckpt, ev_bank, ev_data, ev_out, ev_corruptions = "all",
              ev_levels, ev_model = "model";
  std::uint64_t ev_seed = 0;
  eval_cmd->add_option("--ckpt", ev_ckpt, "checkpoint directory")->required();
  eval_cmd->add_option("--bank", ev_bank)->required();
  eval_cmd->add_option("--data", ev_data)->required();
  eval_cmd->add_option("--corruptions", ev_corruptions, "all|none");
  eval_cmd->add_option("--levels", ev_levels);
  eval_cmd->add_option("--out", ev_out, "results CSV")->required();
  eval_cmd->add_option("--seed", ev_seed);
  eval_cmd->add_option("--model", ev_model, "model name for the CSV");

  // ---- analyze ----
  auto* analyze_cmd = app.add_subcommand("analyze", "response/weight analysis");
  std::string an_ckpt, an_bank, an_images, an_out;
  int an_batch = 1000;
  analyze_cmd->add_option("--ckpt", an_ckpt)->required();
  analyze_cmd->add_option("--bank", an_bank)->required();
  analyze_cmd->add_option("--images", an_images, "dataset root")->required();
  analyze_cmd->add_option("--out", an_out, "analysis directory")->required();
  analyze_cmd->add_option("--batch", an_batch, "statistics batch size");

  // ---- report ----
  auto* report_cmd = app.add_subcommand("report", "cross-variant summary");
  std::string rep_a, rep_b, rep_out;
  std::vector<std::string> rep_evals;
  report_cmd->add_option("--analysis-a", rep_a, "first analysis dir (stats.csv)")
      ->required();
  report_cmd->add_option("--analysis-b", rep_b, "second analysis dir")->required();
  report_cmd->add_option("--eval", rep_evals, "eval results CSVs to collate");
  report_cmd->add_option("--out", rep_out, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // --help is not an error
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage message
    return 2;
  }

  if (*synth) {
    v1::make_synthetic_dataset(synth_out, synth_classes, synth_train, synth_val,
                               synth_seed);
    v1::write_manifest(synth_out, "synth-data",
                       {{"classes", synth_classes},
                        {"train_per_class", synth_train},
                        {"val_per_class", synth_val},
                        {"seed", synth_seed}},
                       {});
    return 0;
  }

  if (*sample) {
    v1::SamplerConfig cfg;
    cfg.seed = sample_seed;
    cfg.n_simple = n_simple;
    cfg.n_complex = n_complex;
    cfg.log_sf = !linear_sf;
    std::vector<v1::ChannelDescriptor> descs;
    fs::path table_path;
    if (sample_regime == "uniform") {
      cfg.regime = v1::SamplingRegime::Uniform;
      descs = v1::sample_uniform(cfg);
    } else if (sample_regime == "bio") {
      cfg.regime = v1::SamplingRegime::Biological;
      table_path = sample_table.empty() ? v1::default_table_path()
                                        : fs::path(sample_table);
      cfg.table = v1::load_distribution_table(table_path);
      descs = v1::sample_biological(cfg);
    } else {
      throw CLI::ValidationError("--regime must be bio or uniform");
    }
    auto bank = v1::build_filter_bank(descs);
    v1::save_filter_bank(bank, sample_out);
    std::vector<fs::path> inputs;
    if (!table_path.empty()) inputs.push_back(table_path);
    v1::write_manifest(fs::path(sample_out).parent_path(), "sample",
                       {{"regime", sample_regime},
                        {"seed", sample_seed},
                        {"n_simple", n_simple},
                        {"n_complex", n_complex},
                        {"log_sf", cfg.log_sf},
                        {"out", sample_out}},
                       inputs);
    return 0;
  }

  if (*dumpk) {
    auto bank = v1::load_filter_bank(dump_bank);
    v1::dump_kernels_pgm(bank, dump_out, dump_count);
    v1::write_manifest(dump_out, "dump-kernels",
                       {{"bank", dump_bank}, {"count", dump_count}},
                       {dump_bank});
    return 0;
  }

  if (*respond) {
    auto bank = v1::load_filter_bank(resp_bank);
    auto idx = v1::load_directory_dataset(resp_images, resp_split);
    auto ds = v1::load_images(idx, resp_limit);
    v1::Tensor imgs = ds.images;
    v1::normalize_batch(imgs);
    auto acts = v1::vone_forward(bank, imgs);
    v1::save_tensor(acts, resp_out);
    v1::write_manifest(fs::path(resp_out).parent_path(), "respond",
                       {{"bank", resp_bank},
                        {"images", resp_images},
                        {"split", resp_split},
                        {"limit", resp_limit},
                        {"dataset_checksum", idx.checksum}},
                       {resp_bank});
    return 0;
  }

  if (*train_cmd) {
    auto bank = v1::load_filter_bank(train_bank);
    auto cfg = load_train_config(train_cfg_path);
    cfg.seed = train_seed;
    if (train_epochs > 0) cfg.epochs = train_epochs;
    auto train_idx = v1::load_directory_dataset(train_data, "train");
    auto val_idx = v1::load_directory_dataset(train_data, "val");
    auto train_set = v1::load_images(train_idx);
    auto val_set = v1::load_images(val_idx);

    v1::BackendConfig bcfg;
    bcfg.v1_channels = bank.num_channels();
    bcfg.num_classes = train_set.num_classes;
    v1::Backend net(bcfg);
    net.init_params(v1::derive_seed(train_seed, 0xbacc));
    auto result = v1::train(bank, net, cfg, train_set, val_set, false, true);

    fs::create_directories(train_out);
    net.save(fs::path(train_out) / "backend.ckpt");
    v1::write_metrics_csv(result.metrics, fs::path(train_out) / "metrics.csv");
    v1::write_manifest(train_out, "train",
                       {{"bank", train_bank},
                        {"data", train_data},
                        {"seed", train_seed},
                        {"epochs", cfg.epochs},
                        {"lr0", cfg.lr0},
                        {"batch_size", cfg.batch_size},
                        {"bank_checksum_before", result.bank_checksum_before},
                        {"bank_checksum_after", result.bank_checksum_after}},
                       {train_bank});
    if (result.bank_checksum_before != result.bank_checksum_after)
      throw std::runtime_error("filter bank changed during training");
    return 0;
  }

  if (*corrupt_cmd) {
    const auto kind = v1::corruption_from_name(cor_kind);
    v1::CorruptionLevels levels;
    if (!cor_levels.empty()) levels = v1::load_corruption_levels(cor_levels);
    auto idx = v1::load_directory_dataset(cor_in, cor_split);
    for (std::size_t i = 0; i < idx.items.size(); ++i) {
      auto img = v1::load_image(idx.items[i].first);
      v1::Rng rng(v1::derive_seed(cor_seed,
                                  static_cast<std::uint64_t>(kind) * 16 + cor_sev,
                                  i));
      v1::corrupt(img.data(), 64, 64, {kind, cor_sev}, levels, rng);
      const auto rel = fs::relative(idx.items[i].first, fs::path(cor_in));
      const auto out_path = fs::path(cor_out) / rel;
      fs::create_directories(out_path.parent_path());
      save_image_png(img.data(), 64, 64, out_path);
    }
    v1::write_manifest(cor_out, "corrupt",
                       {{"in", cor_in},
                        {"kind", cor_kind},
                        {"severity", cor_sev},
                        {"seed", cor_seed}},
                       {});
    return 0;
  }

  if (*eval_cmd) {
    auto bank = v1::load_filter_bank(ev_bank);
    auto net = v1::Backend::load(fs::path(ev_ckpt) / "backend.ckpt");
    auto idx = v1::load_directory_dataset(ev_data, "val");
    auto ds = v1::load_images(idx);
    v1::CorruptionLevels levels;
    if (!ev_levels.empty()) levels = v1::load_corruption_levels(ev_levels);
    std::vector<v1::RobustnessRow> rows;
    if (ev_corruptions == "none") {
      auto [loss, acc] = v1::evaluate(bank, net, ds);
      (void)loss;
      rows.push_back({"clean", 0, acc, ds.images.dim(0)});
    } else {
      rows = v1::evaluate_robustness(bank, net, ds, levels, ev_seed);
    }
    v1::write_robustness_csv(rows, ev_model, ev_seed, ev_out);
    v1::write_manifest(fs::path(ev_out).parent_path(), "eval",
                       {{"ckpt", ev_ckpt},
                        {"bank", ev_bank},
                        {"data", ev_data},
                        {"corruptions", ev_corruptions},
                        {"seed", ev_seed}},
                       {ev_bank});
    return 0;
  }

  if (*analyze_cmd) {
    auto bank = v1::load_filter_bank(an_bank);
    auto net = v1::Backend::load(fs::path(an_ckpt) / "backend.ckpt");
    auto idx = v1::load_directory_dataset(an_images, "val");
    auto ds = v1::load_images(idx);
    auto variant = analyze_model(bank, net, ds, an_batch);
    fs::create_directories(an_out);
    v1::write_stats_csv(variant, fs::path(an_out) / "stats.csv");

    const auto sf_edges = v1::log_spaced_edges(0.5, 11.3, 5);
    const auto nx_edges = v1::linear_edges(0.1, 1.585, 3);
    auto rf = v1::bin_by_rf(variant.descriptors, variant.stats, variant.weights,
                            sf_edges, nx_edges);
    v1::write_bintable_csv(rf, fs::path(an_out) / "bins_rf.csv");
    auto act_edges = v1::quantile_edges(variant.stats.mean_act, 4);
    auto resp = v1::bin_by_response(variant.descriptors, variant.stats,
                                    variant.weights, act_edges,
                                    v1::linear_edges(0.0, 1.0, 4));
    v1::write_bintable_csv(resp, fs::path(an_out) / "bins_resp.csv");
    v1::write_manifest(an_out, "analyze",
                       {{"ckpt", an_ckpt},
                        {"bank", an_bank},
                        {"images", an_images},
                        {"batch", an_batch}},
                       {an_bank});
    return 0;
  }

  if (*report_cmd) {
    auto va = v1::read_stats_csv(fs::path(rep_a) / "stats.csv");
    auto vb = v1::read_stats_csv(fs::path(rep_b) / "stats.csv");
    auto rep = v1::compare_variants(va, vb);
    fs::create_directories(rep_out);
    v1::write_bintable_csv(rep.rf_a, fs::path(rep_out) / "bins_rf_a.csv");
    v1::write_bintable_csv(rep.rf_b, fs::path(rep_out) / "bins_rf_b.csv");
    v1::write_bintable_csv(rep.resp_a, fs::path(rep_out) / "bins_resp_a.csv");
    v1::write_bintable_csv(rep.resp_b, fs::path(rep_out) / "bins_resp_b.csv");
    v1::write_correlations_csv(rep, fs::path(rep_out) / "correlations.csv");

    // Collate per-model accuracies into one summary file.
    std::ofstream summary(fs::path(rep_out) / "summary.csv");
    summary << "source,model,seed,kind,severity,top1\n";
    for (const auto& ev : rep_evals) {
      std::ifstream is(ev);
      if (!is) throw std::runtime_error("cannot open eval csv: " + ev);
      std::string line;
      std::getline(is, line);  // header
      while (std::getline(is, line))
        if (!line.empty()) summary << ev << "," << line << "\n";
    }
    v1::write_manifest(rep_out, "report",
                       {{"analysis_a", rep_a},
                        {"analysis_b", rep_b},
                        {"evals", rep_evals}},
                       {fs::path(rep_a) / "stats.csv", fs::path(rep_b) / "stats.csv"});
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error&) {
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
