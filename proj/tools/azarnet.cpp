#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "azarnet/dataset.hpp"
#include "azarnet/dsp.hpp"
#include "azarnet/errors.hpp"
#include "azarnet/gradcheck.hpp"
#include "azarnet/metrics.hpp"
#include "azarnet/model.hpp"
#include "azarnet/parallel.hpp"
#include "azarnet/training.hpp"

namespace fs = std::filesystem;
using namespace azarnet;

namespace {

// Cache files mirror the record path with separators flattened, so records
// with equal stems in different directories do not collide.
fs::path cache_file(const fs::path& cache_dir, const ManifestRecord& rec) {
  std::string key = fs::path(rec.path).lexically_normal().replace_extension().generic_string();
  for (char& c : key) {
    if (c == '/' || c == ':') c = '_';
  }
  while (!key.empty() && (key[0] == '.' || key[0] == '_')) key.erase(0, 1);
  return cache_dir / (key + ".spec");
}

bool cache_fresh(const fs::path& cache, const fs::path& audio) {
  std::error_code ec;
  if (!fs::exists(cache, ec)) return false;
  const auto tc = fs::last_write_time(cache, ec);
  if (ec) return false;
  const auto ta = fs::last_write_time(audio, ec);
  return !ec && tc >= ta;
}

LabeledSet load_cached(const std::string& manifest, const fs::path& cache_dir,
                       const std::vector<ManifestRecord>& records) {
  LabeledSet set;
  for (const auto& rec : records) {
    const fs::path path = cache_file(cache_dir, rec);
    if (!fs::exists(path)) {
      throw IoError("missing cache '" + path.string() + "' for " + resolve_record_path(manifest, rec) +
                    " (run preprocess first)");
    }
    set.add(load_spectrogram(path.string()).values, class_index(rec.label));
  }
  return set;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ClassReport report_for(const Evaluation& ev, const LabeledSet& set, const Model& model) {
  return class_report(confusion_matrix(ev.predictions, set.labels, model.config().classes), model.class_names());
}

struct SynthArgs {
  std::string out;
  std::size_t per_class = 5;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  std::cout << generate_dataset(a.per_class, a.seed, a.out) << "\n";
  return 0;
}

struct PreprocessArgs {
  std::string manifest;
  std::string cache;
};

int cmd_preprocess(const PreprocessArgs& a) {
  const auto records = load_manifest(a.manifest);
  fs::create_directories(a.cache);
  std::vector<std::string> errors(records.size());
  std::vector<char> written(records.size(), 0);
  parallel_for(records.size(), [&](std::size_t i) {
    const std::string audio = resolve_record_path(a.manifest, records[i]);
    const fs::path out = cache_file(a.cache, records[i]);
    try {
      if (cache_fresh(out, audio)) return;
      save_spectrogram(out.string(), preprocess(audio));
      written[i] = 1;
    } catch (const std::exception& e) {
      errors[i] = audio + ": " + e.what();
    }
  });
  std::size_t failed = 0, fresh = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "error: " << errors[i] << "\n";
      ++failed;
    } else if (written[i]) {
      ++fresh;
    }
  }
  std::cout << "preprocessed " << fresh << ", up to date " << records.size() - fresh - failed << ", failed "
            << failed << "\n";
  return failed ? 1 : 0;
}

struct TrainArgs {
  std::string manifest;
  std::string cache;
  std::string out;
  std::string history;
  std::string report_csv;
  TrainConfig train;
  ModelConfig model;
};

int cmd_train(TrainArgs a) {
  const auto records = load_manifest(a.manifest);
  if (records.empty()) throw DataError("manifest '" + a.manifest + "' has no records");

  std::vector<ManifestRecord> train_recs, test_recs;
  const bool presplit = std::all_of(records.begin(), records.end(), [](const auto& r) { return r.split.has_value(); });
  if (presplit) {
    for (const auto& r : records) (*r.split == "train" ? train_recs : test_recs).push_back(r);
  } else {
    Rng split_rng(a.train.seed);
    std::tie(train_recs, test_recs) = stratified_split(records, a.train.split_fraction, split_rng);
  }
  const LabeledSet train_set = load_cached(a.manifest, a.cache, train_recs);
  const LabeledSet test_set = load_cached(a.manifest, a.cache, test_recs);
  if (train_set.empty()) throw DataError("training split is empty");

  a.model.seed = a.train.seed;
  Model model(a.model);
  const TrainingHistory history = train(model, train_set, test_set, a.train, [](const EpochRecord& r) {
    std::fprintf(stderr, "epoch %3d  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f\n", r.epoch, r.train_loss,
                 r.train_acc, r.val_loss, r.val_acc);
  });

  save_checkpoint(model, a.out);
  const std::string history_path = a.history.empty() ? a.out + ".history.csv" : a.history;
  history.write_csv(history_path);
  std::cout << "checkpoint: " << a.out << "\nhistory: " << history_path << "\nbest epoch: " << history.best_epoch
            << "\n";

  if (!test_set.empty()) {
    const Evaluation ev = evaluate(model, test_set, a.train.batch_size);
    const ClassReport report = report_for(ev, test_set, model);
    std::cout << report_to_text(report);
    if (!a.report_csv.empty()) write_text(a.report_csv, report_to_csv(report));
  }
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string manifest;
  std::string cache;
  std::string csv;
  std::string split;
};

int cmd_eval(const EvalArgs& a) {
  Model model = load_checkpoint(a.model);
  auto records = load_manifest(a.manifest);
  if (!a.split.empty()) {
    std::erase_if(records, [&](const auto& r) { return r.split.value_or("") != a.split; });
  }
  const LabeledSet set = load_cached(a.manifest, a.cache, records);
  if (set.empty()) throw DataError("no records to evaluate");
  const Evaluation ev = evaluate(model, set);
  const ClassReport report = report_for(ev, set, model);
  std::cout << report_to_text(report);
  const std::string csv = a.csv.empty() ? a.model + ".eval.csv" : a.csv;
  write_text(csv, report_to_csv(report));
  std::cout << "report: " << csv << "\n";
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string audio;
};

int cmd_predict(const PredictArgs& a) {
  Model model = load_checkpoint(a.model);
  const Spectrogram spec = preprocess(a.audio);
  const Shape& in = model.config().input_shape;
  const Tensor probs = model.predict(spec.values.reshaped({1, in[0], in[1], in[2]}));
  std::size_t best = 0;
  for (std::size_t k = 0; k < probs.dim(1); ++k) {
    std::printf("%-12s %.6f\n", model.class_names()[k].c_str(), static_cast<double>(probs(0, k)));
    if (probs(0, k) > probs(0, best)) best = k;
  }
  std::printf("prediction: %s\n", model.class_names()[best].c_str());
  return 0;
}

int cmd_params(const ModelConfig& cfg) {
  Model model(cfg);
  std::cout << format_summary(model.summary());
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : run_layer_gradchecks(seed)) {
    std::printf("%-24s max rel error %.3e  %s\n", r.check.c_str(), r.max_rel_error, r.passed() ? "ok" : "FAIL");
    ok = ok && r.passed();
  }
  const auto m = run_model_gradcheck(seed);
  std::printf("%-24s max rel error %.3e  %s (%zu sampled parameters)\n", "model (total loss)", m.max_rel_error,
              m.passed() ? "ok" : "FAIL", m.entries);
  return ok && m.passed() ? 0 : 1;
}

void add_model_flags(CLI::App* cmd, ModelConfig& cfg) {
  cmd->add_option("--filters", cfg.conv_filters, "conv block widths")->capture_default_str();
  cmd->add_option("--dropout", cfg.dropout_rates, "dropout rate per conv block")->capture_default_str();
  cmd->add_option("--gru-units", cfg.gru_units, "GRU widths")->capture_default_str();
  cmd->add_option("--bottleneck", cfg.bottleneck, "bottleneck FC width")->capture_default_str();
  cmd->add_option("--leaky-alpha", cfg.leaky_alpha)->capture_default_str();
  cmd->add_option("--bn-momentum", cfg.bn_momentum)->capture_default_str();
  cmd->add_option("--l1", cfg.l1, "L1 kernel penalty")->capture_default_str();
  cmd->add_option("--l2", cfg.l2, "L2 kernel penalty")->capture_default_str();
  cmd->add_option("--activity-l1", cfg.activity_l1, "L1 activity penalty")->capture_default_str();
  cmd->add_option("--activity-l2", cfg.activity_l2, "L2 activity penalty")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AzarNet Dastgah classifier"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate the synthetic 7-class dataset");
  c_synth->add_option("--out", synth.out)->required();
  c_synth->add_option("--per-class", synth.per_class)->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();

  PreprocessArgs prep;
  auto* c_prep = app.add_subcommand("preprocess", "write one .spec spectrogram cache per manifest record");
  c_prep->add_option("--manifest", prep.manifest)->required();
  c_prep->add_option("--cache", prep.cache)->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train on cached spectrograms");
  c_train->add_option("--manifest", tr.manifest)->required();
  c_train->add_option("--cache", tr.cache)->required();
  c_train->add_option("--out", tr.out, "checkpoint path (.aznet)")->required();
  c_train->add_option("--seed", tr.train.seed)->capture_default_str();
  c_train->add_option("--history", tr.history, "history CSV (default <out>.history.csv)");
  c_train->add_option("--report-csv", tr.report_csv, "also write the test report as CSV");
  c_train->add_option("--epochs", tr.train.max_epochs)->capture_default_str();
  c_train->add_option("--batch-size", tr.train.batch_size)->capture_default_str();
  c_train->add_option("--lr", tr.train.learning_rate)->capture_default_str();
  c_train->add_option("--patience", tr.train.early_stop_patience)->capture_default_str();
  c_train->add_option("--split", tr.train.split_fraction, "training share per class")->capture_default_str();
  c_train->add_option("--target-train-acc", tr.train.target_train_accuracy, "stop once reached (0 = off)")
      ->capture_default_str();
  add_model_flags(c_train, tr.model);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "per-class precision/recall/F1 of a checkpoint");
  c_eval->add_option("--model", ev.model)->required();
  c_eval->add_option("--manifest", ev.manifest)->required();
  c_eval->add_option("--cache", ev.cache)->required();
  c_eval->add_option("--csv", ev.csv, "report CSV (default <model>.eval.csv)");
  c_eval->add_option("--split", ev.split, "only records with this split tag");

  PredictArgs pr;
  auto* c_pred = app.add_subcommand("predict", "class probabilities for one audio file");
  c_pred->add_option("--model", pr.model)->required();
  c_pred->add_option("--audio", pr.audio)->required();

  ModelConfig pcfg;
  auto* c_params = app.add_subcommand("params", "layer / output shape / parameter table");
  add_model_flags(c_params, pcfg);

  std::uint64_t gc_seed = 0;
  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  c_gc->add_option("--seed", gc_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_synth) return cmd_synth(synth);
    if (*c_prep) return cmd_preprocess(prep);
    if (*c_train) return cmd_train(tr);
    if (*c_eval) return cmd_eval(ev);
    if (*c_pred) return cmd_predict(pr);
    if (*c_params) return cmd_params(pcfg);
    if (*c_gc) return cmd_gradcheck(gc_seed);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
