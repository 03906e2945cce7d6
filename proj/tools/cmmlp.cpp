// cmmlp: dataset generation, training, evaluation, prediction, gradient
// verification, and ablation sweeps for the edge-segmentation network.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "cmmlp/checkpoint.hpp"
#include "cmmlp/config.hpp"
#include "cmmlp/dataset.hpp"
#include "cmmlp/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cmmlp;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kNumericError = 3;

SynthSpec synth_spec_from_kv(const KvConfig& kv) {
  SynthSpec s;
  s.seed = kv.get_u64("synth.seed", s.seed);
  s.count = kv.get_int("synth.count", s.count);
  s.size = kv.get_int("synth.size", s.size);
  s.blobs_min = kv.get_int("synth.blobs_min", s.blobs_min);
  s.blobs_max = kv.get_int("synth.blobs_max", s.blobs_max);
  s.amp_min = kv.get_double("synth.amp_min", s.amp_min);
  s.amp_max = kv.get_double("synth.amp_max", s.amp_max);
  s.freq_min = kv.get_int("synth.freq_min", s.freq_min);
  s.freq_max = kv.get_int("synth.freq_max", s.freq_max);
  s.noise = kv.get_double("synth.noise", s.noise);
  std::vector<std::string> unknown = kv.unknown_keys();
  if (!unknown.empty()) {
    std::string msg = "unknown synth spec keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw std::invalid_argument(msg);
  }
  return s;
}

json synth_spec_to_json(const SynthSpec& s) {
  return json{{"seed", s.seed},         {"count", s.count},       {"size", s.size},
              {"blobs_min", s.blobs_min}, {"blobs_max", s.blobs_max}, {"amp_min", s.amp_min},
              {"amp_max", s.amp_max},   {"freq_min", s.freq_min}, {"freq_max", s.freq_max},
              {"noise", s.noise}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << text;
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "setting" << std::right << std::setw(9) << "Dice"
     << std::setw(9) << "mIoU" << std::setw(9) << "MAE" << std::setw(9) << "MPA" << "\n";
  os << std::string(64, '-') << "\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& [name, r] : rows)
    os << std::left << std::setw(28) << name << std::right << std::setw(9) << r.dice << std::setw(9)
       << r.miou << std::setw(9) << r.mae << std::setw(9) << r.mpa << "\n";
  return os.str();
}

json metric_json(const MetricReport& r) {
  return json{{"dice", r.dice}, {"miou", r.miou}, {"mae", r.mae}, {"mpa", r.mpa}, {"count", r.count}};
}

int cmd_gen(const std::string& spec_path, const std::string& out_dir) {
  SynthSpec spec = spec_path.empty() ? SynthSpec{} : synth_spec_from_kv(KvConfig::from_file(spec_path));
  std::vector<Sample> samples = generate(spec);
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "masks");
  for (const Sample& s : samples) {
    write_png((fs::path(out_dir) / "images" / (s.id + ".png")).string(), tensor_to_image(s.image));
    write_png((fs::path(out_dir) / "masks" / (s.id + ".png")).string(), tensor_to_image(s.mask));
  }
  write_text((fs::path(out_dir) / "spec.json").string(), synth_spec_to_json(spec).dump(2) + "\n");
  std::cout << "wrote " << samples.size() << " samples to " << out_dir << "\n";
  return kOk;
}

// Locates the resolved config written next to a checkpoint, if any.
RunConfig config_for_checkpoint(const std::string& checkpoint, const std::string& config_path) {
  if (!config_path.empty()) return RunConfig::from(KvConfig::from_file(config_path));
  fs::path sibling = fs::path(checkpoint).parent_path() / "config.resolved";
  if (fs::exists(sibling)) return RunConfig::from(KvConfig::from_file(sibling.string()));
  return RunConfig::from(KvConfig{});
}

template <typename T>
int run_train(RunConfig rc, const std::string& out_dir) {
  DatasetSplit split = split_samples(load_dir(rc.data.dir + "/images", rc.data.dir + "/masks", rc.data.size),
                                     rc.data.split_seed, rc.data.split_train, rc.data.split_val,
                                     rc.data.split_test);
  std::cout << "samples: train=" << split.train.size() << " val=" << split.val.size()
            << " test=" << split.test.size() << "\n";

  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "config.resolved").string(), rc.resolved());

  ParamStore<T> params(rc.train.seed);
  int64_t n_params = materialize_params(params, rc.model, rc.data.size, rc.data.size);
  std::cout << "parameters: " << n_params << " elements in " << params.size() << " tensors\n";
  Trainer<T> trainer(rc.model, rc.train);
  typename Trainer<T>::EpochCallback on_epoch = nullptr;
  if (rc.train.checkpoint_every > 0) {
    int every = rc.train.checkpoint_every;
    std::string dir = out_dir;
    on_epoch = [every, dir](int epoch, const HistoryEntry&, const ParamStore<T>& p) {
      if (epoch % every != 0) return;
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch);
      save_checkpoint(p, (fs::path(dir) / name).string());
    };
  }
  FitResult<T> res = trainer.fit(params, split.train, split.val, on_epoch);

  std::ofstream hist((fs::path(out_dir) / "history.jsonl").string());
  for (const HistoryEntry& h : res.history) {
    json j{{"epoch", h.epoch},
           {"loss", h.train_loss},
           {"loss_iou", h.train_iou},
           {"loss_bce", h.train_bce},
           {"val_dice", h.val.dice},
           {"val_miou", h.val.miou},
           {"val_mae", h.val.mae},
           {"val_mpa", h.val.mpa}};
    hist << j.dump() << "\n";
    std::cout << "epoch " << h.epoch << " loss " << std::setprecision(6) << h.train_loss
              << " val_dice " << h.val.dice << "\n";
  }
  save_checkpoint(res.best, (fs::path(out_dir) / "best.ckpt").string());
  save_checkpoint(params, (fs::path(out_dir) / "final.ckpt").string());
  std::cout << "best epoch " << res.best_epoch << " val_dice " << res.best_val_dice << "\n";
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out_dir,
              const std::vector<std::string>& overrides) {
  KvConfig kv = config_path.empty() ? KvConfig{} : KvConfig::from_file(config_path);
  for (const std::string& o : overrides) kv.apply_override(o);
  if (!data_dir.empty()) kv.set("data.dir", data_dir);
  RunConfig rc = RunConfig::from(kv);
  if (rc.data.dir.empty()) throw std::invalid_argument("train: no data directory (data.dir or --data)");
  if (deterministic_env()) rc.train.deterministic = true;
  if (rc.precision == "f64") return run_train<double>(rc, out_dir);
  return run_train<float>(rc, out_dir);
}

template <typename T>
std::vector<MetricReport> eval_model(const RunConfig& rc, ParamStore<T>& params,
                                     const std::vector<Sample>& samples) {
  Trainer<T> trainer(rc.model, rc.train);
  std::vector<MetricReport> reps(samples.size());
  parallel_for(static_cast<int64_t>(samples.size()), [&](int64_t i) {
    Tape<T> tape;
    Workspace<T> ws(tape, params, false);
    auto out = ops::forward_full(ws, samples[i].image.template cast<T>(), rc.model);
    reps[i] = metrics_single(out.mask_final.value(), samples[i].mask.template cast<T>());
  });
  return reps;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& out_path,
             const std::string& config_path, bool oracle) {
  RunConfig rc = oracle && checkpoint.empty()
                     ? RunConfig::from(KvConfig{})
                     : config_for_checkpoint(checkpoint, config_path);
  std::vector<Sample> samples = load_dir(data_dir + "/images", data_dir + "/masks", rc.data.size);
  if (samples.empty()) throw std::runtime_error("eval: no samples in " + data_dir);

  std::vector<MetricReport> reps;
  std::string row_name;
  if (oracle) {
    row_name = "oracle";
    reps.resize(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) reps[i] = metrics_single(samples[i].mask, samples[i].mask);
  } else {
    row_name = fs::path(checkpoint).filename().string();
    int dtype = checkpoint_dtype(checkpoint);
    if (dtype == 1) {
      ParamStore<double> params = load_checkpoint<double>(checkpoint);
      reps = eval_model(rc, params, samples);
    } else {
      ParamStore<float> params = load_checkpoint<float>(checkpoint);
      reps = eval_model(rc, params, samples);
    }
  }
  MetricReport agg = metrics_aggregate(reps);
  std::string table = metrics_table({{row_name, agg}});
  std::cout << table;

  if (!out_path.empty()) {
    fs::path out(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_text(out_path, table);
    std::ofstream jl(out_path + ".jsonl");
    for (size_t i = 0; i < reps.size(); ++i) {
      json j = metric_json(reps[i]);
      j["id"] = samples[i].id;
      jl << j.dump() << "\n";
    }
    json summary = metric_json(agg);
    summary["id"] = "__summary__";
    jl << summary.dump() << "\n";
    write_text(out_path + ".config", rc.resolved());
  }
  return kOk;
}

int cmd_predict(const std::string& checkpoint, const std::string& image_path, const std::string& out_path,
                const std::string& config_path) {
  RunConfig rc = config_for_checkpoint(checkpoint, config_path);
  ImageU8 raw = read_png(image_path);
  Tensor<float> img = image_to_tensor(raw);
  Tensor<float> net_in = (raw.height == rc.data.size && raw.width == rc.data.size)
                             ? img
                             : resize_image_bilinear(img, rc.data.size, rc.data.size);

  Tensor<float> prob;
  int dtype = checkpoint_dtype(checkpoint);
  if (dtype == 1) {
    ParamStore<double> params = load_checkpoint<double>(checkpoint);
    Tape<double> tape;
    Workspace<double> ws(tape, params, false);
    prob = ops::forward_full(ws, net_in.cast<double>(), rc.model).mask_final.value().cast<float>();
  } else {
    ParamStore<float> params = load_checkpoint<float>(checkpoint);
    Tape<float> tape;
    Workspace<float> ws(tape, params, false);
    prob = ops::forward_full(ws, net_in, rc.model).mask_final.value();
  }
  if (prob.shape[1] != raw.height || prob.shape[2] != raw.width)
    prob = resize_image_bilinear(prob, raw.height, raw.width);

  write_png(out_path, tensor_to_image(prob));

  Tensor<float> overlay = img;
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      if (prob.at(0, y, x) > 0.5f) {
        overlay.at(0, y, x) = 0.5f * overlay.at(0, y, x) + 0.5f;
        overlay.at(1, y, x) *= 0.5f;
        overlay.at(2, y, x) *= 0.5f;
      }
  fs::path op(out_path);
  std::string overlay_path = (op.parent_path() / (op.stem().string() + "_overlay.png")).string();
  write_png(overlay_path, tensor_to_image(overlay));
  write_text(out_path + ".config", rc.resolved());
  std::cout << "wrote " << out_path << " and " << overlay_path << "\n";
  return kOk;
}

int cmd_gradcheck(const std::string& scope, double tolerance) {
  std::vector<verify::CheckCase<double>> cases;
  double def_tol;
  if (scope == "primitive") {
    cases = verify::primitive_checks<double>();
    def_tol = 1e-5;
  } else if (scope == "block") {
    cases = verify::block_checks<double>();
    def_tol = 1e-4;
  } else if (scope == "full") {
    cases = verify::full_checks<double>();
    def_tol = 1e-4;
  } else {
    throw std::invalid_argument("gradcheck: scope must be primitive|block|full");
  }
  double tol = tolerance > 0 ? tolerance : def_tol;
  bool all_pass = true;
  for (auto& c : cases) {
    GradcheckReport rep = gradcheck(c.graph, c.bindings, tol, c.max_elems);
    std::cout << std::left << std::setw(28) << c.name << " max_rel_err=" << std::scientific
              << std::setprecision(3) << rep.max_rel_err << (rep.pass ? "  PASS" : "  FAIL");
    if (!rep.pass)
      std::cout << "  (leaf " << rep.worst_leaf << "[" << rep.worst_index << "] analytic "
                << rep.analytic_at_worst << " numeric " << rep.numeric_at_worst << ")";
    std::cout << "\n";
    all_pass = all_pass && rep.pass;
  }
  std::cout << (all_pass ? "all checks passed" : "gradcheck FAILED") << " (tolerance " << tol << ")\n";
  return all_pass ? kOk : kNumericError;
}

int cmd_ablate(const std::string& config_path, const std::string& data_dir,
               const std::string& settings_csv, const std::string& out_path,
               const std::vector<std::string>& overrides) {
  KvConfig kv = config_path.empty() ? KvConfig{} : KvConfig::from_file(config_path);
  for (const std::string& o : overrides) kv.apply_override(o);
  if (!data_dir.empty()) kv.set("data.dir", data_dir);
  RunConfig base = RunConfig::from(kv);
  if (base.data.dir.empty()) throw std::invalid_argument("ablate: no data directory");
  if (deterministic_env()) base.train.deterministic = true;

  std::vector<std::string> settings;
  std::stringstream ss(settings_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = KvConfig::trim(tok);
    if (!tok.empty()) settings.push_back(tok);
  }
  if (settings.empty()) throw std::invalid_argument("ablate: empty settings list");

  DatasetSplit split =
      split_samples(load_dir(base.data.dir + "/images", base.data.dir + "/masks", base.data.size),
                    base.data.split_seed, base.data.split_train, base.data.split_val, base.data.split_test);
  const std::vector<Sample>& eval_set =
      !split.test.empty() ? split.test : (!split.val.empty() ? split.val : split.train);

  std::vector<std::pair<std::string, MetricReport>> rows;
  for (const std::string& setting : settings) {
    RunConfig rc = base;
    apply_setting(rc.model, setting);
    rc.setting = setting;
    std::cout << "=== " << setting << " ===\n";
    ParamStore<float> params(rc.train.seed);
    Trainer<float> trainer(rc.model, rc.train);
    trainer.fit(params, split.train, split.val);
    std::vector<MetricReport> reps = eval_model(rc, params, eval_set);
    rows.emplace_back(setting, metrics_aggregate(reps));
  }
  std::string table = metrics_table(rows);
  std::cout << table;
  if (!out_path.empty()) {
    fs::path out(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_text(out_path, table);
    write_text(out_path + ".config", base.resolved());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cascade multi-scale MLP edge segmentation"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, config_path, data_dir, checkpoint, image_path, out_path;
  std::string scope = "primitive", settings;
  std::vector<std::string> overrides;
  double tolerance = 0;
  bool oracle = false;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--spec", spec_path, "synth spec file (key = value)");
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "config file");
  train->add_option("--data", data_dir, "dataset directory (images/ + masks/)");
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--set", overrides, "config overrides key=value");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file");
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--out", out_path, "report path");
  eval->add_option("--config", config_path, "config file (default: sibling of checkpoint)");
  eval->add_flag("--oracle", oracle, "score ground truth against itself (no checkpoint)");

  CLI::App* predict = app.add_subcommand("predict", "predict a mask for one image");
  predict->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  predict->add_option("--image", image_path, "input PNG")->required();
  predict->add_option("--out", out_path, "output probability PNG")->required();
  predict->add_option("--config", config_path, "config file (default: sibling of checkpoint)");

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->add_option("--scope", scope, "primitive|block|full")->required();
  gc->add_option("--tolerance", tolerance, "max relative error (default per scope)");

  CLI::App* ablate = app.add_subcommand("ablate", "train/evaluate a list of ablation settings");
  ablate->add_option("--config", config_path, "config file");
  ablate->add_option("--data", data_dir, "dataset directory");
  ablate->add_option("--settings", settings, "comma-separated settings list")->required();
  ablate->add_option("--out", out_path, "table output path");
  ablate->add_option("--set", overrides, "config overrides key=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(spec_path, out_dir);
    if (train->parsed()) return cmd_train(config_path, data_dir, out_dir, overrides);
    if (eval->parsed()) {
      if (!oracle && checkpoint.empty())
        throw std::invalid_argument("eval: --checkpoint required unless --oracle");
      return cmd_eval(checkpoint, data_dir, out_path, config_path, oracle);
    }
    if (predict->parsed()) return cmd_predict(checkpoint, image_path, out_path, config_path);
    if (gc->parsed()) return cmd_gradcheck(scope, tolerance);
    if (ablate->parsed()) return cmd_ablate(config_path, data_dir, settings, out_path, overrides);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::cerr << "error: " << msg << "\n";
    return msg.find("non-finite") != std::string::npos ? kNumericError : kDataError;
  }
  return kUsage;
}
