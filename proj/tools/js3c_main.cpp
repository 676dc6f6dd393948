// Command-line pipeline: ground-truth generation, synthetic data, training,
// inference, evaluation. Every command is deterministic given its flags and
// seed; the only non-reproducible output lines are timing fields, which are
// prefixed with "#t " so comparisons can drop them.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "js3c/ground_truth.hpp"
#include "js3c/kitti_io.hpp"
#include "js3c/metrics.hpp"
#include "js3c/model.hpp"
#include "js3c/ops.hpp"
#include "js3c/synthetic.hpp"
#include "js3c/trainer.hpp"
#include "js3c/volume_io.hpp"

namespace fs = std::filesystem;
using namespace js3c;

namespace {

// Everything a run depends on. Commands read only this and the files it
// names, so a run is fully determined by (config, seed).
struct RunConfig {
  std::string sequence_dir;
  std::string data_dir;
  std::string config_path;
  std::string checkpoint_path;
  std::string scan_path;
  std::string pred_path;
  std::string gt_path;
  std::string out_path;
  std::string log_path;
  std::string spec_text = "0,0,0,0.2,32,32,8";
  std::string mode = "infer";
  std::uint64_t seed = 0;
  int epochs = 3;
  double lr = 1e-3;
  long window = 70;
  int votes = 1;
  int scenes = 10;
  int classes = 4;
  int boxes = 5;
  int planes = 1;
  long points_per_box = 300;
  long points_per_plane = 1200;
  double sweep_fraction = 0.3;
  double occlusion = 1.0;
  bool seg_only = false;
  bool no_augment = false;
};

// "ox,oy,oz,voxel,dx,dy,dz" -> grid snapped to f32 storage precision, so the
// spec in memory equals the spec every SSCV file will carry.
VolumeSpec parse_spec(const std::string& text) {
  std::vector<double> vals;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string field = text.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw format_error("--spec: bad number '" + field + "'");
    }
    pos = comma + 1;
  }
  if (vals.size() != 7)
    throw format_error("--spec expects ox,oy,oz,voxel,dx,dy,dz");
  VolumeSpec spec;
  spec.origin = Vec3(vals[0], vals[1], vals[2]);
  spec.voxel_size = vals[3];
  for (int a = 0; a < 3; ++a) {
    const double d = vals[4 + static_cast<std::size_t>(a)];
    if (d <= 0.0 || d != std::floor(d))
      throw format_error("--spec: dims must be positive integers");
    spec.dims[static_cast<std::size_t>(a)] = static_cast<long>(d);
  }
  spec = quantize_spec(spec);
  spec.validate();
  return spec;
}

std::string frame_name(long i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%06ld", i);
  return buf;
}

int cmd_gen_gt(const RunConfig& rc) {
  const SequenceIndex seq = load_sequence(rc.sequence_dir);
  const VolumeSpec spec = parse_spec(rc.spec_text);
  fs::create_directories(rc.out_path);

  std::string manifest;
  const long frames = static_cast<long>(seq.frames.size());
  for (long i = 0; i < frames; ++i) {
    const LabeledVolume vol = generate_gt(seq, i, rc.window, spec);
    const std::string name = frame_name(i) + ".sscv";
    save_volume(vol, (fs::path(rc.out_path) / name).string());
    manifest += frame_name(i) + " " + name + "\n";
  }
  write_text_file((fs::path(rc.out_path) / "manifest.txt").string(), manifest);
  std::printf("gen-gt: wrote %ld volumes to %s\n", frames, rc.out_path.c_str());
  return 0;
}

int cmd_synth(const RunConfig& rc) {
  SyntheticSceneSpec sp;
  sp.volume = parse_spec(rc.spec_text);
  sp.num_classes = rc.classes;
  sp.boxes = rc.boxes;
  sp.planes = rc.planes;
  sp.points_per_box = rc.points_per_box;
  sp.points_per_plane = rc.points_per_plane;
  sp.sweep_fraction = rc.sweep_fraction;
  sp.occlusion_fraction = rc.occlusion;

  const fs::path out(rc.out_path);
  fs::create_directories(out / "velodyne");
  fs::create_directories(out / "labels");
  fs::create_directories(out / "gt");

  std::string manifest;
  std::vector<Pose> poses;
  for (int s = 0; s < rc.scenes; ++s) {
    sp.seed = derive_seed(rc.seed, static_cast<std::uint64_t>(s));
    const SyntheticScene scene = synth_generate(sp);
    const std::string stem = frame_name(s);
    write_file((out / "velodyne" / (stem + ".bin")).string(), write_scan(scene.sweep));
    write_file((out / "labels" / (stem + ".label")).string(),
               write_labels(*scene.sweep.labels));
    save_volume(scene.gt, (out / "gt" / (stem + ".sscv")).string());
    manifest += stem + " velodyne/" + stem + ".bin labels/" + stem +
                ".label gt/" + stem + ".sscv\n";
    poses.push_back(Pose::identity());
  }
  write_text_file((out / "poses.txt").string(), write_poses(poses));
  write_text_file((out / "calib.txt").string(), write_calib(Pose::identity()));
  write_text_file((out / "manifest.txt").string(), manifest);
  std::printf("synth: wrote %d scenes to %s\n", rc.scenes, rc.out_path.c_str());
  return 0;
}

// Scenes live in the synth layout: velodyne/STEM.bin + labels/STEM.label +
// gt/STEM.sscv, iterated in sorted stem order.
std::vector<TrainScene> load_train_scenes(const std::string& data_dir) {
  std::vector<fs::path> volumes;
  const fs::path gt_dir = fs::path(data_dir) / "gt";
  if (!fs::is_directory(gt_dir))
    throw io_error("train: no gt directory under " + data_dir);
  for (const auto& entry : fs::directory_iterator(gt_dir))
    if (entry.path().extension() == ".sscv") volumes.push_back(entry.path());
  std::sort(volumes.begin(), volumes.end());
  require(!volumes.empty(), "train: no .sscv volumes under " + gt_dir.string());

  std::vector<TrainScene> scenes;
  for (const fs::path& vol : volumes) {
    const std::string stem = vol.stem().string();
    TrainScene scene{PointCloud{}, load_volume(vol.string())};
    scene.sweep = read_scan(
        read_file((fs::path(data_dir) / "velodyne" / (stem + ".bin")).string()));
    const std::vector<std::int32_t> labels = read_labels(
        read_file((fs::path(data_dir) / "labels" / (stem + ".label")).string()));
    require(static_cast<long>(labels.size()) == scene.sweep.size(),
            "train: scene " + stem + ": " + std::to_string(scene.sweep.size()) +
                " points but " + std::to_string(labels.size()) + " labels");
    scene.sweep.labels = labels;
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

int cmd_train(const RunConfig& rc) {
  ModelConfig cfg = load_config(rc.config_path);
  require(cfg.in_features == 3,
          "train: the pipeline stamps point positions as features; the model "
          "needs in_features = 3");

  std::vector<TrainScene> scenes = load_train_scenes(rc.data_dir);
  // The files carry the grid at f32 precision; adopt it, but only when it is
  // the grid the configuration asked for.
  const VolumeSpec data_spec = scenes.front().gt.spec;
  require(data_spec.dims == cfg.ssc_spec.dims,
          "train: data volume dims do not match the model configuration");
  require(data_spec == quantize_spec(cfg.ssc_spec),
          "train: data volume grid does not match the model configuration");
  for (const TrainScene& s : scenes)
    require(s.gt.spec == data_spec, "train: scenes disagree on the volume grid");
  cfg.ssc_spec = data_spec;

  fs::create_directories(rc.out_path);
  save_config(cfg, (fs::path(rc.out_path) / "model.cfg").string());

  Model model(cfg, rc.seed);
  TrainConfig tc;
  tc.epochs = rc.epochs;
  tc.lr = rc.lr;
  tc.seed = rc.seed;
  tc.seg_only = rc.seg_only;
  tc.augment = !rc.no_augment;
  tc.checkpoint_dir = rc.out_path;

  const std::string log_path =
      rc.log_path.empty() ? (fs::path(rc.out_path) / "train.log").string()
                          : rc.log_path;
  std::ofstream log(log_path);
  if (!log) throw io_error("cannot open log for writing: " + log_path);

  Trainer trainer(model, tc);
  const std::vector<EpochStats> history = trainer.fit(scenes, &log);
  for (std::size_t e = 0; e < history.size(); ++e)
    std::printf("epoch %zu mean_total %.9g mean_seg %.9g mean_complet %.9g\n", e,
                history[e].mean_total, history[e].mean_seg,
                history[e].mean_complet);
  std::printf("train: %d epochs over %zu scenes -> %s\n", rc.epochs,
              scenes.size(), rc.out_path.c_str());
  return 0;
}

int cmd_infer(const RunConfig& rc) {
  const ModelConfig cfg = load_config(rc.config_path);
  require(cfg.in_features == 3,
          "infer: the pipeline stamps point positions as features; the model "
          "needs in_features = 3");
  Model model(cfg, load_checkpoint(rc.checkpoint_path));
  const PointCloud cloud =
      with_position_features(read_scan(read_file(rc.scan_path)));

  model.counters().reset();
  ad::Tensor probs;
  const auto t0 = std::chrono::steady_clock::now();
  if (rc.mode == "train") {
    require(rc.votes == 1, "infer: vote augmentation applies to infer mode only");
    ad::Tape t;
    const ForwardOutput out = model.forward(t, cloud, Mode::kTrain);
    probs = t.val(ad::ops::softmax_rows(t, out.seg_logits));
  } else {
    probs = vote_inference(model, cloud, rc.votes, rc.seed);
  }
  const auto t1 = std::chrono::steady_clock::now();
  const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  write_file(rc.out_path, write_labels(labels_from_probs(probs)));

  const ForwardCounters& c = model.counters();
  char text[512];
  std::snprintf(text, sizeof(text),
                "command infer\nmode %s\npoints %ld\nvotes %d\n"
                "counters ssc_volumes %ld dense_convs %ld pvi_graphs %ld "
                "pvi_refines %ld\n"
                "#t forward_ms %.3f\n",
                rc.mode.c_str(), cloud.size(), rc.votes, c.ssc_volumes,
                c.dense_convs, c.pvi_graphs, c.pvi_refines, ms);
  if (rc.log_path.empty())
    std::fputs(text, stdout);
  else
    write_text_file(rc.log_path, text);
  return 0;
}

int cmd_eval(const RunConfig& rc) {
  const std::vector<std::int32_t> pred = read_labels(read_file(rc.pred_path));
  const std::vector<std::int32_t> truth = read_labels(read_file(rc.gt_path));
  require(pred.size() == truth.size(),
          "eval: prediction and truth disagree on point count");

  ConfusionMatrix cm;
  const double miou = seg_miou(pred, truth, rc.classes, &cm);

  MetricsReport report;
  report.add("points", static_cast<double>(pred.size()));
  report.add("ignored", static_cast<double>(cm.ignored));
  report.add("seg_miou", miou);
  const std::vector<double> iou = per_class_iou(cm);
  for (int c = 1; c <= rc.classes; ++c)
    if (iou[static_cast<std::size_t>(c)] >= 0.0)
      report.add("iou_" + std::to_string(c), iou[static_cast<std::size_t>(c)]);

  std::fputs(report.table().c_str(), stdout);
  if (!rc.out_path.empty()) write_text_file(rc.out_path, report.key_values());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig rc;
  CLI::App app{"sparse point cloud segmentation and scene completion pipeline"};
  app.require_subcommand(1);

  CLI::App* gen = app.add_subcommand(
      "gen-gt", "aggregate a scan sequence into completion ground truth");
  gen->add_option("--sequence", rc.sequence_dir, "sequence directory")->required();
  gen->add_option("--out", rc.out_path, "output directory")->required();
  gen->add_option("--window", rc.window, "frames merged per volume")
      ->check(CLI::PositiveNumber);
  gen->add_option("--spec", rc.spec_text, "ox,oy,oz,voxel,dx,dy,dz")->required();

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic labeled dataset");
  synth->add_option("--out", rc.out_path, "output directory")->required();
  synth->add_option("--scenes", rc.scenes, "scene count")->check(CLI::PositiveNumber);
  synth->add_option("--spec", rc.spec_text, "ox,oy,oz,voxel,dx,dy,dz");
  synth->add_option("--classes", rc.classes, "semantic classes");
  synth->add_option("--boxes", rc.boxes, "boxes per scene");
  synth->add_option("--planes", rc.planes, "ground planes per scene");
  synth->add_option("--points-per-box", rc.points_per_box, "surface samples per box");
  synth->add_option("--points-per-plane", rc.points_per_plane, "samples per plane");
  synth->add_option("--sweep-fraction", rc.sweep_fraction, "per-point keep probability");
  synth->add_option("--occlusion", rc.occlusion, "fraction of azimuth kept");
  synth->add_option("--seed", rc.seed, "base seed");

  CLI::App* train = app.add_subcommand("train", "fit a model on a dataset");
  train->add_option("--config", rc.config_path, "model configuration file")->required();
  train->add_option("--data", rc.data_dir, "dataset directory (synth layout)")->required();
  train->add_option("--out", rc.out_path, "checkpoint/log directory")->required();
  train->add_option("--epochs", rc.epochs, "epoch count")->check(CLI::NonNegativeNumber);
  train->add_option("--lr", rc.lr, "base learning rate");
  train->add_option("--seed", rc.seed, "init/augmentation seed");
  train->add_option("--log", rc.log_path, "loss log path (default OUT/train.log)");
  train->add_flag("--seg-only", rc.seg_only, "train the segmentation head alone");
  train->add_flag("--no-augment", rc.no_augment, "disable training augmentation");

  CLI::App* infer = app.add_subcommand("infer", "label a scan with a checkpoint");
  infer->add_option("--config", rc.config_path, "model configuration file")->required();
  infer->add_option("--checkpoint", rc.checkpoint_path, "checkpoint file")->required();
  infer->add_option("--scan", rc.scan_path, "input scan (.bin)")->required();
  infer->add_option("--out", rc.out_path, "output label file")->required();
  infer->add_option("--mode", rc.mode, "infer drops all completion work")
      ->check(CLI::IsMember({"infer", "train"}));
  infer->add_option("--votes", rc.votes, "augmented inference votes")
      ->check(CLI::PositiveNumber);
  infer->add_option("--seed", rc.seed, "vote augmentation seed");
  infer->add_option("--log", rc.log_path, "run log path (default stdout)");

  CLI::App* eval = app.add_subcommand("eval", "score predicted labels against truth");
  eval->add_option("--pred", rc.pred_path, "predicted label file")->required();
  eval->add_option("--gt", rc.gt_path, "ground-truth label file")->required();
  eval->add_option("--classes", rc.classes, "semantic classes")
      ->required()
      ->check(CLI::PositiveNumber);
  eval->add_option("--out", rc.out_path, "report file (key value lines)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_gt(rc);
    if (synth->parsed()) return cmd_synth(rc);
    if (train->parsed()) return cmd_train(rc);
    if (infer->parsed()) return cmd_infer(rc);
    if (eval->parsed()) return cmd_eval(rc);
  } catch (const numerical_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
