#include "js3c/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "js3c/dense_ops.hpp"
#include "js3c/ops.hpp"

namespace js3c {

namespace ops = ad::ops;
namespace dense = ad::dense;
using ad::Tape;
using ad::Tensor;

ModelConfig ModelConfig::toy() {
  ModelConfig cfg;
  cfg.preset = "toy";
  cfg.num_classes = 4;
  cfg.in_features = 3;
  cfg.seg_channels = {8, 16, 24};
  cfg.voxel_size_seg = 0.1;
  cfg.ssc_spec.origin = Vec3(0.0, 0.0, 0.0);
  cfg.ssc_spec.voxel_size = 0.2;
  cfg.ssc_spec.dims = {32, 32, 8};
  cfg.ssc_blocks = 3;
  cfg.ssc_width = 16;
  cfg.embed_dim = 16;
  cfg.pvi_k = 8;
  cfg.pvi_layers = 1;
  cfg.pvi_hidden = 32;
  return cfg;
}

ModelConfig ModelConfig::paper() {
  ModelConfig cfg;
  cfg.preset = "paper";
  cfg.num_classes = 19;
  cfg.in_features = 3;
  cfg.seg_channels = {16, 32, 48, 64, 80, 96, 112};
  cfg.voxel_size_seg = 0.05;
  cfg.ssc_spec.origin = Vec3(0.0, -25.6, -2.0);
  cfg.ssc_spec.voxel_size = 0.2;
  cfg.ssc_spec.dims = {256, 256, 32};
  cfg.ssc_blocks = 5;
  cfg.ssc_width = 32;
  cfg.embed_dim = 64;
  cfg.pvi_k = 8;
  cfg.pvi_layers = 1;
  cfg.pvi_hidden = 32;
  return cfg;
}

void ModelConfig::validate() const {
  require(preset == "toy" || preset == "paper", "config: unknown preset");
  require(num_classes >= 2, "config: need at least two classes");
  require(in_features >= 1, "config: in_features must be positive");
  require(!seg_channels.empty(), "config: empty segmentation channel schedule");
  for (long c : seg_channels) require(c >= 1, "config: segmentation channels must be positive");
  require(voxel_size_seg > 0.0, "config: voxel_size_seg must be positive");
  ssc_spec.validate();
  // the completion decoder pools by 2 and shuffles back by 2
  for (long d : ssc_spec.dims)
    require(d % 2 == 0, "config: completion dims must be even");
  require(ssc_blocks >= 1, "config: ssc_blocks must be positive");
  require(ssc_width >= 1, "config: ssc_width must be positive");
  require(embed_dim >= 1, "config: embed_dim must be positive");
  require(pvi_k >= 1, "config: pvi_k must be positive");
  require(pvi_layers >= 1, "config: pvi_layers must be positive");
  require(pvi_hidden >= 1, "config: pvi_hidden must be positive");
  require(leaky_slope > 0.0 && leaky_slope < 1.0, "config: leaky_slope out of range");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    require(pos == v.size(), "");
    return d;
  } catch (...) {
    throw format_error("config: bad number for " + key + ": " + v);
  }
}

long parse_long(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long l = std::stol(v, &pos);
    require(pos == v.size(), "");
    return l;
  } catch (...) {
    throw format_error("config: bad integer for " + key + ": " + v);
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

}  // namespace

std::string config_to_text(const ModelConfig& cfg) {
  std::string out;
  out += "preset = " + cfg.preset + "\n";
  out += "num_classes = " + std::to_string(cfg.num_classes) + "\n";
  out += "in_features = " + std::to_string(cfg.in_features) + "\n";
  std::string ch;
  for (std::size_t i = 0; i < cfg.seg_channels.size(); ++i)
    ch += (i ? "," : "") + std::to_string(cfg.seg_channels[i]);
  out += "seg_channels = " + ch + "\n";
  out += "voxel_size_seg = " + fmt_double(cfg.voxel_size_seg) + "\n";
  out += "ssc_origin = " + fmt_double(cfg.ssc_spec.origin.x()) + "," +
         fmt_double(cfg.ssc_spec.origin.y()) + "," +
         fmt_double(cfg.ssc_spec.origin.z()) + "\n";
  out += "ssc_voxel_size = " + fmt_double(cfg.ssc_spec.voxel_size) + "\n";
  out += "ssc_dims = " + std::to_string(cfg.ssc_spec.dims[0]) + "," +
         std::to_string(cfg.ssc_spec.dims[1]) + "," +
         std::to_string(cfg.ssc_spec.dims[2]) + "\n";
  out += "ssc_blocks = " + std::to_string(cfg.ssc_blocks) + "\n";
  out += "ssc_width = " + std::to_string(cfg.ssc_width) + "\n";
  out += "embed_dim = " + std::to_string(cfg.embed_dim) + "\n";
  out += "pvi_k = " + std::to_string(cfg.pvi_k) + "\n";
  out += "pvi_layers = " + std::to_string(cfg.pvi_layers) + "\n";
  out += "pvi_hidden = " + std::to_string(cfg.pvi_hidden) + "\n";
  out += "leaky_slope = " + fmt_double(cfg.leaky_slope) + "\n";
  return out;
}

ModelConfig config_from_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw format_error("config: expected `key = value`, got: " + s);
    kv.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }

  ModelConfig cfg = ModelConfig::toy();
  for (const auto& [k, v] : kv) {
    if (k != "preset") continue;
    if (v == "toy") cfg = ModelConfig::toy();
    else if (v == "paper") cfg = ModelConfig::paper();
    else throw format_error("config: unknown preset: " + v);
  }

  for (const auto& [k, v] : kv) {
    if (k == "preset") {
      continue;
    } else if (k == "num_classes") {
      cfg.num_classes = static_cast<int>(parse_long(v, k));
    } else if (k == "in_features") {
      cfg.in_features = parse_long(v, k);
    } else if (k == "seg_channels") {
      cfg.seg_channels.clear();
      for (const auto& item : split_list(v))
        cfg.seg_channels.push_back(parse_long(item, k));
    } else if (k == "voxel_size_seg") {
      cfg.voxel_size_seg = parse_double(v, k);
    } else if (k == "ssc_origin") {
      const auto items = split_list(v);
      if (items.size() != 3) throw format_error("config: ssc_origin needs 3 values");
      cfg.ssc_spec.origin = Vec3(parse_double(items[0], k), parse_double(items[1], k),
                                 parse_double(items[2], k));
    } else if (k == "ssc_voxel_size") {
      cfg.ssc_spec.voxel_size = parse_double(v, k);
    } else if (k == "ssc_dims") {
      const auto items = split_list(v);
      if (items.size() != 3) throw format_error("config: ssc_dims needs 3 values");
      for (int i = 0; i < 3; ++i)
        cfg.ssc_spec.dims[static_cast<std::size_t>(i)] = parse_long(items[static_cast<std::size_t>(i)], k);
    } else if (k == "ssc_blocks") {
      cfg.ssc_blocks = static_cast<int>(parse_long(v, k));
    } else if (k == "ssc_width") {
      cfg.ssc_width = parse_long(v, k);
    } else if (k == "embed_dim") {
      cfg.embed_dim = parse_long(v, k);
    } else if (k == "pvi_k") {
      cfg.pvi_k = static_cast<int>(parse_long(v, k));
    } else if (k == "pvi_layers") {
      cfg.pvi_layers = static_cast<int>(parse_long(v, k));
    } else if (k == "pvi_hidden") {
      cfg.pvi_hidden = parse_long(v, k);
    } else if (k == "leaky_slope") {
      cfg.leaky_slope = parse_double(v, k);
    } else {
      throw format_error("config: unknown key: " + k);
    }
  }
  cfg.validate();
  return cfg;
}

void save_config(const ModelConfig& cfg, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "config: cannot open for writing: " + path);
  const std::string text = config_to_text(cfg);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(f.good(), "config: write failed: " + path);
}

ModelConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) throw io_error("config: cannot open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_text(ss.str());
}

namespace {

enum class Init : std::uint8_t { kHe, kZeros, kOnes, kEmptyBias, kSigma };

struct ParamSchema {
  std::string name;
  std::vector<long> shape;
  Partition partition;
  double lr_mult;
  Init init;
  long fan;  // he fan-in
};

std::vector<ParamSchema> param_schema(const ModelConfig& cfg) {
  std::vector<ParamSchema> out;
  auto he = [&](const std::string& n, std::vector<long> s, Partition p, long fan) {
    out.push_back({n, std::move(s), p, 1.0, Init::kHe, fan});
  };
  auto zeros = [&](const std::string& n, std::vector<long> s, Partition p) {
    out.push_back({n, std::move(s), p, 1.0, Init::kZeros, 1});
  };
  auto ones = [&](const std::string& n, std::vector<long> s, Partition p) {
    out.push_back({n, std::move(s), p, 1.0, Init::kOnes, 1});
  };

  const auto seg = Partition::kSeg;
  const auto aux = Partition::kAux;
  const long C = cfg.num_classes;
  const int B = static_cast<int>(cfg.seg_channels.size());

  auto conv_block = [&](const std::string& prefix, long fin, long c, Partition p) {
    he(prefix + ".conv1.w", {27, fin, c}, p, 27 * fin);
    zeros(prefix + ".conv1.b", {c}, p);
    ones(prefix + ".aff1.scale", {c}, p);
    zeros(prefix + ".aff1.shift", {c}, p);
    he(prefix + ".conv2.w", {27, c, c}, p, 27 * c);
    zeros(prefix + ".conv2.b", {c}, p);
    ones(prefix + ".aff2.scale", {c}, p);
    zeros(prefix + ".aff2.shift", {c}, p);
  };

  for (int s = 0; s < B; ++s) {
    const long fin = s == 0 ? cfg.in_features : cfg.seg_channels[static_cast<std::size_t>(s - 1)];
    conv_block("seg.enc" + std::to_string(s), fin, cfg.seg_channels[static_cast<std::size_t>(s)], seg);
  }
  for (int s = B - 2; s >= 0; --s) {
    const long c = cfg.seg_channels[static_cast<std::size_t>(s)];
    const long cdeep = cfg.seg_channels[static_cast<std::size_t>(s + 1)];
    const std::string prefix = "seg.dec" + std::to_string(s);
    he(prefix + ".proj.w", {cdeep + c, c}, seg, cdeep + c);
    zeros(prefix + ".proj.b", {c}, seg);
    conv_block(prefix, c, c, seg);
  }
  const long c0 = cfg.seg_channels[0];
  he("seg.mlp1.w", {c0, cfg.embed_dim}, seg, c0);
  zeros("seg.mlp1.b", {cfg.embed_dim}, seg);
  he("seg.mlp2.w", {c0, cfg.embed_dim}, seg, c0);
  zeros("seg.mlp2.b", {cfg.embed_dim}, seg);
  he("seg.mlp3.w", {cfg.embed_dim, C}, seg, cfg.embed_dim);
  zeros("seg.mlp3.b", {C}, seg);

  const long w = cfg.ssc_width;
  he("aux.in.w", {27, C, w}, aux, 27 * C);
  zeros("aux.in.b", {w}, aux);
  for (int i = 0; i < cfg.ssc_blocks; ++i) {
    const std::string prefix = "aux.block" + std::to_string(i);
    he(prefix + ".conv1.w", {27, w, w}, aux, 27 * w);
    zeros(prefix + ".conv1.b", {w}, aux);
    he(prefix + ".conv2.w", {27, w, w}, aux, 27 * w);
    zeros(prefix + ".conv2.b", {w}, aux);
  }
  he("aux.up.w", {1, w, w * 8}, aux, w);
  zeros("aux.up.b", {w * 8}, aux);
  he("aux.head.w", {1, 2 * w, C + 1}, aux, 2 * w);
  out.push_back({"aux.head.b", {C + 1}, aux, 1.0, Init::kEmptyBias, 1});

  for (int j = 0; j < cfg.pvi_layers; ++j) {
    const long fin = j == 0 ? C + 1 : cfg.pvi_hidden;
    const long h = cfg.pvi_hidden;
    const std::string prefix = "aux.pvi.l" + std::to_string(j);
    he(prefix + ".proj.w", {cfg.embed_dim, fin}, aux, cfg.embed_dim);
    zeros(prefix + ".proj.b", {fin}, aux);
    he(prefix + ".m1.w", {6 + 2 * fin, h}, aux, 6 + 2 * fin);
    zeros(prefix + ".m1.b", {h}, aux);
    he(prefix + ".m2.w", {h, h}, aux, h);
    zeros(prefix + ".m2.b", {h}, aux);
    he(prefix + ".m3.w", {h, h}, aux, h);
    zeros(prefix + ".m3.b", {h}, aux);
  }
  zeros("aux.pvi.head.w", {cfg.pvi_hidden, C + 1}, aux);
  zeros("aux.pvi.head.b", {C + 1}, aux);

  out.push_back({"aux.s1", {}, aux, 10.0, Init::kSigma, 1});
  out.push_back({"aux.s2", {}, aux, 10.0, Init::kSigma, 1});
  return out;
}

}  // namespace

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  init_params(seed);
}

Model::Model(const ModelConfig& cfg, ParamStore params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const auto schema = param_schema(cfg_);
  require(params_.size() == schema.size(),
          "model: parameter count does not match config");
  for (const auto& ps : schema) {
    require(params_.has(ps.name), "model: missing parameter " + ps.name);
    const Param& p = params_.at(ps.name);
    require(p.value.shape == ps.shape, "model: shape mismatch for " + ps.name);
    require(p.partition == ps.partition, "model: partition mismatch for " + ps.name);
    require(p.lr_mult == ps.lr_mult, "model: lr_mult mismatch for " + ps.name);
  }
}

void Model::init_params(std::uint64_t seed) {
  const auto schema = param_schema(cfg_);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& ps = schema[i];
    Rng rng(derive_seed(seed, i));
    Tensor v;
    switch (ps.init) {
      case Init::kHe:
        v = Tensor::randn(ps.shape, rng,
                          std::sqrt(2.0 / static_cast<double>(ps.fan)));
        break;
      case Init::kZeros:
        v = Tensor::zeros(ps.shape);
        break;
      case Init::kOnes:
        v = Tensor::full(ps.shape, 1.0);
        break;
      case Init::kEmptyBias:
        v = Tensor::zeros(ps.shape);
        v.data[0] = 2.0;  // start the completion head certain of emptiness
        break;
      case Init::kSigma: {
        const double sigma = uniform(rng, 0.8, 1.2);
        v = Tensor::scalar(std::log(sigma * sigma));
        break;
      }
    }
    params_.add(ps.name, std::move(v), ps.partition, ps.lr_mult);
  }
}

int Model::param_node(Tape& t, ForwardOutput& out, const std::string& name) {
  const auto it = out.param_nodes.find(name);
  if (it != out.param_nodes.end()) return it->second;
  const int id = t.leaf(params_.at(name).value);
  out.param_nodes.emplace(name, id);
  return id;
}

ForwardOutput Model::forward(Tape& t, const PointCloud& cloud, Mode mode) {
  cloud.validate();
  require(cloud.size() > 0, "forward: empty point cloud");
  require(cloud.feature_dim() == cfg_.in_features,
          "forward: point feature width does not match config");

  ForwardOutput out;
  const double slope = cfg_.leaky_slope;
  const int B = static_cast<int>(cfg_.seg_channels.size());

  auto block = [&](int x, const std::string& prefix, const Rulebook& rb) {
    const int w1 = param_node(t, out, prefix + ".conv1.w");
    const int b1 = param_node(t, out, prefix + ".conv1.b");
    const int sc1 = param_node(t, out, prefix + ".aff1.scale");
    const int sh1 = param_node(t, out, prefix + ".aff1.shift");
    x = ad::sparse::submanifold_conv(t, x, w1, b1, rb);
    x = ops::channel_affine(t, x, sc1, sh1);
    x = ops::leaky_relu(t, x, slope);
    const int w2 = param_node(t, out, prefix + ".conv2.w");
    const int b2 = param_node(t, out, prefix + ".conv2.b");
    const int sc2 = param_node(t, out, prefix + ".aff2.scale");
    const int sh2 = param_node(t, out, prefix + ".aff2.shift");
    x = ad::sparse::submanifold_conv(t, x, w2, b2, rb);
    x = ops::channel_affine(t, x, sc2, sh2);
    x = ops::leaky_relu(t, x, slope);
    return x;
  };

  // ---- segmentation U-Net ----
  out.seg_vox = voxelize_points_unbounded(cloud, Vec3::Zero(), cfg_.voxel_size_seg);
  SparseTensor sites = out.seg_vox.tensor;

  std::vector<const Rulebook*> rb_scale(static_cast<std::size_t>(B), nullptr);
  std::vector<const SparsePoolMap*> pm_scale(static_cast<std::size_t>(B), nullptr);
  std::vector<int> skip(static_cast<std::size_t>(B), -1);

  int x = t.leaf(sites.features);
  for (int s = 0; s < B; ++s) {
    out.rulebooks.push_back(std::make_unique<Rulebook>(build_rulebook(sites, 3)));
    rb_scale[static_cast<std::size_t>(s)] = out.rulebooks.back().get();
    x = block(x, "seg.enc" + std::to_string(s), *rb_scale[static_cast<std::size_t>(s)]);
    skip[static_cast<std::size_t>(s)] = x;
    if (s + 1 < B) {
      out.pool_maps.push_back(std::make_unique<SparsePoolMap>(build_pool_map(sites)));
      pm_scale[static_cast<std::size_t>(s)] = out.pool_maps.back().get();
      x = ad::sparse::sparse_max_pool(t, x, *pm_scale[static_cast<std::size_t>(s)]);
      SparseTensor next;
      next.coords = pm_scale[static_cast<std::size_t>(s)]->parent_coords;
      next.features = Tensor::zeros({static_cast<long>(next.coords.size()), 1});
      next.rebuild_index();
      sites = std::move(next);
    }
  }
  for (int s = B - 2; s >= 0; --s) {
    const std::string prefix = "seg.dec" + std::to_string(s);
    x = ad::sparse::sparse_unpool(t, x, *pm_scale[static_cast<std::size_t>(s)]);
    x = ops::concat_last(t, x, skip[static_cast<std::size_t>(s)]);
    const int pw = param_node(t, out, prefix + ".proj.w");
    const int pb = param_node(t, out, prefix + ".proj.b");
    x = ops::leaky_relu(t, ops::linear(t, x, pw, pb), slope);
    x = block(x, prefix, *rb_scale[static_cast<std::size_t>(s)]);
  }

  out.f_enc = devoxelize(t, x, out.seg_vox.map);
  {
    const int w1 = param_node(t, out, "seg.mlp1.w");
    const int b1 = param_node(t, out, "seg.mlp1.b");
    out.f_se = ops::leaky_relu(t, ops::linear(t, out.f_enc, w1, b1), slope);
    const int w2 = param_node(t, out, "seg.mlp2.w");
    const int b2 = param_node(t, out, "seg.mlp2.b");
    const int f2 = ops::leaky_relu(t, ops::linear(t, out.f_enc, w2, b2), slope);
    const int fused = ops::add(t, out.f_se, f2);
    const int w3 = param_node(t, out, "seg.mlp3.w");
    const int b3 = param_node(t, out, "seg.mlp3.b");
    out.seg_logits = ops::linear(t, fused, w3, b3);
  }

  if (mode == Mode::kInfer) return out;

  // ---- completion decoder (training only; strictly downstream) ----
  out.has_aux = true;
  out.seg_probs = ops::softmax_rows(t, out.seg_logits);

  const VolumeSpec& spec = cfg_.ssc_spec;
  for (long i = 0; i < cloud.size(); ++i)
    if (spec.contains(cloud.positions[static_cast<std::size_t>(i)]))
      out.ssc_members.push_back(i);
  require(!out.ssc_members.empty(), "forward: no points inside the completion volume");

  PointCloud cropped;
  cropped.positions.reserve(out.ssc_members.size());
  for (long i : out.ssc_members)
    cropped.positions.push_back(cloud.positions[static_cast<std::size_t>(i)]);
  cropped.features = Tensor::zeros({static_cast<long>(cropped.positions.size()), 0});
  out.ssc_vox = voxelize_points(cropped, spec);

  std::vector<int> member_idx(out.ssc_members.begin(), out.ssc_members.end());
  const int member_probs = ops::gather_rows(t, out.seg_probs, member_idx);
  {
    const Tensor& pv = t.val(member_probs);
    const long rows = pv.rows(), cols = pv.cols();
    for (long r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (long c = 0; c < cols; ++c) sum += pv.data[r * cols + c];
      require(std::abs(sum - 1.0) <= 1e-6,
              "completion input: probability rows must sum to 1");
    }
  }

  const long V = out.ssc_vox.tensor.num_sites();
  std::vector<int> row_of(out.ssc_vox.map.point_to_voxel.begin(),
                          out.ssc_vox.map.point_to_voxel.end());
  const int vox_probs = ops::scatter_mean_rows(t, member_probs, row_of, V);

  const long C = cfg_.num_classes;
  const long cells = spec.num_cells();
  std::vector<int> cell_of_vox;
  cell_of_vox.reserve(static_cast<std::size_t>(V));
  for (const auto& c : out.ssc_vox.tensor.coords)
    cell_of_vox.push_back(static_cast<int>(spec.linear(c[0], c[1], c[2])));
  const int empty_vol = t.leaf(Tensor::zeros({cells, C}));
  const int flat_vol = ops::scatter_add_rows(t, empty_vol, vox_probs, cell_of_vox);
  const int vol = ops::reshape(
      t, flat_vol, {spec.dims[2], spec.dims[1], spec.dims[0], C});
  ++counters_.ssc_volumes;

  auto dconv = [&](int h, const std::string& name, long pad) {
    const int w = param_node(t, out, name + ".w");
    const int b = param_node(t, out, name + ".b");
    ++counters_.dense_convs;
    return dense::conv3d(t, h, w, b, 1, pad);
  };

  const int f0 = ops::leaky_relu(t, dconv(vol, "aux.in", 1), slope);
  int h = dense::max_pool3d(t, f0);
  for (int i = 0; i < cfg_.ssc_blocks; ++i) {
    const std::string prefix = "aux.block" + std::to_string(i);
    const int c1 = ops::leaky_relu(t, dconv(h, prefix + ".conv1", 1), slope);
    const int c2 = dconv(c1, prefix + ".conv2", 1);
    h = ops::leaky_relu(t, ops::add(t, h, c2), slope);
  }
  int up = dconv(h, "aux.up", 0);
  up = dense::voxel_shuffle(t, up, 2);
  const int cat = ops::concat_last(t, f0, up);
  out.coarse_ssc = dconv(cat, "aux.head", 0);

  // ---- point-voxel refinement ----
  out.centers = extract_voxel_centers(t.val(out.coarse_ssc), spec);
  require(cloud.size() >= cfg_.pvi_k, "forward: fewer points than pvi_k");
  out.graph = knn_query(out.centers.positions, cloud.positions, cfg_.pvi_k);
  ++counters_.pvi_graphs;

  ad::pvi::PviNodes nodes;
  for (int j = 0; j < cfg_.pvi_layers; ++j) {
    const std::string prefix = "aux.pvi.l" + std::to_string(j);
    ad::pvi::LayerNodes ln;
    ln.proj_w = param_node(t, out, prefix + ".proj.w");
    ln.proj_b = param_node(t, out, prefix + ".proj.b");
    ln.w1 = param_node(t, out, prefix + ".m1.w");
    ln.b1 = param_node(t, out, prefix + ".m1.b");
    ln.w2 = param_node(t, out, prefix + ".m2.w");
    ln.b2 = param_node(t, out, prefix + ".m2.b");
    ln.w3 = param_node(t, out, prefix + ".m3.w");
    ln.b3 = param_node(t, out, prefix + ".m3.b");
    nodes.layers.push_back(ln);
  }
  nodes.head_w = param_node(t, out, "aux.pvi.head.w");
  nodes.head_b = param_node(t, out, "aux.pvi.head.b");
  ++counters_.pvi_refines;
  out.refined_ssc = ad::pvi::refine(t, out.coarse_ssc, spec, out.centers,
                                    out.graph, cloud.positions, out.f_se,
                                    nodes, slope);
  return out;
}

SegAugment draw_seg_augment(Rng& rng) {
  SegAugment a;
  a.angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  a.scale = uniform(rng, 0.9, 1.1);
  return a;
}

PointCloud apply_seg_augment(const PointCloud& cloud, const SegAugment& aug) {
  const Pose rot = Pose::rotation_z(aug.angle);
  PointCloud out = cloud;
  for (Vec3& p : out.positions) p = rot.apply(p) * aug.scale;
  return out;
}

GridAugment draw_grid_augment(Rng& rng) {
  GridAugment a;
  a.quarter_turns = static_cast<int>(std::uniform_int_distribution<int>(0, 3)(rng));
  a.flip_x = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  a.flip_y = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  return a;
}

LabeledVolume apply_grid_augment(const LabeledVolume& vol, const GridAugment& aug) {
  const auto& dims = vol.spec.dims;
  require(aug.quarter_turns >= 0 && aug.quarter_turns <= 3,
          "grid augment: quarter_turns out of range");
  if (aug.quarter_turns % 2 != 0)
    require(dims[0] == dims[1],
            "grid augment: quarter turns need a square horizontal footprint");

  auto rotate90 = [&](const LabeledVolume& in) {  // square footprint only
    LabeledVolume next(in.spec);
    const long n = dims[0];
    for (long z = 0; z < dims[2]; ++z)
      for (long y = 0; y < dims[1]; ++y)
        for (long xx = 0; xx < dims[0]; ++xx)
          next.set(xx, y, z, in.at(y, n - 1 - xx, z));
    return next;
  };
  auto rotate180 = [&](const LabeledVolume& in) {  // any footprint
    LabeledVolume next(in.spec);
    for (long z = 0; z < dims[2]; ++z)
      for (long y = 0; y < dims[1]; ++y)
        for (long xx = 0; xx < dims[0]; ++xx)
          next.set(xx, y, z, in.at(dims[0] - 1 - xx, dims[1] - 1 - y, z));
    return next;
  };

  LabeledVolume cur = vol;
  if (aug.quarter_turns >= 2) cur = rotate180(cur);
  if (aug.quarter_turns % 2 == 1) cur = rotate90(cur);
  if (aug.flip_x) {
    LabeledVolume next(cur.spec);
    for (long z = 0; z < dims[2]; ++z)
      for (long y = 0; y < dims[1]; ++y)
        for (long xx = 0; xx < dims[0]; ++xx)
          next.set(xx, y, z, cur.at(dims[0] - 1 - xx, y, z));
    cur = std::move(next);
  }
  if (aug.flip_y) {
    LabeledVolume next(cur.spec);
    for (long z = 0; z < dims[2]; ++z)
      for (long y = 0; y < dims[1]; ++y)
        for (long xx = 0; xx < dims[0]; ++xx)
          next.set(xx, y, z, cur.at(xx, dims[1] - 1 - y, z));
    cur = std::move(next);
  }
  return cur;
}

PointCloud apply_grid_augment_points(const PointCloud& cloud,
                                     const GridAugment& aug,
                                     const VolumeSpec& spec) {
  if (aug.quarter_turns % 2 != 0)
    require(spec.dims[0] == spec.dims[1],
            "grid augment: quarter turns need a square horizontal footprint");
  const Vec3 hi = spec.max_corner();
  const double cx = 0.5 * (spec.origin.x() + hi.x());
  const double cy = 0.5 * (spec.origin.y() + hi.y());

  PointCloud out = cloud;
  for (Vec3& p : out.positions) {
    double dx = p.x() - cx, dy = p.y() - cy;
    for (int q = 0; q < aug.quarter_turns; ++q) {
      const double tmp = dx;
      dx = -dy;
      dy = tmp;
    }
    if (aug.flip_x) dx = -dx;
    if (aug.flip_y) dy = -dy;
    p.x() = cx + dx;
    p.y() = cy + dy;
  }
  return out;
}

ad::Tensor vote_inference(Model& model, const PointCloud& cloud, int votes,
                          std::uint64_t seed) {
  require(votes >= 1, "vote_inference: votes must be positive");
  require(model.config().in_features == 3,
          "vote_inference: expects point coordinates as the input features");

  Tensor acc;
  for (int v = 0; v < votes; ++v) {
    SegAugment aug;  // vote 0 evaluates the untouched cloud
    if (v > 0) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(v)));
      aug = draw_seg_augment(rng);
    }
    PointCloud voted = apply_seg_augment(cloud, aug);
    voted.features = Tensor({voted.size(), 3});
    for (long i = 0; i < voted.size(); ++i)
      for (int a = 0; a < 3; ++a)
        voted.features.data[i * 3 + a] = voted.positions[static_cast<std::size_t>(i)][a];

    Tape t;
    ForwardOutput fo = model.forward(t, voted, Mode::kInfer);
    const int probs = ops::softmax_rows(t, fo.seg_logits);
    const Tensor& pv = t.val(probs);
    if (v == 0) acc = pv;
    else
      for (long i = 0; i < acc.numel(); ++i) acc.data[i] += pv.data[i];
  }
  for (double& d : acc.data) d /= static_cast<double>(votes);
  return acc;
}

}  // namespace js3c
