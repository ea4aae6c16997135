#include "aebs/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "aebs/rng.hpp"

namespace aebs {

using ad::Var;

// ---- .npy ------------------------------------------------------------------

void write_npy(const std::string& path, const Eigen::MatrixXd& m) {
  std::ostringstream hdr;
  hdr << "{'descr': '<f8', 'fortran_order': False, 'shape': (" << m.rows() << ", " << m.cols() << "), }";
  std::string h = hdr.str();
  const std::size_t total = 10 + h.size() + 1;
  h.append((64 - total % 64) % 64, ' ');
  h.push_back('\n');
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(h.size());
  const char lb[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(lb, 2);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

Eigen::MatrixXd read_npy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "\x93NUMPY", 6) != 0) throw std::runtime_error(path + ": not an npy file");
  unsigned char lb[2];
  in.read(reinterpret_cast<char*>(lb), 2);
  std::string h(lb[0] | (lb[1] << 8), '\0');
  in.read(h.data(), static_cast<std::streamsize>(h.size()));
  if (h.find("'<f8'") == std::string::npos || h.find("'fortran_order': False") == std::string::npos)
    throw std::runtime_error(path + ": expected C-order float64");
  const auto lp = h.find('(');
  const auto rp = h.find(')');
  std::string shape = h.substr(lp + 1, rp - lp - 1);
  long rows = 0, cols = 1;
  if (std::sscanf(shape.c_str(), "%ld, %ld", &rows, &cols) < 1) throw std::runtime_error(path + ": bad shape");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!in) throw std::runtime_error(path + ": truncated");
  return rm;
}

// ---- model -----------------------------------------------------------------

Eigen::MatrixXd timestep_embedding(int t, int dim) {
  Eigen::MatrixXd e(1, dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double w = std::pow(1000.0, -static_cast<double>(i) / std::max(half, 1));
    e(0, i) = std::sin(t * w);
    e(0, half + i) = std::cos(t * w);
  }
  if (dim % 2) e(0, dim - 1) = static_cast<double>(t);
  return e;
}

namespace {

constexpr int kEdgeFeatures = 3;  // one-hot state, cell distance

std::string layer_name(int l, const char* what) { return "layer" + std::to_string(l) + "." + what; }

}  // namespace

int GraphDenoiser::context_dim() const { return cfg_.time_dim + 2 * cfg_.hidden + 1; }

long long GraphDenoiser::parameter_count(const DenoiserConfig& cfg, int S) {
  const long long d = cfg.hidden, h = cfg.heads, c = cfg.time_dim + 2LL * cfg.hidden + 1;
  const long long inputs = ((S + 1) * d + d + d * d + d) + (S * d + d + d * d + d) + (kEdgeFeatures * d + d + d * d + d);
  const long long layer = 4 * d * d + d   // attention projections and output bias
                          + d * h         // edge-to-head bias
                          + 2 * d         // norm after attention
                          + 2 * (d * d + d)  // feed-forward
                          + 2 * (c * d + d)  // FiLM scale and shift
                          + 2 * d         // norm after feed-forward
                          + 2 * d * d + d  // edge update
                          + 2 * d;        // edge norm
  const long long heads = (d * d + d + d * S + S) + (d * d + d + d * 2 + 2);
  return inputs + cfg.layers * layer + heads;
}

void GraphDenoiser::add(const std::string& name, int rows, int cols, double init_scale, std::uint64_t seed) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(rows, cols);
  if (init_scale != 0.0) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(params_.size())});
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = init_scale * (2.0 * uniform01(rng) - 1.0);
  }
  params_.push_back({name, std::move(v)});
}

GraphDenoiser::GraphDenoiser(const DenoiserConfig& cfg, int node_alphabet, int grid)
    : cfg_(cfg), alphabet_(node_alphabet), grid_(grid) {
  if (cfg.hidden % cfg.heads != 0) throw ConfigError("denoiser.hidden: must be divisible by denoiser.heads");
  const int d = cfg.hidden, S = node_alphabet, c = context_dim();
  const std::uint64_t seed = cfg.init_seed;
  const auto glorot = [](int fan_in) { return std::sqrt(3.0 / fan_in); };
  const auto one = [this](const std::string& name, int cols) {
    params_.push_back({name, Eigen::MatrixXd::Ones(1, cols)});
  };

  add("aebs_in.w1", S + 1, d, glorot(S + 1), seed);
  add("aebs_in.b1", 1, d, 0.0, seed);
  add("aebs_in.w2", d, d, glorot(d), seed);
  add("aebs_in.b2", 1, d, 0.0, seed);
  add("gu_in.w1", S, d, glorot(S), seed);
  add("gu_in.b1", 1, d, 0.0, seed);
  add("gu_in.w2", d, d, glorot(d), seed);
  add("gu_in.b2", 1, d, 0.0, seed);
  add("edge_in.w1", kEdgeFeatures, d, glorot(kEdgeFeatures), seed);
  add("edge_in.b1", 1, d, 0.0, seed);
  add("edge_in.w2", d, d, glorot(d), seed);
  add("edge_in.b2", 1, d, 0.0, seed);
  for (int l = 0; l < cfg.layers; ++l) {
    add(layer_name(l, "wq"), d, d, glorot(d), seed);
    add(layer_name(l, "wk"), d, d, glorot(d), seed);
    add(layer_name(l, "wv"), d, d, glorot(d), seed);
    add(layer_name(l, "wo"), d, d, glorot(d), seed);
    add(layer_name(l, "bo"), 1, d, 0.0, seed);
    add(layer_name(l, "edge_bias"), d, cfg.heads, glorot(d), seed);
    one(layer_name(l, "ln1.g"), d);
    add(layer_name(l, "ln1.b"), 1, d, 0.0, seed);
    add(layer_name(l, "ff.w1"), d, d, glorot(d), seed);
    add(layer_name(l, "ff.b1"), 1, d, 0.0, seed);
    add(layer_name(l, "ff.w2"), d, d, glorot(d), seed);
    add(layer_name(l, "ff.b2"), 1, d, 0.0, seed);
    add(layer_name(l, "film.wg"), c, d, 0.1 * glorot(c), seed);
    add(layer_name(l, "film.bg"), 1, d, 0.0, seed);
    add(layer_name(l, "film.wb"), c, d, 0.1 * glorot(c), seed);
    add(layer_name(l, "film.bb"), 1, d, 0.0, seed);
    one(layer_name(l, "ln2.g"), d);
    add(layer_name(l, "ln2.b"), 1, d, 0.0, seed);
    add(layer_name(l, "edge.wn"), d, d, glorot(d), seed);
    add(layer_name(l, "edge.we"), d, d, glorot(d), seed);
    add(layer_name(l, "edge.b"), 1, d, 0.0, seed);
    one(layer_name(l, "ln3.g"), d);
    add(layer_name(l, "ln3.b"), 1, d, 0.0, seed);
  }
  add("node_head.w1", d, d, glorot(d), seed);
  add("node_head.b1", 1, d, 0.0, seed);
  add("node_head.w2", d, S, 0.0, seed);
  add("node_head.b2", 1, S, 0.0, seed);
  add("edge_head.w1", d, d, glorot(d), seed);
  add("edge_head.b1", 1, d, 0.0, seed);
  add("edge_head.w2", d, 2, 0.0, seed);
  add("edge_head.b2", 1, 2, 0.0, seed);
}

int GraphDenoiser::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  throw std::out_of_range("denoiser parameter " + name);
}

GraphDenoiser::Outputs GraphDenoiser::forward(ad::Tape& tape, const std::vector<Var>& p, const GraphState& gt,
                                              int t, const Condition& cond) const {
  const int K = gt.num_nodes, N = gt.num_gus, S = alphabet_, d = cfg_.hidden, H = cfg_.heads;
  if (gt.node_alphabet != S) throw std::invalid_argument("denoiser: node alphabet mismatch");
  if (!gt.valid()) throw std::invalid_argument("denoiser: invalid graph state");
  if (!cond.gu_cells.empty() && static_cast<int>(cond.gu_cells.size()) != N)
    throw std::invalid_argument("denoiser: GU cell count mismatch");
  std::size_t next = 0;
  // Parameters are consumed in registration order; the suffix check guards
  // the bookkeeping.
  auto P = [&](const std::string& suffix) -> Var {
    const std::string& name = params_[next].name;
    if (name.size() < suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
      throw std::logic_error("denoiser: expected " + suffix + ", got " + name);
    return p[next++];
  };
  auto mlp = [&](Var x) {
    Var w1 = P("w1"), b1 = P("b1"), w2 = P("w2"), b2 = P("b2");
    return ad::add_row(ad::matmul(ad::silu(ad::add_row(ad::matmul(x, w1), b1)), w2), b2);
  };

  Eigen::MatrixXd xa = Eigen::MatrixXd::Zero(K, S + 1);
  for (int k = 0; k < K; ++k) {
    xa(k, gt.nodes[k]) = 1.0;
    if (k < static_cast<int>(cond.power_fraction.size())) xa(k, S) = cond.power_fraction[k];
  }
  Eigen::MatrixXd xg = Eigen::MatrixXd::Zero(N, S);
  for (int n = 0; n < N && !cond.gu_cells.empty(); ++n) xg(n, cond.gu_cells[n]) = 1.0;
  Eigen::MatrixXd xe = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K) * N, kEdgeFeatures);
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      const int e = k * N + n;
      xe(e, gt.edge(k, n)) = 1.0;
      if (grid_ > 0 && !cond.gu_cells.empty()) {
        const int a = gt.nodes[k], b = cond.gu_cells[n];
        xe(e, 2) = std::hypot(a / grid_ - b / grid_, a % grid_ - b % grid_) / grid_;
      }
    }

  Var ha = mlp(tape.constant(xa));
  Var hg = mlp(tape.constant(xg));
  Var h = ad::concat_rows({ha, hg});
  Var e = mlp(tape.constant(xe));

  std::vector<int> edge_src, edge_dst;
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      edge_src.push_back(k);
      edge_dst.push_back(K + n);
    }
  const int dh = d / H;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Var temb = tape.constant(timestep_embedding(t, cfg_.time_dim));
  Var util = tape.constant(Eigen::MatrixXd::Constant(1, 1, cond.utility));

  for (int l = 0; l < cfg_.layers; ++l) {
    Var wq = P("wq"), wk = P("wk"), wv = P("wv"), wo = P("wo"), bo = P("bo"), web = P("edge_bias");
    Var q = ad::matmul(h, wq), kk = ad::matmul(h, wk), v = ad::matmul(h, wv);
    Var bias = ad::matmul(e, web);
    std::vector<Var> heads;
    for (int hd = 0; hd < H; ++hd) {
      Var qh = ad::slice_cols(q, hd * dh, dh), kh = ad::slice_cols(kk, hd * dh, dh), vh = ad::slice_cols(v, hd * dh, dh);
      Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
      if (K * N > 0) scores = ad::add(scores, ad::scatter_pairs(ad::slice_cols(bias, hd, 1), K, N));
      heads.push_back(ad::matmul(ad::softmax_rows(scores), vh));
    }
    Var attn = ad::add_row(ad::matmul(ad::concat_cols(heads), wo), bo);
    Var g1 = P("ln1.g"), b1 = P("ln1.b");
    h = ad::layer_norm(ad::add(h, attn), g1, b1);

    Var fw1 = P("ff.w1"), fb1 = P("ff.b1"), fw2 = P("ff.w2"), fb2 = P("ff.b2");
    Var wg = P("film.wg"), bg = P("film.bg"), wb = P("film.wb"), bb = P("film.bb");
    Var ctx = ad::concat_cols({temb, ad::mean_rows(h), ad::mean_rows(e), util});
    Var gamma = ad::add_row(ad::matmul(ctx, wg), bg);
    Var beta = ad::add_row(ad::matmul(ctx, wb), bb);
    Var u = ad::add_row(ad::matmul(ad::silu(ad::add_row(ad::matmul(h, fw1), fb1)), fw2), fb2);
    u = ad::add_row(ad::mul_row(u, ad::add_scalar(gamma, 1.0)), beta);
    Var g2 = P("ln2.g"), b2 = P("ln2.b");
    h = ad::layer_norm(ad::add(h, u), g2, b2);

    Var wn = P("edge.wn"), we = P("edge.we"), eb = P("edge.b"), g3 = P("ln3.g"), b3 = P("ln3.b");
    Var pair = ad::hadamard(ad::gather_rows(h, edge_src), ad::gather_rows(h, edge_dst));
    Var upd = ad::silu(ad::add_row(ad::add(ad::matmul(pair, wn), ad::matmul(e, we)), eb));
    e = ad::layer_norm(ad::add(e, upd), g3, b3);
  }

  Var node_logits = mlp(ad::slice_rows(h, 0, K));
  Var edge_logits = mlp(e);
  if (next != p.size()) throw std::logic_error("denoiser: parameter bookkeeping");
  return {ad::softmax_rows(node_logits), ad::softmax_rows(edge_logits)};
}

CategoricalField GraphDenoiser::predict(const GraphState& gt, int t, const Condition& cond) const {
  ad::Tape tape;
  std::vector<Var> p;
  p.reserve(params_.size());
  for (const auto& q : params_) p.push_back(tape.param(q.value, nullptr));
  const Outputs o = forward(tape, p, gt, t, cond);
  return {o.node_probs.value(), o.edge_probs.value()};
}

double GraphDenoiser::log_prob_grad(const GraphState& gt, int t, const Condition& cond, const TargetWeights& w,
                                    Eigen::VectorXd* grad) const {
  ad::Tape tape;
  std::vector<Eigen::MatrixXd> sinks;
  sinks.reserve(params_.size());
  std::vector<Var> p;
  p.reserve(params_.size());
  for (const auto& q : params_) sinks.push_back(Eigen::MatrixXd::Zero(q.value.rows(), q.value.cols()));
  for (std::size_t i = 0; i < params_.size(); ++i) p.push_back(tape.param(params_[i].value, grad ? &sinks[i] : nullptr));
  const Outputs o = forward(tape, p, gt, t, cond);
  Var lp = ad::weighted_log_prob(o.node_probs, w.node);
  if (gt.num_edges() > 0) lp = ad::add(lp, ad::weighted_log_prob(o.edge_probs, w.edge));
  const double value = lp.value()(0, 0);
  if (grad) {
    tape.backward(lp);
    grad->resize(num_parameters());
    Eigen::Index off = 0;
    for (const auto& s : sinks) {
      grad->segment(off, s.size()) = Eigen::Map<const Eigen::VectorXd>(s.data(), s.size());
      off += s.size();
    }
  }
  return value;
}

double GraphDenoiser::log_prob_of(const GraphState& target, const GraphState& gt, int t, const Condition& cond) const {
  const CategoricalField f = predict(gt, t, cond);
  double lp = 0.0;
  for (int k = 0; k < target.num_nodes; ++k) {
    const double q = f.node(k, target.nodes[k]);
    if (!(q > 0.0)) return -1e9;
    lp += std::log(q);
  }
  for (int e = 0; e < target.num_edges(); ++e) {
    const double q = f.edge(e, target.edges[e]);
    if (!(q > 0.0)) return -1e9;
    lp += std::log(q);
  }
  return lp;
}

int GraphDenoiser::num_parameters() const {
  Eigen::Index n = 0;
  for (const auto& q : params_) n += q.value.size();
  return static_cast<int>(n);
}

Eigen::VectorXd GraphDenoiser::parameters() const {
  Eigen::VectorXd v(num_parameters());
  Eigen::Index off = 0;
  for (const auto& q : params_) {
    v.segment(off, q.value.size()) = Eigen::Map<const Eigen::VectorXd>(q.value.data(), q.value.size());
    off += q.value.size();
  }
  return v;
}

void GraphDenoiser::set_parameters(const Eigen::VectorXd& v) {
  if (v.size() != num_parameters()) throw std::invalid_argument("set_parameters: size");
  Eigen::Index off = 0;
  for (auto& q : params_) {
    Eigen::Map<Eigen::VectorXd>(q.value.data(), q.value.size()) = v.segment(off, q.value.size());
    off += q.value.size();
  }
}

void GraphDenoiser::save(const std::string& dir, const nlohmann::json& extra) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json shapes = nlohmann::json::array();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& q = params_[i];
    const std::string file = "param_" + std::to_string(i) + ".npy";
    write_npy((fs::path(dir) / file).string(), q.value);
    shapes.push_back({{"name", q.name}, {"file", file}, {"rows", q.value.rows()}, {"cols", q.value.cols()}});
  }
  nlohmann::json meta = {
      {"format", 1},
      {"layers", cfg_.layers},
      {"hidden", cfg_.hidden},
      {"heads", cfg_.heads},
      {"time_dim", cfg_.time_dim},
      {"init_seed", cfg_.init_seed},
      {"node_alphabet", alphabet_},
      {"grid", grid_},
      {"params", shapes},
      {"extra", extra},
  };
  std::ofstream out(fs::path(dir) / "meta.json");
  out << meta.dump(2) << '\n';
}

GraphDenoiser GraphDenoiser::load(const std::string& dir, nlohmann::json* extra) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "meta.json");
  if (!in) throw std::runtime_error("checkpoint: missing " + (fs::path(dir) / "meta.json").string());
  const nlohmann::json meta = nlohmann::json::parse(in);
  DenoiserConfig cfg;
  cfg.layers = meta.at("layers");
  cfg.hidden = meta.at("hidden");
  cfg.heads = meta.at("heads");
  cfg.time_dim = meta.at("time_dim");
  cfg.init_seed = meta.at("init_seed");
  GraphDenoiser m(cfg, meta.at("node_alphabet"), meta.at("grid"));
  const auto& shapes = meta.at("params");
  if (shapes.size() != m.params_.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].at("name") != m.params_[i].name) throw std::runtime_error("checkpoint: parameter order mismatch");
    Eigen::MatrixXd v = read_npy((fs::path(dir) / shapes[i].at("file").get<std::string>()).string());
    if (v.rows() != m.params_[i].value.rows() || v.cols() != m.params_[i].value.cols())
      throw std::runtime_error("checkpoint: shape mismatch for " + m.params_[i].name);
    m.params_[i].value = std::move(v);
  }
  if (extra) *extra = meta.value("extra", nlohmann::json::object());
  return m;
}

}  // namespace aebs
