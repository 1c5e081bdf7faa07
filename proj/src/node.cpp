#include "taperom/node.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace taperom {

namespace {

constexpr double kSeluLambda = 1.0507009873554805;
constexpr double kSeluAlpha = 1.6732632423543772;

double selu(double x) {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}
double selu_grad(double x) {
  return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

int tri_index(int i, int j, int r) {  // packed lower triangle, i >= j
  return j * r - j * (j - 1) / 2 + (i - j);
}

Mat materialize(const Vec& y, OutputMode mode, int r, double scale) {
  Mat m(r, r);
  switch (mode) {
    case OutputMode::Full:
      m = Eigen::Map<const Mat>(y.data(), r, r);
      break;
    case OutputMode::Symmetric:
      for (int j = 0; j < r; ++j)
        for (int i = j; i < r; ++i) {
          double v = y[tri_index(i, j, r)];
          m(i, j) = v;
          m(j, i) = v;
        }
      break;
    case OutputMode::Spd: {
      Mat lo = Mat::Zero(r, r);
      for (int j = 0; j < r; ++j)
        for (int i = j; i < r; ++i) lo(i, j) = y[tri_index(i, j, r)];
      m = lo * lo.transpose();
      break;
    }
  }
  return scale * m;
}

Vec materialize_backward(const Mat& mbar_scaled, const Vec& y, OutputMode mode,
                         int r, double scale) {
  Mat mbar = scale * mbar_scaled;
  Vec ybar(output_dim(mode, r));
  switch (mode) {
    case OutputMode::Full:
      ybar = Eigen::Map<const Vec>(mbar.data(), r * r);
      break;
    case OutputMode::Symmetric:
      for (int j = 0; j < r; ++j)
        for (int i = j; i < r; ++i)
          ybar[tri_index(i, j, r)] = i == j ? mbar(i, i) : mbar(i, j) + mbar(j, i);
      break;
    case OutputMode::Spd: {
      Mat lo = Mat::Zero(r, r);
      for (int j = 0; j < r; ++j)
        for (int i = j; i < r; ++i) lo(i, j) = y[tri_index(i, j, r)];
      Mat lobar = (mbar + mbar.transpose()) * lo;
      for (int j = 0; j < r; ++j)
        for (int i = j; i < r; ++i) ybar[tri_index(i, j, r)] = lobar(i, j);
      break;
    }
  }
  return ybar;
}

// Forward through the network with optional cache; input is raw i_r.
Vec mlp_forward(const MlpParams& p, const Vec& i_r, NodeStepCache* cache) {
  Vec x = ((i_r.cwiseAbs() - p.in_mean).array() / p.in_scale.array()).matrix();
  if (cache) {
    cache->x0 = x;
    cache->preacts.clear();
    cache->acts.clear();
  }
  const int nl = p.n_layers();
  for (int l = 0; l < nl; ++l) {
    Vec a = p.weights[l] * x + p.biases[l];
    if (l + 1 == nl) {
      if (cache) cache->y = a;
      return a;  // linear output layer
    }
    if (cache) cache->preacts.push_back(a);
    x = a.unaryExpr([](double v) { return selu(v); });
    if (cache) cache->acts.push_back(x);
  }
  return x;  // unreachable for valid architectures
}

}  // namespace

int output_dim(OutputMode mode, int r_i) {
  return mode == OutputMode::Full ? r_i * r_i : r_i * (r_i + 1) / 2;
}

int MlpParams::n_params() const {
  int n = 0;
  for (int l = 0; l < n_layers(); ++l)
    n += static_cast<int>(weights[l].size() + biases[l].size());
  return n;
}

Vec MlpParams::flatten() const {
  Vec theta(n_params());
  int at = 0;
  for (int l = 0; l < n_layers(); ++l) {
    int nw = static_cast<int>(weights[l].size());
    theta.segment(at, nw) = Eigen::Map<const Vec>(weights[l].data(), nw);
    at += nw;
    theta.segment(at, biases[l].size()) = biases[l];
    at += static_cast<int>(biases[l].size());
  }
  return theta;
}

void MlpParams::unflatten(const Vec& theta) {
  int at = 0;
  for (int l = 0; l < n_layers(); ++l) {
    int nw = static_cast<int>(weights[l].size());
    Eigen::Map<Vec>(weights[l].data(), nw) = theta.segment(at, nw);
    at += nw;
    biases[l] = theta.segment(at, biases[l].size());
    at += static_cast<int>(biases[l].size());
  }
}

std::vector<int> MlpParams::hidden_sizes() const {
  std::vector<int> h;
  for (int l = 0; l + 1 < n_layers(); ++l)
    h.push_back(static_cast<int>(weights[l].rows()));
  return h;
}

void MlpParams::validate() const {
  if (r_i < 1) throw ConfigError("node: r_i must be >= 1");
  if (weights.empty()) throw ConfigError("node: network has no layers");
  if (weights.front().cols() != r_i)
    throw ConfigError("node: input layer width does not match r_i");
  if (weights.back().rows() != output_dim(output_mode, r_i))
    throw ConfigError("node: output layer size does not match the output mode");
  if (in_mean.size() != r_i || in_scale.size() != r_i)
    throw ConfigError("node: normalization statistics do not match r_i");
  if ((in_scale.array() <= 0.0).any())
    throw ConfigError("node: normalization scales must be > 0");
  for (int l = 0; l < n_layers(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite())
      throw ConfigError("node: non-finite parameters");
    if (biases[l].size() != weights[l].rows())
      throw ConfigError("node: bias/weight shape mismatch in layer " + std::to_string(l));
    if (l > 0 && weights[l].cols() != weights[l - 1].rows())
      throw ConfigError("node: layer shape mismatch at layer " + std::to_string(l));
  }
}

MlpParams init_mlp(int r_i, const std::vector<int>& hidden, OutputMode mode,
                   unsigned long long seed) {
  if (r_i < 1) throw ConfigError("node: r_i must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("node: hidden layer sizes must be >= 1");
  MlpParams p;
  p.r_i = r_i;
  p.output_mode = mode;
  p.in_mean = Vec::Zero(r_i);
  p.in_scale = Vec::Ones(r_i);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<int> dims;
  dims.push_back(r_i);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(output_dim(mode, r_i));
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    Mat w(dims[l + 1], dims[l]);
    double std_dev = std::sqrt(1.0 / dims[l]);
    for (int c = 0; c < w.cols(); ++c)
      for (int r = 0; r < w.rows(); ++r) w(r, c) = std_dev * normal(rng);
    if (l + 2 == dims.size()) w *= 1e-2;
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vec::Zero(dims[l + 1]));
  }
  return p;
}

Mat r_psi_forward(const MlpParams& params, const Vec& i_r) {
  if (i_r.size() != params.r_i) throw ConfigError("r_psi_forward: input size mismatch");
  if (!i_r.allFinite()) throw DomainError("r_psi_forward: non-finite input");
  Vec y = mlp_forward(params, i_r, nullptr);
  return materialize(y, params.output_mode, params.r_i, params.out_scale);
}

RomState node_step(const RomOperators& rom, const MlpParams& params,
                   const RomState& prev, const Vec& esr_next, double dt,
                   NodeStepCache* cache) {
  const int ri = rom.r_i(), rp = rom.r_phi();
  if (prev.i_r.size() != ri || prev.phi_r.size() != rp)
    throw ConfigError("node_step: state dimensions do not match the ROM");
  const bool vacuous = rom.vacuous_constraint();
  const int n = vacuous ? ri : ri + rp;

  Vec y = mlp_forward(params, prev.i_r, cache);
  Mat r_psi = materialize(y, params.output_mode, ri, params.out_scale);

  Mat a = Mat::Zero(n, n);
  a.block(0, 0, ri, ri) = dt * r_psi + rom.L_r;
  if (!vacuous) {
    a.block(0, ri, ri, rp) = dt * rom.G_r.transpose();
    a.block(ri, 0, rp, ri) = rom.G_r;
  }

  Vec b = Vec::Zero(n);
  b.head(ri) = rom.L_r * prev.i_r + dt * esr_next;

  Eigen::PartialPivLU<Mat> lu(a);
  Vec x = lu.solve(b);
  if (!x.allFinite())
    throw StepFailure("node_step: singular step matrix (state norm " +
                          std::to_string(prev.i_r.norm()) + ")",
                      -1, 0.0);
  Vec x_full = Vec::Zero(ri + rp);
  x_full.head(n) = x;
  if (cache) {
    cache->i_prev = prev.i_r;
    cache->lu = std::move(lu);
    cache->x_next = x_full;
    cache->vacuous = vacuous;
  }
  return {x_full.head(ri), x_full.tail(rp)};
}

RomTrajectory unroll(const RomOperators& rom, const MlpParams& params,
                     const RomState& init, const Mat& sources, double dt,
                     std::vector<NodeStepCache>* caches) {
  const int n = static_cast<int>(sources.cols());
  RomTrajectory traj;
  traj.times.resize(n + 1);
  traj.currents_r.resize(rom.r_i(), n + 1);
  traj.potentials_r.resize(rom.r_phi(), n + 1);
  traj.times[0] = 0.0;
  traj.currents_r.col(0) = init.i_r;
  traj.potentials_r.col(0) = init.phi_r;
  if (caches) caches->resize(n);
  RomState state = init;
  for (int k = 0; k < n; ++k) {
    try {
      state = node_step(rom, params, state, sources.col(k), dt,
                        caches ? &(*caches)[k] : nullptr);
    } catch (const StepFailure& e) {
      throw StepFailure(std::string(e.what()) + " at step " + std::to_string(k + 1),
                        k + 1, e.last_residual);
    }
    traj.times[k + 1] = (k + 1) * dt;
    traj.currents_r.col(k + 1) = state.i_r;
    traj.potentials_r.col(k + 1) = state.phi_r;
  }
  return traj;
}

double loss_mse(const Mat& pred_i, const Mat& pred_phi, const Mat& ref_i,
                const Mat& ref_phi, const LossWeights& w) {
  if (pred_i.rows() != ref_i.rows() || pred_i.cols() != ref_i.cols() ||
      pred_phi.rows() != ref_phi.rows() || pred_phi.cols() != ref_phi.cols() ||
      pred_i.cols() != pred_phi.cols())
    throw ConfigError("loss_mse: shape mismatch");
  const int n = static_cast<int>(pred_i.cols());
  const double denom = n * (pred_i.rows() + pred_phi.rows());
  double sse_i, sse_phi;
  if (w.scale_i.size() > 0)
    sse_i = (w.scale_i.cwiseInverse().asDiagonal() * (pred_i - ref_i)).squaredNorm();
  else
    sse_i = (pred_i - ref_i).squaredNorm();
  if (w.scale_phi.size() > 0)
    sse_phi =
        (w.scale_phi.cwiseInverse().asDiagonal() * (pred_phi - ref_phi)).squaredNorm();
  else
    sse_phi = (pred_phi - ref_phi).squaredNorm();
  return (w.w_i * sse_i + w.w_phi * sse_phi) / denom;
}

NodeGradient backward(const RomOperators& rom, const MlpParams& params,
                      const TrainSegment& segment, const LossWeights& w) {
  const int ri = rom.r_i(), rp = rom.r_phi();
  const int n = segment.n_steps();
  std::vector<NodeStepCache> caches;
  RomTrajectory traj = unroll(rom, params, segment.init, segment.sources, segment.dt,
                              &caches);

  Mat pred_i = traj.currents_r.rightCols(n);
  Mat pred_phi = traj.potentials_r.rightCols(n);
  const double denom = n * (ri + rp);

  NodeGradient out;
  out.loss = loss_mse(pred_i, pred_phi, segment.ref_i, segment.ref_phi, w);

  std::vector<Mat> wbar(params.n_layers());
  std::vector<Vec> bbar(params.n_layers());
  for (int l = 0; l < params.n_layers(); ++l) {
    wbar[l] = Mat::Zero(params.weights[l].rows(), params.weights[l].cols());
    bbar[l] = Vec::Zero(params.biases[l].size());
  }

  Vec state_bar_i = Vec::Zero(ri);  // cotangent of i^(k) flowing backward
  for (int k = n; k >= 1; --k) {
    const NodeStepCache& c = caches[k - 1];
    Vec xbar(ri + rp);
    Vec di = pred_i.col(k - 1) - segment.ref_i.col(k - 1);
    Vec dphi = pred_phi.col(k - 1) - segment.ref_phi.col(k - 1);
    if (w.scale_i.size() > 0) di = di.cwiseQuotient(w.scale_i.cwiseProduct(w.scale_i));
    if (w.scale_phi.size() > 0)
      dphi = dphi.cwiseQuotient(w.scale_phi.cwiseProduct(w.scale_phi));
    xbar.head(ri) = state_bar_i + (2.0 * w.w_i / denom) * di;
    xbar.tail(rp) = (2.0 * w.w_phi / denom) * dphi;

    // With a vacuous constraint the potentials are pinned: their cotangent
    // does not flow through the solve.
    Vec lambda = c.vacuous ? Vec(c.lu.transpose().solve(Vec(xbar.head(ri))))
                           : Vec(c.lu.transpose().solve(xbar));
    Vec lambda_i = lambda.head(ri);

    // b = [L_r i_prev + dt e; 0]
    Vec ibar_prev = rom.L_r * lambda_i;

    // Abar = -lambda x^T restricted to the dt R_psi block
    Mat rbar = -segment.dt * lambda_i * c.x_next.head(ri).transpose();
    Vec ybar = materialize_backward(rbar, c.y, params.output_mode, ri, params.out_scale);

    // network backward
    const int nl = params.n_layers();
    Vec abar = ybar;
    for (int l = nl - 1; l >= 0; --l) {
      const Vec& input = l == 0 ? c.x0 : c.acts[l - 1];
      wbar[l] += abar * input.transpose();
      bbar[l] += abar;
      if (l == 0) {
        Vec x0bar = params.weights[0].transpose() * abar;
        Vec dabs = c.i_prev.unaryExpr(
            [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
        ibar_prev += (x0bar.array() / params.in_scale.array() * dabs.array()).matrix();
      } else {
        Vec hbar = params.weights[l].transpose() * abar;
        abar = (hbar.array() *
                c.preacts[l - 1].unaryExpr([](double v) { return selu_grad(v); }).array())
                   .matrix();
      }
    }
    state_bar_i = ibar_prev;
  }

  out.grad.resize(params.n_params());
  int at = 0;
  for (int l = 0; l < params.n_layers(); ++l) {
    int nw = static_cast<int>(wbar[l].size());
    out.grad.segment(at, nw) = Eigen::Map<const Vec>(wbar[l].data(), nw);
    at += nw;
    out.grad.segment(at, bbar[l].size()) = bbar[l];
    at += static_cast<int>(bbar[l].size());
  }
  return out;
}

double gradient_check(const RomOperators& rom, const MlpParams& params,
                      const TrainSegment& segment, const LossWeights& w,
                      int n_probes, unsigned long long seed) {
  NodeGradient g = backward(rom, params, segment, w);
  Vec theta = params.flatten();
  const int np = theta.size();
  double theta_rms = std::sqrt(theta.squaredNorm() / np);

  std::mt19937_64 rng(seed);
  std::vector<int> idx(np);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  n_probes = std::min(n_probes, np);

  // Fourth-order central stencil; the relative denominator is floored at
  // 1e-3 of the gradient peak so solver roundoff on near-zero components
  // does not masquerade as mismatch.
  double gmax = g.grad.cwiseAbs().maxCoeff();
  double worst = 0.0;
  MlpParams probe = params;
  for (int k = 0; k < n_probes; ++k) {
    int j = idx[k];
    double h = 3e-4 * std::max(std::abs(theta[j]), theta_rms);
    auto eval = [&](double d) {
      Vec t = theta;
      t[j] += d;
      probe.unflatten(t);
      return backward(rom, probe, segment, w).loss;
    };
    double fd =
        (eval(-2.0 * h) - 8.0 * eval(-h) + 8.0 * eval(h) - eval(2.0 * h)) / (12.0 * h);
    double denom = std::max({std::abs(fd), std::abs(g.grad[j]), 1e-3 * gmax});
    if (denom > 0.0) worst = std::max(worst, std::abs(fd - g.grad[j]) / denom);
  }
  return worst;
}

void TrainConfig::validate() const {
  if (seq_len < 2) throw ConfigError("node.seq_len must be >= 2");
  if (batch_size < 1) throw ConfigError("node.batch_size must be >= 1");
  if (!(lr > 0.0) && lr != 0.0) throw ConfigError("node.lr must be >= 0");
  if (epochs < 1) throw ConfigError("node.epochs must be >= 1");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ConfigError("node.val_fraction must be in [0,1)");
}

void set_normalization(MlpParams& params, const RomOperators& rom,
                       const std::vector<ReducedTraj>& dataset) {
  const int ri = params.r_i;
  Vec mean = Vec::Zero(ri), second = Vec::Zero(ri);
  long count = 0;
  for (const ReducedTraj& tr : dataset) {
    for (int k = 0; k < tr.i_r.cols(); ++k) {
      Vec a = tr.i_r.col(k).cwiseAbs();
      mean += a;
      second += a.cwiseProduct(a);
      ++count;
    }
  }
  if (count == 0) throw ConfigError("node: empty dataset");
  mean /= count;
  second /= count;
  Vec var = (second - mean.cwiseProduct(mean)).cwiseMax(0.0);
  params.in_mean = mean;
  params.in_scale = var.cwiseSqrt().cwiseMax(1e-12 * (mean.maxCoeff() + 1e-300));
  for (int k = 0; k < ri; ++k)
    if (!(params.in_scale[k] > 0.0)) params.in_scale[k] = 1.0;

  Vec dl = rom.L_r.diagonal().cwiseAbs();
  std::vector<double> v(dl.data(), dl.data() + dl.size());
  std::sort(v.begin(), v.end());
  double median = v[v.size() / 2];
  double dt = dataset.front().dt;
  params.out_scale = median / dt;
}

void make_segments(const std::vector<ReducedTraj>& dataset, int seq_len,
                   double val_fraction, unsigned long long seed,
                   std::vector<TrainSegment>& train_out,
                   std::vector<TrainSegment>& val_out, int stride) {
  if (stride <= 0) stride = seq_len;
  std::vector<TrainSegment> all;
  for (const ReducedTraj& tr : dataset) {
    const int total = static_cast<int>(tr.sources.cols());
    for (int s = 0; s + seq_len <= total; s += stride) {
      TrainSegment seg;
      seg.init = {tr.i_r.col(s), tr.phi_r.col(s)};
      seg.sources = tr.sources.middleCols(s, seq_len);
      seg.dt = tr.dt;
      seg.ref_i = tr.i_r.middleCols(s + 1, seq_len);
      seg.ref_phi = tr.phi_r.middleCols(s + 1, seq_len);
      all.push_back(std::move(seg));
    }
  }
  if (all.empty()) throw ConfigError("node: dataset produced no full-length segments");

  std::vector<int> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::shuffle(order.begin(), order.end(), rng);
  size_t n_val = static_cast<size_t>(val_fraction * all.size());
  if (val_fraction > 0.0 && n_val == 0) n_val = 1;
  train_out.clear();
  val_out.clear();
  for (size_t k = 0; k < order.size(); ++k)
    (k < n_val ? val_out : train_out).push_back(all[order[k]]);
  if (train_out.empty()) throw ConfigError("node: validation split left no training data");
}

TrainResult train(const RomOperators& rom, MlpParams params,
                  const std::vector<ReducedTraj>& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw ConfigError("node: dataset is empty");
  params.validate();

  // Per-variable RMS normalization of the loss: without it the leading POD
  // mode dominates the objective by orders of magnitude.
  LossWeights weights = cfg.weights;
  if (weights.scale_i.size() == 0) {
    Vec acc_i = Vec::Zero(rom.r_i()), acc_p = Vec::Zero(rom.r_phi());
    long count = 0;
    for (const ReducedTraj& tr : dataset) {
      acc_i += tr.i_r.cwiseProduct(tr.i_r).rowwise().sum();
      acc_p += tr.phi_r.cwiseProduct(tr.phi_r).rowwise().sum();
      count += tr.i_r.cols();
    }
    double floor_i = std::sqrt(acc_i.sum() / (count * rom.r_i())) * 1e-6 + 1e-300;
    weights.scale_i = (acc_i / count).cwiseSqrt().cwiseMax(floor_i);
    double floor_p = std::sqrt(acc_p.sum() / (count * std::max(1, rom.r_phi()))) * 1e-6;
    weights.scale_phi = (acc_p / count).cwiseSqrt().cwiseMax(floor_p + 1e-300);
  }

  std::vector<TrainSegment> train_segs, val_segs;
  make_segments(dataset, cfg.seq_len, cfg.val_fraction, cfg.seed, train_segs, val_segs,
                cfg.stride);

  Vec theta = params.flatten();
  Vec m = Vec::Zero(theta.size()), v = Vec::Zero(theta.size());
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long adam_t = 0;
  double lr = cfg.lr;

  TrainResult result;
  result.params = params;
  result.best_val = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(cfg.seed ^ 0x7a21bd5ULL);
  std::vector<int> order(train_segs.size());
  std::iota(order.begin(), order.end(), 0);

  auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.lr_decay_every > 0 && epoch > 0 && epoch % cfg.lr_decay_every == 0)
      lr *= cfg.lr_decay_factor;
    std::shuffle(order.begin(), order.end(), rng);

    double train_loss = 0.0;
    size_t at = 0;
    while (at < order.size()) {
      size_t bend = std::min(at + static_cast<size_t>(cfg.batch_size), order.size());
      Vec grad = Vec::Zero(theta.size());
      double batch_loss = 0.0;
      for (size_t s = at; s < bend; ++s) {
        NodeGradient g = backward(rom, params, train_segs[order[s]], weights);
        grad += g.grad;
        batch_loss += g.loss;
        train_loss += g.loss;
      }
      double nb = static_cast<double>(bend - at);
      grad /= nb;
      batch_loss /= nb;
      if (!std::isfinite(batch_loss))
        throw StepFailure("node training diverged (NaN loss) at epoch " +
                              std::to_string(epoch),
                          epoch, batch_loss);
      if (cfg.grad_clip > 0.0) {
        double gn = grad.norm();
        if (gn > cfg.grad_clip) grad *= cfg.grad_clip / gn;
      }
      ++adam_t;
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
      double bc1 = 1.0 - std::pow(beta1, adam_t);
      double bc2 = 1.0 - std::pow(beta2, adam_t);
      theta -= (lr / bc1) * (m.array() / ((v.array() / bc2).sqrt() + eps)).matrix();
      params.unflatten(theta);
      at = bend;
    }
    train_loss /= static_cast<double>(order.size());

    double val_loss = 0.0;
    if (!val_segs.empty()) {
      for (const TrainSegment& seg : val_segs) {
        RomTrajectory traj =
            unroll(rom, params, seg.init, seg.sources, seg.dt, nullptr);
        val_loss += loss_mse(traj.currents_r.rightCols(seg.n_steps()),
                             traj.potentials_r.rightCols(seg.n_steps()), seg.ref_i,
                             seg.ref_phi, weights);
      }
      val_loss /= static_cast<double>(val_segs.size());
    } else {
      val_loss = train_loss;
    }
    if (!std::isfinite(val_loss))
      throw StepFailure("node training diverged (NaN validation loss) at epoch " +
                            std::to_string(epoch),
                        epoch, val_loss);

    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back({epoch, train_loss, val_loss, wall});
    if (val_loss < result.best_val) {
      result.best_val = val_loss;
      result.best_epoch = epoch;
      result.params = params;
    }
  }
  return result;
}

NodeRunResult run_node(const RomOperators& rom, const MlpParams& params,
                       const ExcitationSpec& exc, const SolverConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_steps;
  Mat sources(rom.r_i(), n);
  for (int k = 1; k <= n; ++k) sources.col(k - 1) = rom.reduced_source(exc, k * cfg.dt);
  NodeRunResult out;
  RomState init{Vec::Zero(rom.r_i()), Vec::Zero(rom.r_phi())};
  try {
    out.traj = unroll(rom, params, init, sources, cfg.dt, nullptr);
  } catch (const StepFailure& e) {
    out.failed_at = e.step_index;
    // rerun up to the failure point so the truncated trajectory is returned
    int good = std::max(0, e.step_index - 1);
    out.traj = unroll(rom, params, init, sources.leftCols(good), cfg.dt, nullptr);
  }
  return out;
}

}  // namespace taperom
