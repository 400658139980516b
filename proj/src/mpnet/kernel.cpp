#include <algorithm>
#include <cmath>

#include "detail.hpp"
#include "radiomap/errors.hpp"

namespace radiomap::mpnet {
namespace {

using detail::ColMat;
using Eigen::VectorXd;

struct SampleOut {
  double level = 0.0;
  double amplitude_sum = 0.0;
  std::size_t pairs = 0;
};

struct Relu {
  static ColMat apply(const ColMat& z) { return z.cwiseMax(0.0); }
  static ColMat mask(const ColMat& g, const ColMat& z) { return (z.array() > 0.0).select(g, 0.0); }
};

void scatter_table(std::vector<double>& grad, const Tensor& table, const HashEncodingParams& enc,
                   const std::vector<EncodeTrace>& traces, const ColMat& g) {
  const int F = enc.features_per_level;
  for (std::size_t c = 0; c < traces.size(); ++c) {
    const auto& tr = traces[c];
    for (int l = 0; l < enc.levels; ++l)
      for (int k = 0; k < 8; ++k) {
        const std::size_t slot = static_cast<std::size_t>(l) * 8 + k;
        const double w = tr.weight[slot];
        if (w == 0.0) continue;
        double* dst = grad.data() + table.offset + static_cast<std::size_t>(tr.index[slot]) * F;
        for (int f = 0; f < F; ++f) dst[f] += w * g(l * F + f, static_cast<Eigen::Index>(c));
      }
  }
}

/// Forward pass for one measurement; when grad is set, also the backward pass with
/// dL/dlevel = g_level and dL/da = decay_coeff per evaluated pair.
SampleOut process(const MultipathNet& net, const detail::Layout& L, const PreparedSample& s,
                  const propagation::RenderConfig& render, std::vector<double>* grad, double energy_scale,
                  double decay_coeff, BackwardFault fault) {
  using detail::bias;
  using detail::weights;
  const auto& P = net.params();
  const auto& cfg = net.config();
  const auto& tx = *s.tx;
  const auto& rx = *s.rx;
  const int fd = cfg.feature_dim;
  const int dt = cfg.tx_encoder.output_dim();
  const int dr = cfg.rx_encoder.output_dim();

  // Tx side in canonical order.
  const auto order = propagation::canonical_order(tx.tx_points);
  const int J = static_cast<int>(order.size());
  ColMat Etx(dt, J);
  std::vector<EncodeTrace> tx_trace(static_cast<std::size_t>(J));
  VectorXd alpha(J);
  for (int j = 0; j < J; ++j) {
    const auto& tp = tx.tx_points[order[j]];
    alpha[j] = tp.alpha;
    encode_position(cfg.tx_encoder, net.values(*L.tx_table), tp.pos, {Etx.col(j).data(), static_cast<std::size_t>(dt)},
                    grad ? &tx_trace[j] : nullptr);
  }

  // Rx samples, ray-major.
  const int Np = static_cast<int>(rx.rx_sample_count());
  ColMat Erx(dr, Np);
  std::vector<EncodeTrace> rx_trace(static_cast<std::size_t>(Np));
  {
    int p = 0;
    for (const auto& ray : rx.rays)
      for (const auto& smp : ray.samples) {
        encode_position(cfg.rx_encoder, net.values(*L.rx_table), smp.pos,
                        {Erx.col(p).data(), static_cast<std::size_t>(dr)}, grad ? &rx_trace[p] : nullptr);
        ++p;
      }
  }

  // Attenuation MLP.
  const std::size_t na = L.att.size();
  std::vector<ColMat> att_in(na);
  std::vector<ColMat> att_z(na);
  {
    ColMat x = Erx;
    for (std::size_t l = 0; l < na; ++l) {
      att_z[l] = weights(P, *L.att[l].W) * x;
      att_z[l].colwise() += bias(P, *L.att[l].b);
      att_in[l] = std::move(x);
      if (l + 1 < na) x = Relu::apply(att_z[l]);
    }
  }
  const ColMat& att_out = att_z.back();
  const VectorXd delta = att_out.row(0).transpose().cwiseMax(0.0);
  const ColMat feat = att_out.bottomRows(fd);

  // Radiance MLP over all (sample, Tx point) pairs; column p * J + j.
  const auto W0 = weights(P, *L.rad[0].W);
  const ColMat A = W0.leftCols(fd) * feat;
  ColMat Bm = W0.rightCols(dt) * Etx;
  Bm.colwise() += bias(P, *L.rad[0].b);
  const int H0 = static_cast<int>(A.rows());
  const Eigen::Index PJ = static_cast<Eigen::Index>(Np) * J;
  const std::size_t nr = L.rad.size();
  std::vector<ColMat> rad_z(nr);
  rad_z[0].resize(H0, PJ);
  for (int p = 0; p < Np; ++p)
    for (int j = 0; j < J; ++j) rad_z[0].col(static_cast<Eigen::Index>(p) * J + j) = A.col(p) + Bm.col(j);
  std::vector<ColMat> rad_h(nr);
  for (std::size_t l = 1; l < nr; ++l) {
    rad_h[l - 1] = Relu::apply(rad_z[l - 1]);
    rad_z[l] = weights(P, *L.rad[l].W) * rad_h[l - 1];
    rad_z[l].colwise() += bias(P, *L.rad[l].b);
  }
  const ColMat& O = rad_z.back();

  // Signals, aggregated per Rx sample with the Tx weights.
  Eigen::ArrayXd amp = O.row(0).transpose().array().cwiseMax(0.0);
  Eigen::ArrayXd cs = O.row(1).transpose().array().cos();
  Eigen::ArrayXd sn = O.row(1).transpose().array().sin();
  std::vector<ComplexSignal> S(static_cast<std::size_t>(Np));
  for (int p = 0; p < Np; ++p) {
    double re = 0.0;
    double im = 0.0;
    for (int j = 0; j < J; ++j) {
      const Eigen::Index c = static_cast<Eigen::Index>(p) * J + j;
      re += alpha[j] * amp[c] * cs[c];
      im += alpha[j] * amp[c] * sn[c];
    }
    S[p] = {re, im};
  }

  // Rendering along rays.
  std::vector<propagation::RayWeights> rw;
  ComplexSignal R{0.0, 0.0};
  {
    int p = 0;
    for (const auto& ray : rx.rays) {
      std::vector<double> sig;
      std::vector<double> del;
      for (std::size_t i = 0; i < ray.samples.size(); ++i) {
        sig.push_back(ray.samples[i].sigma);
        del.push_back(delta[p + static_cast<int>(i)]);
      }
      rw.push_back(propagation::ray_weights(sig, del));
      ComplexSignal h{0.0, 0.0};
      for (std::size_t i = 0; i < ray.samples.size(); ++i) h += rw.back().weight[i] * S[p + i];
      R += render.gain_at(ray.direction) * h;
      p += static_cast<int>(ray.samples.size());
    }
  }
  const double m = std::abs(R);
  const double level = propagation::compensated_level(m, s.alpha_los);

  SampleOut out;
  out.level = level;
  out.amplitude_sum = amp.sum();
  out.pairs = static_cast<std::size_t>(PJ);
  if (!std::isfinite(level) || !std::isfinite(out.amplitude_sum)) {
    throw NumericFault("multipath kernel: non-finite output");
  }
  if (!grad) return out;

  // Backward.
  const double g_level = energy_scale * 2.0 * (level - s.target_level);
  const double g_m = (m > 0.0 && m < 1.0) ? g_level * (1.0 - s.alpha_los) : 0.0;
  const ComplexSignal g_R = m > 0.0 ? g_m * R / m : ComplexSignal{0.0, 0.0};

  std::vector<ComplexSignal> g_S(static_cast<std::size_t>(Np));
  VectorXd g_delta_raw = VectorXd::Zero(Np);
  {
    int p = 0;
    for (std::size_t k = 0; k < rx.rays.size(); ++k) {
      const auto& ray = rx.rays[k];
      const ComplexSignal g_h = render.gain_at(ray.direction) * g_R;
      const auto& w = rw[k];
      const int n = static_cast<int>(ray.samples.size());
      std::vector<double> g_w(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        g_S[p + i] = w.weight[i] * g_h;
        g_w[i] = g_h.real() * S[p + i].real() + g_h.imag() * S[p + i].imag();
      }
      // w_i = T_i (1 - exp(-sigma_i delta_i)); T_i depends on every earlier delta.
      double suffix = 0.0;
      for (int i = n - 1; i >= 0; --i) {
        const double sigma = ray.samples[i].sigma;
        const double d = delta[p + i];
        double g = g_w[i] * w.transmittance[i] * sigma * std::exp(-sigma * d);
        if (fault != BackwardFault::kDropTransmittanceCoupling) g -= sigma * suffix;
        suffix += g_w[i] * w.weight[i];
        g_delta_raw[p + i] = att_out(0, p + i) >= 0.0 ? g : 0.0;
      }
      p += n;
    }
  }

  ColMat g_O(2, PJ);
  for (int p = 0; p < Np; ++p)
    for (int j = 0; j < J; ++j) {
      const Eigen::Index c = static_cast<Eigen::Index>(p) * J + j;
      const double aj = fault == BackwardFault::kDropAlpha ? 1.0 : alpha[j];
      const double gr = aj * g_S[p].real();
      const double gi = aj * g_S[p].imag();
      const double g_a = gr * cs[c] + gi * sn[c] + decay_coeff;
      g_O(0, c) = O(0, c) >= 0.0 ? g_a : 0.0;
      g_O(1, c) = amp[c] * (-gr * sn[c] + gi * cs[c]);
    }

  auto& G = *grad;
  ColMat g_z = std::move(g_O);
  for (std::size_t l = nr - 1; l >= 1; --l) {
    weights(G, *L.rad[l].W).noalias() += g_z * rad_h[l - 1].transpose();
    bias(G, *L.rad[l].b) += g_z.rowwise().sum();
    const ColMat g_h = weights(P, *L.rad[l].W).transpose() * g_z;
    g_z = Relu::mask(g_h, rad_z[l - 1]);
  }
  // g_z is now dL/dZ of the first radiance layer.
  ColMat g_A = ColMat::Zero(H0, Np);
  ColMat g_B = ColMat::Zero(H0, J);
  for (int p = 0; p < Np; ++p)
    for (int j = 0; j < J; ++j) {
      const auto col = g_z.col(static_cast<Eigen::Index>(p) * J + j);
      g_A.col(p) += col;
      g_B.col(j) += col;
    }
  {
    auto gW0 = weights(G, *L.rad[0].W);
    gW0.leftCols(fd).noalias() += g_A * feat.transpose();
    gW0.rightCols(dt).noalias() += g_B * Etx.transpose();
    bias(G, *L.rad[0].b) += g_B.rowwise().sum();
  }
  const ColMat g_feat = W0.leftCols(fd).transpose() * g_A;
  const ColMat g_Etx = W0.rightCols(dt).transpose() * g_B;

  ColMat g_att(1 + fd, Np);
  g_att.row(0) = g_delta_raw.transpose();
  g_att.bottomRows(fd) = g_feat;
  for (std::size_t l = na; l-- > 0;) {
    weights(G, *L.att[l].W).noalias() += g_att * att_in[l].transpose();
    bias(G, *L.att[l].b) += g_att.rowwise().sum();
    ColMat g_x = weights(P, *L.att[l].W).transpose() * g_att;
    if (l > 0) {
      g_att = Relu::mask(g_x, att_z[l - 1]);
    } else {
      scatter_table(G, *L.rx_table, cfg.rx_encoder, rx_trace, g_x);
    }
  }
  scatter_table(G, *L.tx_table, cfg.tx_encoder, tx_trace, g_Etx);
  return out;
}

}  // namespace

BatchResult evaluate_batch(const MultipathNet& net, std::span<const PreparedSample> batch, const TrainConfig& cfg,
                           const propagation::RenderConfig& render, std::vector<double>* grad, BackwardFault fault) {
  if (batch.empty()) throw DomainError("evaluate_batch: empty batch");
  if (grad && grad->size() != net.params().size()) grad->assign(net.params().size(), 0.0);
  const auto L = detail::layout_of(net);
  std::size_t total_pairs = 0;
  for (const auto& s : batch) total_pairs += s.tx->tx_points.size() * s.rx->rx_sample_count();
  const double B = static_cast<double>(batch.size());
  const double energy_scale = cfg.lambda1 / B;
  const double decay_coeff = cfg.lambda2 / static_cast<double>(total_pairs);

  BatchResult res;
  double energy = 0.0;
  double amp = 0.0;
  for (const auto& s : batch) {
    const auto o = process(net, L, s, render, grad, energy_scale, decay_coeff, fault);
    res.levels.push_back(o.level);
    energy += (o.level - s.target_level) * (o.level - s.target_level);
    amp += o.amplitude_sum;
  }
  res.pair_count = total_pairs;
  res.mean_signal = amp / static_cast<double>(total_pairs);
  res.loss.energy = energy / B;
  res.loss.decay = res.mean_signal;
  res.loss.total = cfg.lambda1 * res.loss.energy + cfg.lambda2 * res.loss.decay;
  return res;
}

double predict_level(const MultipathNet& net, const propagation::LosPointSet& tx_set,
                     const propagation::LosPointSet& rx_set, double alpha_los,
                     const propagation::RenderConfig& render) {
  const PreparedSample s{&tx_set, &rx_set, alpha_los, 0.0};
  return process(net, detail::layout_of(net), s, render, nullptr, 0.0, 0.0, BackwardFault::kNone).level;
}

}  // namespace radiomap::mpnet
