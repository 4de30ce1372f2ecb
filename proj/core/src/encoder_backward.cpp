#include <cmath>

#include "aif/encoder.hpp"
#include "aif/errors.hpp"
#include "encoder_internal.hpp"

namespace aif {
namespace {

// dY is the gradient at the layernorm output. Accumulates gain/bias
// gradients and returns the gradient at the layernorm input.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dY, const LayerNormTrace& t,
                                    const Eigen::VectorXd& gain,
                                    Eigen::VectorXd& dGain, Eigen::VectorXd& dBias) {
  const int n = static_cast<int>(dY.rows());
  const int d = static_cast<int>(dY.cols());
  Eigen::MatrixXd dX(n, d);
  for (int i = 0; i < n; ++i) {
    const Eigen::ArrayXd dy = dY.row(i).transpose().array();
    const Eigen::ArrayXd xhat = t.normalized.row(i).transpose().array();
    dGain.array() += dy * xhat;
    dBias.array() += dy;
    const Eigen::ArrayXd dxhat = dy * gain.array();
    const double m1 = dxhat.mean();
    const double m2 = (dxhat * xhat).mean();
    dX.row(i) = (t.inv_std(i) * (dxhat - m1 - xhat * m2)).matrix().transpose();
  }
  return dX;
}

}  // namespace

void encoder_backward(const ForwardTrace& trace, const std::vector<int>& tokens,
                      const std::vector<int>& segments,
                      const EncoderParameters& params, const EncoderConfig& config,
                      const RelativePositionTable* table,
                      const Eigen::MatrixXd& dHidden, Gradients& grads) {
  if (trace.layers.size() != params.layers.size()) {
    throw SchemaError("forward trace does not match parameter stack");
  }
  const int n = static_cast<int>(dHidden.rows());
  const int dk = config.d_k();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const Eigen::MatrixXd Arel = detail::relative_window(table, n, dk);

  Eigen::MatrixXd G = dHidden;
  for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
    const LayerTrace& t = trace.layers[l];
    const LayerParameters& lp = params.layers[l];
    LayerParameters& gl = grads.layers[l];

    const Eigen::MatrixXd dRes2 =
        layer_norm_backward(G, t.ln2, lp.ln2_gain, gl.ln2_gain, gl.ln2_bias);

    // res2 = norm1 + ffn(norm1); recover norm1 from the ln1 trace.
    Eigen::MatrixXd norm1 = t.ln1.normalized * lp.ln1_gain.asDiagonal();
    norm1.rowwise() += lp.ln1_bias.transpose();

    gl.W2 += t.ffn_hidden.transpose() * dRes2;
    gl.b2 += dRes2.colwise().sum().transpose();
    const Eigen::MatrixXd dPre =
        (dRes2 * lp.W2.transpose()).cwiseProduct((t.ffn_pre.array() > 0.0).cast<double>().matrix());
    gl.W1 += norm1.transpose() * dPre;
    gl.b1 += dPre.colwise().sum().transpose();

    const Eigen::MatrixXd dNorm1 = dRes2 + dPre * lp.W1.transpose();
    const Eigen::MatrixXd dRes1 =
        layer_norm_backward(dNorm1, t.ln1, lp.ln1_gain, gl.ln1_gain, gl.ln1_bias);

    // res1 = X + concat(heads) W_O.
    gl.W_O += t.attn_concat.transpose() * dRes1;
    const Eigen::MatrixXd dConcat = dRes1 * lp.W_O.transpose();

    Eigen::MatrixXd dQ = Eigen::MatrixXd::Zero(n, config.d_model);
    Eigen::MatrixXd dK = Eigen::MatrixXd::Zero(n, config.d_model);
    Eigen::MatrixXd dV = Eigen::MatrixXd::Zero(n, config.d_model);
    for (int h = 0; h < config.num_heads; ++h) {
      const auto Qh = t.Q.middleCols(h * dk, dk);
      const auto Kh = t.K.middleCols(h * dk, dk);
      const auto Vh = t.V.middleCols(h * dk, dk);
      const auto dOh = dConcat.middleCols(h * dk, dk);
      const Eigen::MatrixXd& P = t.attn_probs[h];

      dV.middleCols(h * dk, dk) = P.transpose() * dOh;

      // out_i = sum_j P_ij (v_j + alpha_{j-i}).
      Eigen::MatrixXd dP = dOh * Vh.transpose();
      for (int i = 0; i < n; ++i) {
        dP.row(i) += dOh.row(i) * Arel.middleRows(n - 1 - i, n).transpose();
      }

      // Softmax backward, then undo the 1/sqrt(d_k) score scaling.
      Eigen::MatrixXd dS(n, n);
      for (int i = 0; i < n; ++i) {
        const double inner = dP.row(i).dot(P.row(i));
        dS.row(i) = (P.row(i).array() * (dP.row(i).array() - inner)).matrix();
      }
      dS *= scale;

      Eigen::MatrixXd dQh = dS * Kh;
      for (int i = 0; i < n; ++i) {
        dQh.row(i) += dS.row(i) * Arel.middleRows(n - 1 - i, n);
      }
      dQ.middleCols(h * dk, dk) = dQh;
      dK.middleCols(h * dk, dk) = dS.transpose() * Qh;
    }

    gl.W_Q += t.input.transpose() * dQ;
    gl.W_K += t.input.transpose() * dK;
    gl.W_V += t.input.transpose() * dV;

    Eigen::MatrixXd dX = dRes1;
    dX += dQ * lp.W_Q.transpose();
    dX += dK * lp.W_K.transpose();
    dX += dV * lp.W_V.transpose();
    G = std::move(dX);
  }

  for (int p = 0; p < n; ++p) {
    grads.token_embed.row(tokens[p]) += G.row(p);
    grads.segment_embed.row(segments[p]) += G.row(p);
  }
}

}  // namespace aif
