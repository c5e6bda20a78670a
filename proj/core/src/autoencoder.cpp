#include "sindyae/autoencoder.hpp"

#include <sstream>

namespace sindyae {

namespace {

using Array = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Array sigmoid(const Matrix& x) { return (1.0 + (-x.array()).exp()).inverse(); }

void require_width(const Matrix& m, Eigen::Index width, const char* what) {
  if (m.cols() != width) {
    std::ostringstream msg;
    msg << what << ": expected width " << width << ", got " << m.cols();
    throw DimensionError(msg.str());
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream msg;
    msg << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
        << b.cols();
    throw DimensionError(msg.str());
  }
}

Jet linear_forward(const DenseLayer& layer, const Jet& in) {
  Jet out;
  out.order = in.order;
  out.value.noalias() = in.value * layer.weights;
  out.value.rowwise() += layer.bias;
  if (in.order >= 1) out.d1.noalias() = in.d1 * layer.weights;
  if (in.order >= 2) out.d2.noalias() = in.d2 * layer.weights;
  return out;
}

Jet sigmoid_forward(const Jet& pre) {
  Jet out;
  out.order = pre.order;
  const Array s = sigmoid(pre.value);
  out.value = s.matrix();
  if (pre.order >= 1) {
    const Array f1 = s * (1.0 - s);
    out.d1 = (f1 * pre.d1.array()).matrix();
    if (pre.order >= 2) {
      const Array f2 = f1 * (1.0 - 2.0 * s);
      out.d2 = (f2 * pre.d1.array().square() + f1 * pre.d2.array()).matrix();
    }
  }
  return out;
}

// Adjoint of the pre-activation jet given the adjoint of the activation jet.
Jet sigmoid_backward(const Jet& pre, const Jet& act, const Jet& adj) {
  Jet out;
  out.order = adj.order;
  const Array s = act.value.array();
  const Array f1 = s * (1.0 - s);
  Array g = adj.value.array() * f1;
  if (adj.order >= 1) {
    const Array f2 = f1 * (1.0 - 2.0 * s);
    const Array dl = pre.d1.array();
    g += adj.d1.array() * f2 * dl;
    Array gd1 = adj.d1.array() * f1;
    if (adj.order >= 2) {
      const Array f3 = f1 * (1.0 - 6.0 * s + 6.0 * s.square());
      g += adj.d2.array() * (f3 * dl.square() + f2 * pre.d2.array());
      gd1 += adj.d2.array() * 2.0 * f2 * dl;
      out.d2 = (adj.d2.array() * f1).matrix();
    }
    out.d1 = gd1.matrix();
  }
  out.value = g.matrix();
  return out;
}

void check_network(const Network& net, const char* what) {
  if (net.layers.empty()) throw DimensionError(std::string(what) + ": network has no layers");
}

double mean_squared_norm(const Matrix& diff) {
  return diff.rows() == 0 ? 0.0 : diff.squaredNorm() / static_cast<double>(diff.rows());
}

double l1_regularization(const Matrix& masked_xi) {
  const double count = static_cast<double>(masked_xi.size());
  return count == 0.0 ? 0.0 : masked_xi.cwiseAbs().sum() / count;
}

}  // namespace

Eigen::Index Network::input_width() const {
  return layers.empty() ? 0 : layers.front().weights.rows();
}

Eigen::Index Network::output_width() const {
  return layers.empty() ? 0 : layers.back().weights.cols();
}

std::vector<int> Network::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(static_cast<int>(layers.front().weights.rows()));
  for (const auto& layer : layers) w.push_back(static_cast<int>(layer.weights.cols()));
  return w;
}

std::size_t Network::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers)
    count += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  return count;
}

Network make_network(const std::vector<int>& widths) {
  if (widths.size() < 2) throw DimensionError("make_network: need at least input and output widths");
  Network net;
  for (std::size_t j = 0; j + 1 < widths.size(); ++j) {
    if (widths[j] < 1 || widths[j + 1] < 1)
      throw DimensionError("make_network: widths must be positive");
    net.layers.push_back({Matrix::Zero(widths[j], widths[j + 1]), RowVector::Zero(widths[j + 1])});
  }
  return net;
}

NetworkParams make_autoencoder(int input_dim, const std::vector<int>& encoder_widths,
                               int latent_dim, const std::vector<int>& decoder_widths) {
  std::vector<int> enc{input_dim};
  enc.insert(enc.end(), encoder_widths.begin(), encoder_widths.end());
  enc.push_back(latent_dim);
  std::vector<int> dec{latent_dim};
  dec.insert(dec.end(), decoder_widths.begin(), decoder_widths.end());
  dec.push_back(input_dim);
  return {make_network(enc), make_network(dec)};
}

ForwardTrace forward(const Network& net, Jet input) {
  check_network(net, "forward");
  require_width(input.value, net.input_width(), "forward input");
  if (input.order >= 1) require_same_shape(input.value, input.d1, "forward first derivative");
  if (input.order >= 2) require_same_shape(input.value, input.d2, "forward second derivative");

  ForwardTrace trace;
  trace.input = std::move(input);
  trace.layers.resize(net.layers.size());
  const Jet* current = &trace.input;
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    auto& lt = trace.layers[j];
    lt.pre = linear_forward(net.layers[j], *current);
    if (j + 1 < net.layers.size()) {
      lt.activation = sigmoid_forward(lt.pre);
      current = &lt.activation;
    }
  }
  trace.output = trace.layers.back().pre;
  return trace;
}

Jet backward(const Network& net, const ForwardTrace& trace, const Jet& output_adjoint,
             Network& grad, bool want_input_adjoint) {
  check_network(net, "backward");
  if (grad.layers.size() != net.layers.size())
    throw DimensionError("backward: gradient network shape mismatch");
  const int order = std::min(output_adjoint.order, trace.output.order);

  Jet adj = output_adjoint;
  adj.order = order;
  for (std::size_t jj = net.layers.size(); jj-- > 0;) {
    const auto& layer = net.layers[jj];
    auto& g = grad.layers[jj];
    const Jet& in = jj == 0 ? trace.input : trace.layers[jj - 1].activation;

    g.weights.noalias() += in.value.transpose() * adj.value;
    if (order >= 1) g.weights.noalias() += in.d1.transpose() * adj.d1;
    if (order >= 2) g.weights.noalias() += in.d2.transpose() * adj.d2;
    g.bias += adj.value.colwise().sum();

    if (jj == 0 && !want_input_adjoint) return {};

    Jet in_adj;
    in_adj.order = order;
    in_adj.value.noalias() = adj.value * layer.weights.transpose();
    if (order >= 1) in_adj.d1.noalias() = adj.d1 * layer.weights.transpose();
    if (order >= 2) in_adj.d2.noalias() = adj.d2 * layer.weights.transpose();
    if (jj == 0) return in_adj;

    const auto& prev = trace.layers[jj - 1];
    adj = sigmoid_backward(prev.pre, prev.activation, in_adj);
  }
  return {};
}

namespace {

EncodeResult run_single(const RowVector& input, const Network& net, const char* what) {
  if (!input.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
  Jet jet;
  jet.value = input;
  EncodeResult r;
  r.trace = forward(net, std::move(jet));
  r.output = r.trace.output.value.row(0);
  return r;
}

}  // namespace

EncodeResult encode(const RowVector& x, const NetworkParams& params) {
  return run_single(x, params.encoder, "encode");
}

EncodeResult decode(const RowVector& z, const NetworkParams& params) {
  return run_single(z, params.decoder, "decode");
}

RowVector propagate_dz(const RowVector& x, const RowVector& dx, const NetworkParams& params) {
  if (x.size() != dx.size()) throw DimensionError("propagate_dz: x and dx differ in length");
  Jet jet;
  jet.value = x;
  jet.d1 = dx;
  jet.order = 1;
  const auto trace = forward(params.encoder, std::move(jet));
  return trace.output.d1.row(0);
}

SecondDerivatives propagate_ddz(const RowVector& x, const RowVector& dx, const RowVector& ddx,
                                const NetworkParams& params) {
  if (x.size() != dx.size() || x.size() != ddx.size())
    throw DimensionError("propagate_ddz: x, dx and ddx differ in length");
  Jet jet;
  jet.value = x;
  jet.d1 = dx;
  jet.d2 = ddx;
  jet.order = 2;
  const auto trace = forward(params.encoder, std::move(jet));
  return {trace.output.d1.row(0), trace.output.d2.row(0)};
}

Gradients Gradients::zeros_like(const NetworkParams& params, const Matrix& xi) {
  Gradients g;
  g.encoder = make_network(params.encoder.widths());
  g.decoder = make_network(params.decoder.widths());
  g.xi = Matrix::Zero(xi.rows(), xi.cols());
  return g;
}

ModelForward forward_model(const BatchView& batch, const NetworkParams& params, const Matrix& xi,
                           const Matrix& mask, const Library& library) {
  const auto& spec = library.spec();
  const int order = spec.model_order;
  const Eigen::Index d = params.encoder.output_width();
  if (d != spec.state_dim) throw DimensionError("latent width differs from library state_dim");
  if (params.decoder.input_width() != d || params.decoder.output_width() != batch.x.cols())
    throw DimensionError("decoder shape does not match encoder/data");
  if (xi.rows() != library.size() || xi.cols() != d)
    throw DimensionError("Xi must be p x d");
  require_same_shape(xi, mask, "mask");
  require_same_shape(batch.x, batch.dx, "dx");
  if (order == 2) {
    if (batch.ddx == nullptr) throw std::invalid_argument("second-order model requires ddx");
    require_same_shape(batch.x, *batch.ddx, "ddx");
  }

  ModelForward f;
  Jet enc_in;
  enc_in.value = batch.x;
  enc_in.d1 = batch.dx;
  if (order == 2) enc_in.d2 = *batch.ddx;
  enc_in.order = order;
  f.encoder = forward(params.encoder, std::move(enc_in));
  const Jet& z = f.encoder.output;

  if (order == 1) {
    f.library_inputs = z.value;
    f.latent_target = z.d1;
    f.input_target = batch.dx;
  } else {
    f.library_inputs.resize(z.value.rows(), 2 * d);
    f.library_inputs << z.value, z.d1;
    f.latent_target = z.d2;
    f.input_target = *batch.ddx;
  }
  f.theta = library.evaluate(f.library_inputs);
  f.masked_xi = mask.cwiseProduct(xi);
  f.latent_prediction.noalias() = f.theta * f.masked_xi;

  Jet dec_in;
  dec_in.value = z.value;
  dec_in.order = order;
  if (order == 1) {
    dec_in.d1 = f.latent_prediction;
  } else {
    dec_in.d1 = z.d1;
    dec_in.d2 = f.latent_prediction;
  }
  f.decoder = forward(params.decoder, std::move(dec_in));
  f.input_prediction = order == 1 ? f.decoder.output.d1 : f.decoder.output.d2;
  return f;
}

namespace {

LossComponents components_of(const BatchView& batch, const ModelForward& f,
                             const LossWeights& w) {
  LossComponents c;
  c.recon = mean_squared_norm(batch.x - f.decoder.output.value);
  c.sindy_x = mean_squared_norm(f.input_target - f.input_prediction);
  c.sindy_z = mean_squared_norm(f.latent_target - f.latent_prediction);
  c.reg = l1_regularization(f.masked_xi);
  c.total = c.recon + w.sindy_x * c.sindy_x + w.sindy_z * c.sindy_z + w.reg * c.reg;
  return c;
}

}  // namespace

LossComponents composite_loss(const BatchView& batch, const NetworkParams& params,
                              const Matrix& xi, const Matrix& mask, const Library& library,
                              const LossWeights& weights) {
  const auto f = forward_model(batch, params, xi, mask, library);
  return components_of(batch, f, weights);
}

LossComponents loss_gradient(const BatchView& batch, const NetworkParams& params,
                             const Matrix& xi, const Matrix& mask, const Library& library,
                             const LossWeights& weights, Gradients& grads) {
  const auto f = forward_model(batch, params, xi, mask, library);
  const auto c = components_of(batch, f, weights);

  const int order = library.spec().model_order;
  const Eigen::Index m = batch.x.rows();
  const Eigen::Index d = params.encoder.output_width();
  const double scale = m == 0 ? 0.0 : 2.0 / static_cast<double>(m);

  // Decoder: reconstruction on the value stream, sindy_x on the top stream.
  Jet dec_adj;
  dec_adj.value = scale * (f.decoder.output.value - batch.x);
  dec_adj.order = 0;
  if (weights.sindy_x != 0.0) {
    const Matrix top = weights.sindy_x * scale * (f.input_prediction - f.input_target);
    dec_adj.order = order;
    if (order == 1) {
      dec_adj.d1 = top;
    } else {
      dec_adj.d1 = Matrix::Zero(m, batch.x.cols());
      dec_adj.d2 = top;
    }
  }
  const Jet dec_in_adj = backward(params.decoder, f.decoder, dec_adj, grads.decoder, true);

  // Adjoint of the SINDy prediction Theta (mask o Xi).
  Matrix pred_adj = Matrix::Zero(m, d);
  if (dec_in_adj.order >= order) pred_adj += order == 1 ? dec_in_adj.d1 : dec_in_adj.d2;
  const Matrix latent_residual = f.latent_prediction - f.latent_target;
  if (weights.sindy_z != 0.0) pred_adj += weights.sindy_z * scale * latent_residual;

  Matrix xi_grad = f.theta.transpose() * pred_adj;
  if (weights.reg != 0.0) {
    const double reg_scale = weights.reg / static_cast<double>(xi.size());
    xi_grad += reg_scale * xi.unaryExpr([](double v) {
      return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    });
  }
  grads.xi += mask.cwiseProduct(xi_grad);

  const Matrix theta_adj = pred_adj * f.masked_xi.transpose();
  const Matrix lib_in_adj = library.pullback(f.library_inputs, theta_adj);

  // Encoder output adjoint: z from decoder input and library, dz from the
  // library (order 2) and the latent SINDy residual.
  Jet enc_adj;
  enc_adj.value = dec_in_adj.value + lib_in_adj.leftCols(d);
  enc_adj.order = 0;
  if (order == 1) {
    if (weights.sindy_z != 0.0) {
      enc_adj.d1 = -weights.sindy_z * scale * latent_residual;
      enc_adj.order = 1;
    }
  } else {
    enc_adj.d1 = lib_in_adj.rightCols(d);
    if (dec_in_adj.order >= 1) enc_adj.d1 += dec_in_adj.d1;
    enc_adj.order = 1;
    if (weights.sindy_z != 0.0) {
      enc_adj.d2 = -weights.sindy_z * scale * latent_residual;
      enc_adj.order = 2;
    }
  }
  backward(params.encoder, f.encoder, enc_adj, grads.encoder, false);
  return c;
}

}  // namespace sindyae
