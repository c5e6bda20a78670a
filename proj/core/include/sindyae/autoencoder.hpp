#pragma once

#include <vector>

#include "sindyae/core_math.hpp"
#include "sindyae/library.hpp"

namespace sindyae {

struct DenseLayer {
  Matrix weights;  // in x out
  RowVector bias;  // out
};

/// Fully connected stack. Sigmoid on every layer except the last.
struct Network {
  std::vector<DenseLayer> layers;

  Eigen::Index input_width() const;
  Eigen::Index output_width() const;
  /// input, hidden..., output
  std::vector<int> widths() const;
  std::size_t parameter_count() const;
};

struct NetworkParams {
  Network encoder;
  Network decoder;

  std::size_t parameter_count() const {
    return encoder.parameter_count() + decoder.parameter_count();
  }
};

/// Zero-filled network with the given layer widths (input first, output last).
Network make_network(const std::vector<int>& widths);

/// Zero-filled encoder n -> encoder_widths -> d and decoder d -> decoder_widths -> n.
NetworkParams make_autoencoder(int input_dim, const std::vector<int>& encoder_widths,
                               int latent_dim, const std::vector<int>& decoder_widths);

/// A batch of samples (rows) together with up to two time derivatives.
/// `order` says how many derivative streams are meaningful.
struct Jet {
  Matrix value;
  Matrix d1;
  Matrix d2;
  int order = 0;
};

struct LayerTrace {
  Jet pre;         // l_j, dl_j/dt, d2l_j/dt2
  Jet activation;  // f(l_j) and its time derivatives; empty on the output layer
};

struct ForwardTrace {
  Jet input;
  std::vector<LayerTrace> layers;
  Jet output;
};

/// Forward pass of a batch, carrying time derivatives through each layer with
/// dl_0 = dx W_0, dl_j = (f'(l_{j-1}) o dl_{j-1}) W_j and the matching second
/// derivative recursion.
ForwardTrace forward(const Network& net, Jet input);

/// Reverse-mode pass. `output_adjoint.order` bounds the streams treated as
/// nonzero. Accumulates into `grad` (same shape as `net`) and returns the
/// adjoint with respect to the input jet when `want_input_adjoint` is set.
Jet backward(const Network& net, const ForwardTrace& trace, const Jet& output_adjoint,
             Network& grad, bool want_input_adjoint);

struct EncodeResult {
  RowVector output;
  ForwardTrace trace;
};

EncodeResult encode(const RowVector& x, const NetworkParams& params);
EncodeResult decode(const RowVector& z, const NetworkParams& params);

/// dz/dt for a single sample by forward-mode propagation through the encoder.
RowVector propagate_dz(const RowVector& x, const RowVector& dx, const NetworkParams& params);

struct SecondDerivatives {
  RowVector dz;
  RowVector ddz;
};
SecondDerivatives propagate_ddz(const RowVector& x, const RowVector& dx, const RowVector& ddx,
                                const NetworkParams& params);

// ---------------------------------------------------------------------------
// Composite loss
// ---------------------------------------------------------------------------

/// Non-owning view of a batch. `ddx` is required for second-order models.
struct BatchView {
  const Matrix& x;
  const Matrix& dx;
  const Matrix* ddx = nullptr;
};

/// Weights of the SINDy terms relative to the reconstruction loss.
struct LossWeights {
  double sindy_x = 0.0;  // lambda_1
  double sindy_z = 0.0;  // lambda_2
  double reg = 0.0;      // lambda_3
};

struct LossComponents {
  double total = 0.0;
  double recon = 0.0;
  double sindy_x = 0.0;
  double sindy_z = 0.0;
  double reg = 0.0;
};

struct Gradients {
  Network encoder;
  Network decoder;
  Matrix xi;

  static Gradients zeros_like(const NetworkParams& params, const Matrix& xi);
};

/// Everything the loss needs from one forward evaluation of the full model.
struct ModelForward {
  ForwardTrace encoder;
  ForwardTrace decoder;
  Matrix library_inputs;  // z, or (z, dz) for second-order models
  Matrix theta;
  Matrix masked_xi;
  Matrix latent_target;      // dz (or ddz) from the encoder
  Matrix latent_prediction;  // Theta (mask o Xi)
  Matrix input_target;       // dx (or ddx) from the data
  Matrix input_prediction;   // decoder tangent of the SINDy prediction
};

ModelForward forward_model(const BatchView& batch, const NetworkParams& params, const Matrix& xi,
                           const Matrix& mask, const Library& library);

LossComponents composite_loss(const BatchView& batch, const NetworkParams& params,
                              const Matrix& xi, const Matrix& mask, const Library& library,
                              const LossWeights& weights);

/// Loss and its exact gradient with respect to every network parameter and Xi.
/// Masked-out Xi entries receive zero gradient; the L1 subgradient at 0 is 0.
LossComponents loss_gradient(const BatchView& batch, const NetworkParams& params,
                             const Matrix& xi, const Matrix& mask, const Library& library,
                             const LossWeights& weights, Gradients& grads);

}  // namespace sindyae
