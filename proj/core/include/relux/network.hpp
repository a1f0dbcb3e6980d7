#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace relux {

using Vec = Eigen::VectorXd;

/// One hidden unit: sign * relu(<w, x> - b), optionally with an output-layer
/// weight `coeff` replacing the +-1 sign (learned hypotheses use this; hand
/// built targets leave it unset).
struct Neuron {
  double sign = 1.0;  // +-1
  Vec w;
  double bias = 0.0;
  std::optional<double> coeff;

  double output_weight() const { return coeff.value_or(sign); }
};

/// One-hidden-layer ReLU network with an optional affine tail:
///   F(x) = sum_i c_i * relu(<w_i, x> - b_i) + <affine_w, x> - affine_b.
struct Network {
  int dim = 0;
  std::vector<Neuron> neurons;
  std::optional<Vec> affine_w;
  std::optional<double> affine_b;

  static Network empty(int dim);

  int size() const { return static_cast<int>(neurons.size()); }

  /// max_i ||w_i||; 0 for an empty network.
  double weight_radius() const;
  /// max_i |b_i|; 0 for an empty network.
  double bias_radius() const;

  /// Throws InputError if any invariant is violated (sign not +-1,
  /// dimension mismatch, non-finite entry).
  void validate() const;
};

double evaluate(const Network& net, const Vec& x);

/// Random line t -> x0 + t*v with Gaussian base point and unit direction.
struct GaussianLine {
  Vec x0;
  Vec v;
  uint64_t seed = 0;

  Vec point_at(double t) const { return x0 + t * v; }
  int dim() const { return static_cast<int>(x0.size()); }
};

/// Univariate view of a network along a line.  Precomputes per-neuron
/// offsets and slopes so evaluation is O(k).
class LineRestriction {
 public:
  LineRestriction(const Network& net, const GaussianLine& line);

  double operator()(double t) const;

  /// Slope contribution <w_i, v> of each neuron.
  const std::vector<double>& neuron_slopes() const { return slope_; }
  /// Offset <w_i, x0> - b_i of each neuron.
  const std::vector<double>& neuron_offsets() const { return offset_; }

 private:
  std::vector<double> offset_;
  std::vector<double> slope_;
  std::vector<double> weight_;
  double affine_offset_ = 0.0;
  double affine_slope_ = 0.0;
};

struct CriticalPoint {
  double t = 0.0;
  int neuron_index = 0;
};

struct CriticalPointResult {
  std::vector<CriticalPoint> points;  // sorted ascending by t
  std::vector<int> skipped;           // neurons nearly perpendicular to v
};

/// Positions where the restriction's slope changes: t = -(<w_i,x0> - b_i) /
/// <w_i,v> per neuron.  Neurons with |<w_i,v>| <= 1e-14 * ||w_i|| divide by
/// ~zero and are reported in `skipped` instead.
CriticalPointResult critical_points(const Network& net,
                                    const GaussianLine& line);

}  // namespace relux
