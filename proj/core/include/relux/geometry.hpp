#pragma once

#include <vector>

#include "relux/network.hpp"

namespace relux {

/// Angular / bias tolerances for neuron closeness.
struct ClosenessParams {
  double delta = 0.0;  // bound on |sin(angle)| between weight vectors
  double alpha = 0.0;  // bound on ||b v' - b' v|| / (||v|| ||v'||)
};

/// Weight-bias pair, the unit of the closeness calculus.
struct WeightBias {
  Vec v;
  double b = 0.0;
};

/// Signed operand of the merge operator.
struct SignedNeuronTriple {
  double s = 1.0;  // +-1
  Vec v;
  double b = 0.0;
};

/// True iff |sin(angle(v, v'))| <= delta and ||b v' - b' v|| <=
/// alpha ||v|| ||v'||.  Both sides evaluated exactly, no fuzz factor;
/// callers widen the parameters instead.
bool is_close(const WeightBias& n1, const WeightBias& n2,
              const ClosenessParams& p);

/// Bipartition of a pairwise-close cluster into mutually correlated halves.
struct Orientation {
  std::vector<int> s1;  // contains index 0; <v_i, v_1> >= 0
  std::vector<int> s2;
};

/// Splits by sign of <v_i, v_1> and verifies the polarization property
/// (within-set inner products nonnegative, cross-set negative); throws
/// InconsistencyError when verification fails, which signals that the
/// closeness hypothesis did not actually hold.  Requires delta < sqrt(2)/2.
Orientation orientation(const std::vector<WeightBias>& neurons,
                        const ClosenessParams& p);

/// Merge of two signed neurons on the reference's side: with gamma_j =
/// <v_j, ref.v> / ||ref.v||^2 and g = s1 gamma_1 + s2 gamma_2, returns
/// (sign(g), |g| ref.v, |g| ref.b); sign(0) is +1.  Associative and
/// commutative.  Requires <v_j, ref.v> >= 0 for both operands.
SignedNeuronTriple merge(const SignedNeuronTriple& t1,
                         const SignedNeuronTriple& t2, const WeightBias& ref);

/// Result of collapsing a clump onto a reference neuron: the two-neuron
/// surrogate a_plus * relu(<v*, x> - b*) + a_minus * relu(-<v*, x> + b*).
struct CollapsedClump {
  double a_plus = 0.0;
  double a_minus = 0.0;
  WeightBias ref;

  /// Materialize the surrogate as a Network (output weights a_plus/a_minus).
  Network to_network() const;
};

/// Folds the neurons on each side of ref with `merge`.  Every neuron must
/// be (delta, alpha)-close to ref (throws InputError otherwise).
CollapsedClump collapse_clump(const std::vector<SignedNeuronTriple>& neurons,
                              const WeightBias& ref, const ClosenessParams& p);

/// Affine surrogate for a pairwise-close clump whose signed weight
/// combination nearly cancels: l(x) = <w*, x> - b* built from the first
/// orientation class.  Preconditions: all pairs close, and the signed
/// combination has norm <= (delta * R)^{2/9}.
struct AffineApprox {
  Vec w;
  double b = 0.0;

  Network to_network(int dim) const;
};

AffineApprox corner_case_affine(const std::vector<SignedNeuronTriple>& neurons,
                                const ClosenessParams& p);

}  // namespace relux
