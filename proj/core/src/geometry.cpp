#include "relux/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "relux/errors.hpp"

namespace relux {

namespace {

void require_nonzero(const Vec& v, const char* who) {
  if (v.size() == 0 || v.norm() == 0.0)
    throw InputError(std::string(who) + ": zero weight vector");
}

void require_sign(double s, const char* who) {
  if (s != 1.0 && s != -1.0)
    throw InputError(std::string(who) + ": sign must be +-1");
}

}  // namespace

bool is_close(const WeightBias& n1, const WeightBias& n2,
              const ClosenessParams& p) {
  require_nonzero(n1.v, "is_close");
  require_nonzero(n2.v, "is_close");
  // |sin|^2 <= delta^2 in cross form: exact multiples stay exactly parallel.
  const double norms_sq = n1.v.squaredNorm() * n2.v.squaredNorm();
  const double dot = n1.v.dot(n2.v);
  const double cross_sq = std::max(0.0, norms_sq - dot * dot);
  if (cross_sq > p.delta * p.delta * norms_sq) return false;
  const double lhs_sq = (n1.b * n2.v - n2.b * n1.v).squaredNorm();
  return lhs_sq <= p.alpha * p.alpha * norms_sq;
}

Orientation orientation(const std::vector<WeightBias>& neurons,
                        const ClosenessParams& p) {
  if (neurons.empty()) throw InputError("orientation: empty cluster");
  if (!(p.delta < M_SQRT1_2))
    throw InputError("orientation: requires delta < sqrt(2)/2");
  for (const WeightBias& n : neurons) require_nonzero(n.v, "orientation");

  Orientation o;
  const Vec& pivot = neurons.front().v;
  for (int i = 0; i < static_cast<int>(neurons.size()); ++i) {
    if (neurons[i].v.dot(pivot) >= 0.0)
      o.s1.push_back(i);
    else
      o.s2.push_back(i);
  }

  auto same_side = [&](const std::vector<int>& s) {
    for (size_t a = 0; a < s.size(); ++a)
      for (size_t b = a + 1; b < s.size(); ++b)
        if (neurons[s[a]].v.dot(neurons[s[b]].v) < 0.0) return false;
    return true;
  };
  if (!same_side(o.s1) || !same_side(o.s2))
    throw InconsistencyError(
        "orientation: within-class inner product negative; closeness "
        "hypothesis violated");
  for (int a : o.s1)
    for (int b : o.s2)
      if (neurons[a].v.dot(neurons[b].v) >= 0.0)
        throw InconsistencyError(
            "orientation: cross-class inner product nonnegative; closeness "
            "hypothesis violated");
  return o;
}

SignedNeuronTriple merge(const SignedNeuronTriple& t1,
                         const SignedNeuronTriple& t2, const WeightBias& ref) {
  require_nonzero(ref.v, "merge");
  require_sign(t1.s, "merge");
  require_sign(t2.s, "merge");
  const double ref_sq = ref.v.squaredNorm();
  const double d1 = t1.v.dot(ref.v);
  const double d2 = t2.v.dot(ref.v);
  if (d1 < 0.0 || d2 < 0.0)
    throw InputError("merge: operand on the wrong side of the reference");
  const double g = t1.s * (d1 / ref_sq) + t2.s * (d2 / ref_sq);
  const double sign = g < 0.0 ? -1.0 : 1.0;  // sign(0) is +1
  SignedNeuronTriple out;
  out.s = sign;
  out.v = std::abs(g) * ref.v;
  out.b = std::abs(g) * ref.b;
  return out;
}

Network CollapsedClump::to_network() const {
  Network net;
  net.dim = static_cast<int>(ref.v.size());
  Neuron plus;
  plus.sign = a_plus < 0.0 ? -1.0 : 1.0;
  plus.w = ref.v;
  plus.bias = ref.b;
  plus.coeff = a_plus;
  Neuron minus;
  minus.sign = a_minus < 0.0 ? -1.0 : 1.0;
  minus.w = -ref.v;
  minus.bias = -ref.b;
  minus.coeff = a_minus;
  net.neurons = {plus, minus};
  return net;
}

CollapsedClump collapse_clump(const std::vector<SignedNeuronTriple>& neurons,
                              const WeightBias& ref,
                              const ClosenessParams& p) {
  require_nonzero(ref.v, "collapse_clump");
  for (size_t i = 0; i < neurons.size(); ++i) {
    require_sign(neurons[i].s, "collapse_clump");
    if (!is_close({neurons[i].v, neurons[i].b}, ref, p)) {
      std::ostringstream os;
      os << "collapse_clump: neuron " << i << " is not (" << p.delta << ", "
         << p.alpha << ")-close to the reference";
      throw InputError(os.str());
    }
  }

  const WeightBias reflected{-ref.v, -ref.b};
  const double ref_sq = ref.v.squaredNorm();

  auto fold = [&](const WeightBias& side_ref,
                  const std::vector<const SignedNeuronTriple*>& side) {
    if (side.empty()) return 0.0;
    SignedNeuronTriple acc{side.front()->s, side.front()->v, side.front()->b};
    for (size_t i = 1; i < side.size(); ++i)
      acc = merge(acc, *side[i], side_ref);
    return acc.s * acc.v.dot(side_ref.v) / ref_sq;
  };

  std::vector<const SignedNeuronTriple*> plus_side, minus_side;
  for (const SignedNeuronTriple& n : neurons) {
    if (n.v.dot(ref.v) >= 0.0)
      plus_side.push_back(&n);
    else
      minus_side.push_back(&n);
  }

  CollapsedClump out;
  out.ref = ref;
  out.a_plus = fold(ref, plus_side);
  out.a_minus = fold(reflected, minus_side);
  return out;
}

Network AffineApprox::to_network(int dim) const {
  Network net;
  net.dim = dim;
  net.affine_w = w.size() == dim ? w : Vec::Zero(dim);
  net.affine_b = b;
  return net;
}

AffineApprox corner_case_affine(const std::vector<SignedNeuronTriple>& neurons,
                                const ClosenessParams& p) {
  if (neurons.empty()) throw InputError("corner_case_affine: empty cluster");
  std::vector<WeightBias> wb;
  wb.reserve(neurons.size());
  double radius = 0.0;
  for (const SignedNeuronTriple& n : neurons) {
    require_sign(n.s, "corner_case_affine");
    require_nonzero(n.v, "corner_case_affine");
    wb.push_back({n.v, n.b});
    radius = std::max(radius, n.v.norm());
  }
  for (size_t i = 0; i < wb.size(); ++i)
    for (size_t j = i + 1; j < wb.size(); ++j)
      if (!is_close(wb[i], wb[j], p)) {
        std::ostringstream os;
        os << "corner_case_affine: neurons " << i << " and " << j
           << " are not pairwise close";
        throw InputError(os.str());
      }

  const Orientation o = orientation(wb, p);
  const int dim = static_cast<int>(neurons.front().v.size());
  Vec combo = Vec::Zero(dim);
  for (int i : o.s1) combo += neurons[i].s * neurons[i].v;
  for (int i : o.s2) combo -= neurons[i].s * neurons[i].v;
  const double threshold = std::pow(p.delta * radius, 2.0 / 9.0);
  if (combo.norm() > threshold) {
    std::ostringstream os;
    os << "corner_case_affine: signed combination norm " << combo.norm()
       << " exceeds (delta R)^{2/9} = " << threshold;
    throw InputError(os.str());
  }

  AffineApprox out;
  out.w = Vec::Zero(dim);
  out.b = 0.0;
  for (int i : o.s1) {
    out.w += neurons[i].s * neurons[i].v;
    out.b += neurons[i].s * neurons[i].b;
  }
  return out;
}

}  // namespace relux
