#include "relux/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "relux/errors.hpp"

namespace relux {

namespace {
constexpr double kPerpendicularThreshold = 1e-14;

double relu(double z) { return z > 0.0 ? z : 0.0; }
}  // namespace

Network Network::empty(int dim) {
  Network net;
  net.dim = dim;
  return net;
}

double Network::weight_radius() const {
  double r = 0.0;
  for (const Neuron& n : neurons) r = std::max(r, n.w.norm());
  return r;
}

double Network::bias_radius() const {
  double b = 0.0;
  for (const Neuron& n : neurons) b = std::max(b, std::abs(n.bias));
  return b;
}

void Network::validate() const {
  if (dim < 1) throw InputError("network dimension must be >= 1");
  for (size_t i = 0; i < neurons.size(); ++i) {
    const Neuron& n = neurons[i];
    if (n.sign != 1.0 && n.sign != -1.0) {
      std::ostringstream os;
      os << "neuron " << i << ": sign must be +-1, got " << n.sign;
      throw InputError(os.str());
    }
    if (n.w.size() != dim) {
      std::ostringstream os;
      os << "neuron " << i << ": weight dimension " << n.w.size()
         << " != network dimension " << dim;
      throw InputError(os.str());
    }
    if (!n.w.allFinite() || !std::isfinite(n.bias)) {
      std::ostringstream os;
      os << "neuron " << i << ": non-finite parameter";
      throw InputError(os.str());
    }
    if (n.coeff && !std::isfinite(*n.coeff)) {
      std::ostringstream os;
      os << "neuron " << i << ": non-finite output weight";
      throw InputError(os.str());
    }
  }
  if (affine_w) {
    if (affine_w->size() != dim)
      throw InputError("affine weight dimension != network dimension");
    if (!affine_w->allFinite()) throw InputError("non-finite affine weight");
  }
  if (affine_b && !std::isfinite(*affine_b))
    throw InputError("non-finite affine bias");
}

double evaluate(const Network& net, const Vec& x) {
  if (x.size() != net.dim) {
    std::ostringstream os;
    os << "evaluate: input dimension " << x.size() << " != network dimension "
       << net.dim;
    throw InputError(os.str());
  }
  double y = 0.0;
  for (const Neuron& n : net.neurons)
    y += n.output_weight() * relu(n.w.dot(x) - n.bias);
  if (net.affine_w) y += net.affine_w->dot(x);
  if (net.affine_b) y -= *net.affine_b;
  return y;
}

LineRestriction::LineRestriction(const Network& net, const GaussianLine& line) {
  if (line.dim() != net.dim || line.v.size() != net.dim)
    throw InputError("restrict: line dimension != network dimension");
  const int k = net.size();
  offset_.reserve(k);
  slope_.reserve(k);
  weight_.reserve(k);
  for (const Neuron& n : net.neurons) {
    offset_.push_back(n.w.dot(line.x0) - n.bias);
    slope_.push_back(n.w.dot(line.v));
    weight_.push_back(n.output_weight());
  }
  if (net.affine_w) {
    affine_offset_ = net.affine_w->dot(line.x0);
    affine_slope_ = net.affine_w->dot(line.v);
  }
  if (net.affine_b) affine_offset_ -= *net.affine_b;
}

double LineRestriction::operator()(double t) const {
  double y = affine_offset_ + t * affine_slope_;
  for (size_t i = 0; i < offset_.size(); ++i)
    y += weight_[i] * relu(offset_[i] + t * slope_[i]);
  return y;
}

CriticalPointResult critical_points(const Network& net,
                                    const GaussianLine& line) {
  if (line.dim() != net.dim)
    throw InputError("critical_points: line dimension != network dimension");
  CriticalPointResult result;
  for (int i = 0; i < net.size(); ++i) {
    const Neuron& n = net.neurons[i];
    const double g = n.w.dot(line.v);
    if (std::abs(g) <= kPerpendicularThreshold * n.w.norm()) {
      result.skipped.push_back(i);
      continue;
    }
    const double t = -(n.w.dot(line.x0) - n.bias) / g;
    result.points.push_back({t, i});
  }
  std::sort(result.points.begin(), result.points.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) {
              return a.t < b.t;
            });
  return result;
}

}  // namespace relux
