#include "tdgfn/nn.hpp"

#include <cmath>

#include "json.hpp"
#include "tdgfn/rng.hpp"

namespace tdgfn {

namespace {

void check_spec(const MlpSpec& spec) {
  if (spec.layers.size() < 2)
    throw ContractViolation("MlpSpec needs at least input and output sizes");
  for (int s : spec.layers)
    if (s <= 0) throw ContractViolation("MlpSpec layer sizes must be positive");
}

}  // namespace

void Mlp::build_offsets() {
  offsets_.clear();
  std::int64_t off = 0;
  for (int l = 0; l < layer_count(); ++l) {
    const std::int64_t in = spec_.layers[l];
    const std::int64_t out = spec_.layers[l + 1];
    offsets_.push_back(off);
    off += in * out;
    offsets_.push_back(off);
    off += out;
  }
  offsets_.push_back(off);
}

Mlp::Mlp(MlpSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), init_seed_(seed) {
  check_spec(spec_);
  build_offsets();
  params_ = Eigen::VectorXd::Zero(offsets_.back());
  Rng rng(seed);
  for (int l = 0; l < layer_count(); ++l) {
    const int in = spec_.layers[l];
    const int out = spec_.layers[l + 1];
    const double a = std::sqrt(6.0 / (in + out));
    double* w = params_.data() + weight_offset(l);
    for (std::int64_t i = 0; i < std::int64_t(in) * out; ++i)
      w[i] = (2.0 * rng.uniform01() - 1.0) * a;
  }
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int layer) const {
  return {params_.data() + weight_offset(layer), spec_.layers[layer + 1],
          spec_.layers[layer]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(int layer) const {
  return {params_.data() + bias_offset(layer), spec_.layers[layer + 1]};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Cache cache;
  return forward(x, cache);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache& cache) const {
  if (x.rows() != input_dim())
    throw ContractViolation("Mlp::forward: input dimension mismatch");
  cache.acts.clear();
  cache.acts.reserve(layer_count() + 1);
  cache.acts.push_back(x);
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd z = (weight(l) * cache.acts.back()).colwise() + bias(l);
    if (l + 1 < layer_count())
      z = z.array().max(z.array() * spec_.leak);  // leaky rectifier
    cache.acts.push_back(std::move(z));
  }
  return cache.acts.back();
}

Eigen::VectorXd Mlp::forward1(const Eigen::VectorXd& x) const {
  return forward(Eigen::MatrixXd(x)).col(0);
}

Eigen::VectorXd Mlp::backward(const Cache& cache,
                              const Eigen::MatrixXd& out_grad) const {
  if (cache.acts.size() != static_cast<std::size_t>(layer_count()) + 1)
    throw ContractViolation("Mlp::backward: cache does not match network");
  if (out_grad.rows() != output_dim() ||
      out_grad.cols() != cache.acts[0].cols())
    throw ContractViolation("Mlp::backward: gradient shape mismatch");

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(param_count());
  Eigen::MatrixXd delta = out_grad;
  for (int l = layer_count() - 1; l >= 0; --l) {
    const int in = spec_.layers[l];
    const int out = spec_.layers[l + 1];
    Eigen::Map<Eigen::MatrixXd> dw(grad.data() + weight_offset(l), out, in);
    Eigen::Map<Eigen::VectorXd> db(grad.data() + bias_offset(l), out);
    dw.noalias() = delta * cache.acts[l].transpose();
    db = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd prev = weight(l).transpose() * delta;
      // acts[l] holds the rectified output of layer l-1 (< layer_count).
      prev = (cache.acts[l].array() > 0.0)
                 .select(prev, prev * spec_.leak);
      delta = std::move(prev);
    }
  }
  return grad;
}

void Adam::update(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != m.size() || grad.size() != m.size())
    throw ContractViolation("Adam::update: size mismatch");
  if (!grad.allFinite())
    throw NumericFault("Adam::update: non-finite gradient");
  ++step;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  params.array() -=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

Eigen::VectorXd softmax_masked(const Eigen::VectorXd& logits,
                               const std::vector<char>& mask) {
  if (static_cast<std::int64_t>(mask.size()) != logits.size())
    throw ContractViolation("softmax_masked: mask length mismatch");
  double hi = -std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < logits.size(); ++i)
    if (mask[i] && logits[i] > hi) hi = logits[i];
  if (hi == -std::numeric_limits<double>::infinity())
    throw ContractViolation("softmax_masked: empty mask");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(logits.size());
  double total = 0.0;
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    p[i] = std::exp(logits[i] - hi);
    total += p[i];
  }
  p /= total;
  return p;
}

double entropy(const Eigen::VectorXd& probs) {
  double h = 0.0;
  for (std::int64_t i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  return h;
}

std::string Mlp::to_json() const {
  nlohmann::json j;
  j["format"] = "tdgfn-mlp-v1";
  j["layers"] = spec_.layers;
  j["leak"] = spec_.leak;
  j["seed"] = init_seed_;
  j["params"] = std::vector<double>(params_.data(),
                                    params_.data() + params_.size());
  return j.dump();
}

Mlp Mlp::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "tdgfn-mlp-v1")
    throw ConfigError("checkpoint: unknown format tag");
  MlpSpec spec;
  spec.layers = j.at("layers").get<std::vector<int>>();
  spec.leak = j.at("leak").get<double>();
  check_spec(spec);
  Mlp net;
  net.spec_ = spec;
  net.init_seed_ = j.value("seed", std::uint64_t(0));
  net.build_offsets();
  auto values = j.at("params").get<std::vector<double>>();
  if (static_cast<std::int64_t>(values.size()) != net.offsets_.back())
    throw ConfigError("checkpoint: parameter count mismatch");
  net.params_ =
      Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
  return net;
}

}  // namespace tdgfn
