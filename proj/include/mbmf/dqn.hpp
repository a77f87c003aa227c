#pragma once

// Small fully connected Q-network with experience replay, trained by plain
// SGD on the squared TD error. Rectifier hidden layers, linear output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbmf/errors.hpp"
#include "mbmf/policy.hpp"
#include "mbmf/random.hpp"
#include "mbmf/world.hpp"

namespace mbmf {

struct DqnParams {
  std::size_t hidden = 76;
  std::size_t hidden_layers = 2;
  double alpha = 0.1;
  double gamma = 0.95;
  double tau = 0.05;
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 10000;
  // 0 disables the target network.
  std::size_t target_sync_period = 0;
};

inline void validate(const DqnParams& p) {
  if (p.hidden == 0) throw ParameterError("dqn.hidden must be positive");
  if (!(p.alpha > 0.0)) throw ParameterError("dqn.alpha must be positive");
  if (!(p.gamma >= 0.0 && p.gamma < 1.0)) throw ParameterError("dqn.gamma must lie in [0, 1)");
  if (!(p.tau > 0.0)) throw ParameterError("dqn.tau must be positive");
  if (p.batch_size == 0) throw ParameterError("dqn.batch_size must be positive");
  if (p.buffer_capacity < p.batch_size) throw ParameterError("dqn.buffer_capacity must be >= batch_size");
}

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

class Mlp {
 public:
  Mlp() = default;

  // Zero-initialized network with the given layer widths, input first.
  explicit Mlp(std::span<const std::size_t> widths) {
    if (widths.size() < 2) throw InputError("Mlp: need at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      if (widths[i] == 0 || widths[i + 1] == 0) throw InputError("Mlp: zero-width layer");
      layers_.push_back({widths[i], widths[i + 1], std::vector<double>(widths[i] * widths[i + 1], 0.0),
                         std::vector<double>(widths[i + 1], 0.0)});
    }
  }

  static Mlp glorot(std::span<const std::size_t> widths, Rng& rng) {
    Mlp net(widths);
    for (auto& layer : net.layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
      for (double& w : layer.weights) w = (2.0 * rng.uniform() - 1.0) * limit;
    }
    return net;
  }

  std::size_t input_size() const { return layers_.front().in; }
  std::size_t output_size() const { return layers_.back().out; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  // Activations of every layer, input first; hidden entries are post-rectifier.
  std::vector<std::vector<double>> forward_all(std::span<const double> x) const {
    if (x.size() != input_size()) throw InputError("Mlp: input size mismatch");
    std::vector<std::vector<double>> acts;
    acts.emplace_back(x.begin(), x.end());
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const auto& l = layers_[li];
      const auto& in = acts.back();
      std::vector<double> z(l.bias);
      for (std::size_t o = 0; o < l.out; ++o) {
        const double* w = l.weights.data() + o * l.in;
        double acc = 0.0;
        for (std::size_t i = 0; i < l.in; ++i) acc += w[i] * in[i];
        z[o] += acc;
      }
      if (li + 1 < layers_.size())
        for (double& v : z) v = std::max(v, 0.0);
      acts.push_back(std::move(z));
    }
    return acts;
  }

  ValueVector forward(std::span<const double> x) const { return forward_all(x).back(); }

  // Accumulates into grads (same shapes as layers) the gradient of a loss
  // whose derivative with respect to the output is d_out.
  void backward(const std::vector<std::vector<double>>& acts, std::vector<double> d_out,
                std::vector<DenseLayer>& grads) const {
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& l = layers_[li];
      auto& g = grads[li];
      const auto& in = acts[li];
      std::vector<double> d_in(l.in, 0.0);
      for (std::size_t o = 0; o < l.out; ++o) {
        const double d = d_out[o];
        if (d == 0.0) continue;
        g.bias[o] += d;
        const double* w = l.weights.data() + o * l.in;
        double* gw = g.weights.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) {
          gw[i] += d * in[i];
          d_in[i] += d * w[i];
        }
      }
      if (li > 0) {
        // Rectifier derivative, read from the post-activation value.
        for (std::size_t i = 0; i < l.in; ++i)
          if (in[i] <= 0.0) d_in[i] = 0.0;
      }
      d_out = std::move(d_in);
    }
  }

  std::vector<DenseLayer> zero_grads() const {
    std::vector<DenseLayer> g;
    for (const auto& l : layers_)
      g.push_back({l.in, l.out, std::vector<double>(l.weights.size(), 0.0), std::vector<double>(l.bias.size(), 0.0)});
    return g;
  }

  void apply(const std::vector<DenseLayer>& grads, double step) {
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      for (std::size_t k = 0; k < layers_[li].weights.size(); ++k) layers_[li].weights[k] -= step * grads[li].weights[k];
      for (std::size_t k = 0; k < layers_[li].bias.size(); ++k) layers_[li].bias[k] -= step * grads[li].bias[k];
    }
  }

  bool finite() const {
    for (const auto& l : layers_) {
      for (double w : l.weights)
        if (!std::isfinite(w)) return false;
      for (double b : l.bias)
        if (!std::isfinite(b)) return false;
    }
    return true;
  }

  // {"layers": [{"in": 38, "out": 76, "weights": [...row-major...], "bias": [...]}, ...]}
  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& l : layers_) arr.push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
    return {{"layers", arr}};
  }

  static Mlp from_json(const nlohmann::json& j) {
    Mlp net;
    if (!j.contains("layers") || !j.at("layers").is_array()) throw ParseError("missing field 'layers'");
    for (const auto& item : j.at("layers")) {
      DenseLayer l;
      try {
        l.in = item.at("in").get<std::size_t>();
        l.out = item.at("out").get<std::size_t>();
        l.weights = item.at("weights").get<std::vector<double>>();
        l.bias = item.at("bias").get<std::vector<double>>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("layers: ") + e.what());
      }
      if (l.weights.size() != l.in * l.out || l.bias.size() != l.out) throw ParseError("layers: shape mismatch");
      if (!net.layers_.empty() && net.layers_.back().out != l.in) throw ParseError("layers: consecutive widths disagree");
      net.layers_.push_back(std::move(l));
    }
    if (net.layers_.empty()) throw ParseError("layers: empty network");
    return net;
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

struct Transition {
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
  StateId next_state = 0;
  bool reset = false;
  friend bool operator==(const Transition&, const Transition&) = default;
};

// Fixed-capacity FIFO with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ParameterError("replay capacity must be positive");
    data_.reserve(capacity);
  }

  void push(const Transition& t) {
    if (data_.size() < capacity_) {
      data_.push_back(t);
    } else {
      data_[head_] = t;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const noexcept { return data_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }

  // Contents, oldest first.
  std::vector<Transition> contents() const {
    std::vector<Transition> out;
    for (std::size_t i = 0; i < data_.size(); ++i) out.push_back(data_[(head_ + i) % data_.size()]);
    return out;
  }

  const Transition& sample(Rng& rng) const { return data_[rng.below(data_.size())]; }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

inline std::vector<double> one_hot_state(StateId s, std::size_t num_states) {
  if (s >= num_states) throw InputError("state id " + std::to_string(s) + " out of range");
  std::vector<double> x(num_states, 0.0);
  x[s] = 1.0;
  return x;
}

class DqnAgent {
 public:
  DqnAgent(std::size_t num_states, std::size_t num_actions, DqnParams params, Rng& init_rng)
      : params_(params), num_states_(num_states), buffer_(params.buffer_capacity) {
    validate(params_);
    std::vector<std::size_t> widths{num_states};
    for (std::size_t i = 0; i < params_.hidden_layers; ++i) widths.push_back(params_.hidden);
    widths.push_back(num_actions);
    net_ = Mlp::glorot(widths, init_rng);
    if (params_.target_sync_period > 0) target_ = net_;
  }

  ValueVector values(StateId s) const { return net_.forward(one_hot_state(s, num_states_)); }

  Decision act(StateId s, Rng& rng) const { return softmax_decide(values(s), params_.tau, rng); }

  void remember(const Transition& t) { buffer_.push(t); }

  // One SGD step on a uniformly sampled batch; nullopt when the buffer holds
  // fewer than batch_size transitions.
  std::optional<double> train_step(Rng& rng) {
    if (buffer_.size() < params_.batch_size) return std::nullopt;
    const Mlp& bootstrap = target_ ? *target_ : net_;
    auto grads = net_.zero_grads();
    double loss = 0.0;
    for (std::size_t b = 0; b < params_.batch_size; ++b) {
      const Transition& t = buffer_.sample(rng);
      double target = t.reward;
      if (!t.reset) {
        const auto next = bootstrap.forward(one_hot_state(t.next_state, num_states_));
        target += params_.gamma * *std::max_element(next.begin(), next.end());
      }
      const auto acts = net_.forward_all(one_hot_state(t.state, num_states_));
      const double err = acts.back()[t.action] - target;
      loss += 0.5 * err * err;
      std::vector<double> d_out(net_.output_size(), 0.0);
      d_out[t.action] = err / static_cast<double>(params_.batch_size);
      net_.backward(acts, std::move(d_out), grads);
    }
    net_.apply(grads, params_.alpha);
    ++train_steps_;
    if (target_ && train_steps_ % params_.target_sync_period == 0) target_ = net_;
    return loss / static_cast<double>(params_.batch_size);
  }

  const Mlp& network() const noexcept { return net_; }
  Mlp& network() noexcept { return net_; }
  const ReplayBuffer& buffer() const noexcept { return buffer_; }
  const DqnParams& params() const noexcept { return params_; }

  void save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << net_.to_json().dump() << '\n';
  }

  void load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    Mlp net;
    try {
      net = Mlp::from_json(nlohmann::json::parse(buf.str()));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed checkpoint: ") + e.what());
    }
    if (net.input_size() != net_.input_size() || net.output_size() != net_.output_size())
      throw ValidationError("checkpoint shape does not match the agent");
    net_ = std::move(net);
    if (target_) target_ = net_;
  }

 private:
  DqnParams params_;
  std::size_t num_states_;
  Mlp net_;
  std::optional<Mlp> target_;
  ReplayBuffer buffer_;
  std::uint64_t train_steps_ = 0;
};

}  // namespace mbmf
