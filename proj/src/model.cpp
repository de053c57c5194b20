#include "ptomo/model.hpp"

#include "ptomo/config.hpp"
#include "ptomo/error.hpp"

namespace ptomo {

NetworkConfig NetworkConfig::full(int input_dim) {
  NetworkConfig c;
  c.input_dim = input_dim;
  return c;
}

NetworkConfig NetworkConfig::half(int input_dim) {
  NetworkConfig c;
  c.input_dim = input_dim;
  c.seed_maps = 6;
  c.fc_width = c.seed_maps * c.seed_rows * c.seed_cols;
  c.n_upblocks = 2;
  c.out_rows = 100;
  c.out_cols = 60;
  return c;
}

NetworkConfig NetworkConfig::quarter(int input_dim) {
  NetworkConfig c;
  c.input_dim = input_dim;
  c.seed_maps = 4;
  c.fc_width = c.seed_maps * c.seed_rows * c.seed_cols;
  c.block_maps = 16;
  c.n_upblocks = 1;
  c.out_rows = 50;
  c.out_cols = 30;
  return c;
}

NetworkConfig NetworkConfig::for_scale(const std::string& scale, int input_dim) {
  if (scale == "full") return full(input_dim);
  if (scale == "half") return half(input_dim);
  if (scale == "quarter") return quarter(input_dim);
  throw ValidationError("unknown scale '" + scale + "' (expected quarter, half or full)");
}

void NetworkConfig::validate() const {
  require(input_dim >= 1, "network: input_dim must be >= 1");
  require(seed_maps >= 1 && seed_rows >= 1 && seed_cols >= 1, "network: seed dimensions must be >= 1");
  require(block_maps >= 1, "network: block_maps must be >= 1");
  require(n_upblocks >= 0 && n_upblocks <= 8, "network: n_upblocks must be in [0, 8]");
  require(kernel_size == 3, "network: only 3x3 kernels are supported");
  require(fc_width == seed_maps * seed_rows * seed_cols,
          "network: fc_width (" + std::to_string(fc_width) + ") must equal seed_maps*seed_rows*seed_cols (" +
              std::to_string(seed_maps * seed_rows * seed_cols) + ")");
  require(out_rows == (seed_rows << n_upblocks) && out_cols == (seed_cols << n_upblocks),
          "network: output " + std::to_string(out_rows) + "x" + std::to_string(out_cols) +
              " must equal seed size times 2^n_upblocks (" + std::to_string(seed_rows << n_upblocks) + "x" +
              std::to_string(seed_cols << n_upblocks) + ")");
}

NetworkConfig network_config_from(const KeyValueConfig& cfg, const NetworkConfig& base) {
  NetworkConfig c = base;
  c.input_dim = static_cast<int>(cfg.get_int("network.input_dim", c.input_dim));
  c.seed_maps = static_cast<int>(cfg.get_int("network.seed_maps", c.seed_maps));
  c.seed_rows = static_cast<int>(cfg.get_int("network.seed_rows", c.seed_rows));
  c.seed_cols = static_cast<int>(cfg.get_int("network.seed_cols", c.seed_cols));
  // fc_width follows the seed volume unless set explicitly.
  c.fc_width = static_cast<int>(cfg.get_int("network.fc_width", c.seed_maps * c.seed_rows * c.seed_cols));
  c.block_maps = static_cast<int>(cfg.get_int("network.block_maps", c.block_maps));
  c.n_upblocks = static_cast<int>(cfg.get_int("network.n_upblocks", c.n_upblocks));
  c.out_rows = static_cast<int>(cfg.get_int("network.out_rows", c.seed_rows << c.n_upblocks));
  c.out_cols = static_cast<int>(cfg.get_int("network.out_cols", c.seed_cols << c.n_upblocks));
  c.kernel_size = static_cast<int>(cfg.get_int("network.kernel_size", c.kernel_size));
  const auto mode = cfg.get_string("network.upsampling",
                                   c.upsampling == nn::Upsampling::Nearest ? "nearest" : "bilinear");
  if (mode == "nearest") {
    c.upsampling = nn::Upsampling::Nearest;
  } else if (mode == "bilinear") {
    c.upsampling = nn::Upsampling::Bilinear;
  } else {
    throw ValidationError("network.upsampling must be 'nearest' or 'bilinear'");
  }
  c.validate();
  return c;
}

void network_config_to(const NetworkConfig& n, KeyValueConfig& cfg) {
  cfg.set("network.input_dim", std::int64_t{n.input_dim});
  cfg.set("network.fc_width", std::int64_t{n.fc_width});
  cfg.set("network.seed_maps", std::int64_t{n.seed_maps});
  cfg.set("network.seed_rows", std::int64_t{n.seed_rows});
  cfg.set("network.seed_cols", std::int64_t{n.seed_cols});
  cfg.set("network.block_maps", std::int64_t{n.block_maps});
  cfg.set("network.n_upblocks", std::int64_t{n.n_upblocks});
  cfg.set("network.out_rows", std::int64_t{n.out_rows});
  cfg.set("network.out_cols", std::int64_t{n.out_cols});
  cfg.set("network.kernel_size", std::int64_t{n.kernel_size});
  cfg.set("network.upsampling", std::string(n.upsampling == nn::Upsampling::Nearest ? "nearest" : "bilinear"));
}

std::size_t fc2_parameter_count(const NetworkConfig& cfg) {
  const auto w = static_cast<std::size_t>(cfg.fc_width);
  return w * w + w;
}

// ---------------------------------------------------------------------------

template <typename T>
void Network<T>::allocate() {
  cfg_.validate();
  params_.clear();
  auto add = [&](std::string name, std::vector<std::size_t> wshape, std::size_t bias, std::size_t fan_in,
                 std::size_t fan_out) {
    params_.push_back({name + ".weight", nn::Tensor<T>(std::move(wshape)), {}, fan_in, fan_out});
    params_.push_back({name + ".bias", nn::Tensor<T>({bias}), {}, fan_in, fan_out});
  };
  const auto in = static_cast<std::size_t>(cfg_.input_dim);
  const auto fc = static_cast<std::size_t>(cfg_.fc_width);
  add("fc1", {in, fc}, fc, in, fc);
  add("fc2", {fc, fc}, fc, fc, fc);
  std::size_t maps = static_cast<std::size_t>(cfg_.seed_maps);
  const auto block = static_cast<std::size_t>(cfg_.block_maps);
  for (int b = 0; b < cfg_.n_upblocks; ++b) {
    const std::string prefix = "up" + std::to_string(b + 1);
    add(prefix + ".conv1", {block, maps, 3, 3}, block, maps * 9, block * 9);
    add(prefix + ".conv2", {block, block, 3, 3}, block, block * 9, block * 9);
    maps = block;
  }
  add("out.conv", {1, maps, 3, 3}, 1, maps * 9, 9);
}

template <typename T>
Network<T> Network<T>::build(const NetworkConfig& cfg, Rng& rng) {
  Network net(cfg);
  net.allocate();
  for (std::size_t i = 0; i < net.params_.size(); i += 2) {
    auto& w = net.params_[i];
    w.value = nn::glorot_uniform<T>(w.fan_in, w.fan_out, w.value.shape(), rng);
  }
  return net;
}

template <typename T>
Network<T> Network<T>::zeros(const NetworkConfig& cfg) {
  Network net(cfg);
  net.allocate();
  return net;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
nn::Tensor<T> Network<T>::run(const nn::Tensor<T>& input, std::vector<nn::Tensor<T>>* acts) const {
  if (input.rank() != 2 || input.dim(1) != static_cast<std::size_t>(cfg_.input_dim)) {
    throw ValidationError("network input must be B x " + std::to_string(cfg_.input_dim) + ", got " +
                          nn::shape_string(input.shape()));
  }
  const std::size_t batch = input.dim(0);
  nn::Tensor<T> a1;
  nn::fc_forward(input, weight(0).value, bias(0).value, a1);
  nn::relu_forward(a1);
  nn::Tensor<T> cur;
  nn::fc_forward(a1, weight(1).value, bias(1).value, cur);
  nn::relu_forward(cur);
  cur.reshape({batch, static_cast<std::size_t>(cfg_.seed_maps), static_cast<std::size_t>(cfg_.seed_rows),
               static_cast<std::size_t>(cfg_.seed_cols)});
  if (acts) {
    acts->clear();
    acts->push_back(std::move(a1));
    acts->push_back(cur);
  }

  for (int b = 0; b < cfg_.n_upblocks; ++b) {
    nn::Tensor<T> up;
    nn::upsample2x_forward(cur, up, cfg_.upsampling);
    if (up.dim(2) != 2 * cur.dim(2) || up.dim(3) != 2 * cur.dim(3)) {
      throw NumericError("upblock " + std::to_string(b + 1) + " did not double the feature map size");
    }
    nn::Tensor<T> c1;
    nn::conv2d_forward(up, weight(2 + 2 * b).value, bias(2 + 2 * b).value, c1);
    nn::relu_forward(c1);
    nn::conv2d_forward(c1, weight(3 + 2 * b).value, bias(3 + 2 * b).value, cur);
    nn::relu_forward(cur);
    if (acts) {
      acts->push_back(std::move(up));
      acts->push_back(std::move(c1));
      acts->push_back(cur);
    }
  }

  nn::Tensor<T> out;
  const int last = 2 + 2 * cfg_.n_upblocks;
  nn::conv2d_forward(cur, weight(last).value, bias(last).value, out);
  if (out.dim(1) != 1 || out.dim(2) != static_cast<std::size_t>(cfg_.out_rows) ||
      out.dim(3) != static_cast<std::size_t>(cfg_.out_cols)) {
    throw NumericError("network produced " + nn::shape_string(out.shape()) + ", expected 1x" +
                       std::to_string(cfg_.out_rows) + "x" + std::to_string(cfg_.out_cols));
  }
  return out;
}

template <typename T>
nn::Tensor<T> Network<T>::forward(const nn::Tensor<T>& input, bool keep_activations) {
  if (!keep_activations) return run(input, nullptr);
  auto out = run(input, &acts_);
  if (!out.all_finite()) throw NumericError("non-finite network output");
  input_ = input;
  return out;
}

template <typename T>
nn::Tensor<T> Network<T>::infer(const nn::Tensor<T>& input) const {
  return run(input, nullptr);
}

template <typename T>
void Network<T>::backward(const nn::Tensor<T>& grad_output, nn::Tensor<T>* input_grad) {
  if (acts_.empty()) throw ValidationError("backward called without a training forward pass");
  const std::size_t batch = input_.dim(0);
  nn::Tensor<T> g = grad_output;
  nn::Tensor<T> gx;

  const int last = 2 + 2 * cfg_.n_upblocks;
  nn::conv2d_backward(acts_.back(), weight(last).value, g, &gx, weight(last).grad, bias(last).grad);
  std::swap(g, gx);

  for (int b = cfg_.n_upblocks - 1; b >= 0; --b) {
    const auto base = 2 + 3 * static_cast<std::size_t>(b);
    const auto& up = acts_[base];
    const auto& c1 = acts_[base + 1];
    const auto& c2 = acts_[base + 2];
    nn::relu_backward(g, c2);
    nn::conv2d_backward(c1, weight(3 + 2 * b).value, g, &gx, weight(3 + 2 * b).grad, bias(3 + 2 * b).grad);
    std::swap(g, gx);
    nn::relu_backward(g, c1);
    nn::conv2d_backward(up, weight(2 + 2 * b).value, g, &gx, weight(2 + 2 * b).grad, bias(2 + 2 * b).grad);
    std::swap(g, gx);
    nn::upsample2x_backward(g, gx, cfg_.upsampling);
    std::swap(g, gx);
  }

  g.reshape({batch, static_cast<std::size_t>(cfg_.fc_width)});
  nn::relu_backward(g, acts_[1]);
  nn::fc_backward(acts_[0], weight(1).value, g, &gx, weight(1).grad, bias(1).grad);
  std::swap(g, gx);
  nn::relu_backward(g, acts_[0]);
  nn::fc_backward(input_, weight(0).value, g, input_grad, weight(0).grad, bias(0).grad);
}

template <typename T>
void Network<T>::sgd_step(T lr) {
  for (auto& p : params_) {
    if (p.grad.size() != p.value.size()) throw ValidationError("sgd_step before backward: " + p.name);
    nn::sgd_step<T>(p.value.span(), p.grad.span(), lr);
  }
}

template <typename T>
std::vector<nn::Tensor<T>> Network<T>::snapshot() const {
  std::vector<nn::Tensor<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

template <typename T>
void Network<T>::restore(const std::vector<nn::Tensor<T>>& values) {
  require(values.size() == params_.size(), "restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(values[i].shape() == params_[i].value.shape(), "restore: shape mismatch for " + params_[i].name);
    params_[i].value = values[i];
  }
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out(cfg_);
  out.allocate();
  for (std::size_t i = 0; i < params_.size(); ++i) out.params_[i].value = params_[i].value.template cast<U>();
  return out;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;

}  // namespace ptomo
