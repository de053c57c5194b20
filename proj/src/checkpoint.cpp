#include "ptomo/checkpoint.hpp"

#include "ptomo/binio.hpp"
#include "ptomo/error.hpp"

namespace ptomo {

Checkpoint Checkpoint::from_network(const Network<float>& net) {
  Checkpoint ck;
  ck.network = net.config();
  ck.parameters = net.snapshot();
  return ck;
}

Network<float> Checkpoint::network_instance() const {
  auto net = Network<float>::zeros(network);
  net.restore(parameters);
  return net;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  binio::Writer w;
  w.magic("PTCK");
  w.u32(kCheckpointVersion);
  const auto& n = network;
  for (int v : {n.input_dim, n.fc_width, n.seed_maps, n.seed_rows, n.seed_cols, n.block_maps, n.n_upblocks,
                n.out_rows, n.out_cols, n.kernel_size}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(static_cast<std::uint32_t>(n.upsampling));
  w.u32(static_cast<std::uint32_t>(parameters.size()));
  for (const auto& p : parameters) {
    w.u32(static_cast<std::uint32_t>(p.rank()));
    for (auto d : p.shape()) w.u64(d);
    w.u64(p.size());
    w.f32_array(p.span());
  }
  pca.serialize(w);
  w.u64(training_seed);
  w.f64(best_val_loss);
  w.u32(static_cast<std::uint32_t>(best_epoch));
  w.u64(dataset_hash);
  w.u32(static_cast<std::uint32_t>(active_width));
  w.u32(static_cast<std::uint32_t>(active_height));
  return w.take();
}

Checkpoint Checkpoint::deserialize(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes, "checkpoint");
  r.expect_magic("PTCK");
  const auto version = r.u32();
  require(version == kCheckpointVersion, "checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  auto& n = ck.network;
  for (int* v : {&n.input_dim, &n.fc_width, &n.seed_maps, &n.seed_rows, &n.seed_cols, &n.block_maps,
                 &n.n_upblocks, &n.out_rows, &n.out_cols, &n.kernel_size}) {
    *v = static_cast<int>(r.u32());
  }
  const auto up = r.u32();
  require(up <= 1, "checkpoint: unknown upsampling mode");
  n.upsampling = static_cast<nn::Upsampling>(up);
  n.validate();

  // Shapes must match a freshly laid-out network of this configuration.
  const auto layout = Network<float>::zeros(n);
  const auto count = r.u32();
  require(count == layout.parameters().size(), "checkpoint: parameter tensor count mismatch");
  for (const auto& expected : layout.parameters()) {
    const auto rank = r.u32();
    require(rank <= 8, "checkpoint: bad tensor rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.u64();
    require(shape == expected.value.shape(), "checkpoint: shape mismatch for " + expected.name);
    const auto size = r.u64();
    require(size == expected.value.size(), "checkpoint: value count mismatch for " + expected.name);
    nn::Tensor<float> t(shape);
    r.f32_array(t.span());
    ck.parameters.push_back(std::move(t));
  }
  ck.pca = PCAModel::deserialize(r);
  ck.training_seed = r.u64();
  ck.best_val_loss = r.f64();
  ck.best_epoch = static_cast<std::int32_t>(r.u32());
  ck.dataset_hash = r.u64();
  ck.active_width = static_cast<std::int32_t>(r.u32());
  ck.active_height = static_cast<std::int32_t>(r.u32());
  r.expect_end();
  require(ck.pca.size() >= n.input_dim, "checkpoint: PCA model has fewer components than the network input");
  return ck;
}

void Checkpoint::save(const std::string& path) const { binio::write_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) { return deserialize(binio::read_file(path)); }

}  // namespace ptomo
