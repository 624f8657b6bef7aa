#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "raypath/errors.hpp"
#include "raypath/nn.hpp"

namespace raypath {

namespace {

constexpr char kMagic[8] = {'G', 'F', 'N', 'P', 'A', 'T', 'H', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64_array(std::ostream& out, const double* data, std::size_t n) {
  // IEEE-754 doubles written little-endian byte by byte through their u64
  // bit pattern, so the file layout does not depend on host endianness.
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], 8);
    write_u64(out, bits);
  }
}

bool read_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

bool read_u64(std::istream& in, std::uint64_t& v) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (std::size_t d : t.dims) write_u64(out, static_cast<std::uint64_t>(d));
  write_f64_array(out, t.data.data(), t.size());
}

bool read_tensor(std::istream& in, std::string& name, Tensor& t) {
  std::uint32_t name_len = 0;
  if (!read_u32(in, name_len)) return false;
  if (name_len > 4096) throw CorruptTensor("implausible tensor name length");
  name.resize(name_len);
  if (!in.read(name.data(), name_len)) throw CorruptTensor("truncated tensor name");
  std::uint32_t ndim = 0;
  if (!read_u32(in, ndim)) throw CorruptTensor("truncated tensor header for " + name);
  if (ndim > 8) throw CorruptTensor("implausible rank for " + name);
  std::vector<std::size_t> dims(ndim);
  std::size_t total = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    std::uint64_t d = 0;
    if (!read_u64(in, d)) throw CorruptTensor("truncated dims for " + name);
    dims[i] = static_cast<std::size_t>(d);
    total *= dims[i];
  }
  if (total > (1ULL << 32)) throw CorruptTensor("implausible element count for " + name);
  t = Tensor::zeros(dims);
  for (std::size_t i = 0; i < total; ++i) {
    std::uint64_t bits = 0;
    if (!read_u64(in, bits)) throw CorruptTensor("truncated data for " + name);
    std::memcpy(&t.data[i], &bits, 8);
  }
  return true;
}

}  // namespace

void save_checkpoint(const FlowModel& model, const AdamState* opt_state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(model.cfg.k));
  write_u32(out, static_cast<std::uint32_t>(model.cfg.d));

  std::uint32_t count = 0;
  for_each_tensor(const_cast<FlowModel&>(model), [&](const std::string&, Tensor&) { ++count; });
  write_u32(out, count);
  for_each_tensor(const_cast<FlowModel&>(model),
                  [&](const std::string& name, Tensor& t) { write_tensor(out, name, t); });

  if (opt_state) {
    write_u32(out, 2 * count);
    std::size_t ti = 0;
    for_each_tensor(const_cast<FlowModel&>(model), [&](const std::string& name, Tensor&) {
      write_tensor(out, "opt.m." + name, opt_state->m[ti]);
      write_tensor(out, "opt.v." + name, opt_state->v[ti]);
      ++ti;
    });
    write_u64(out, opt_state->step);
  }
  if (!out) throw IoError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw BadMagic("not a GFNPATH1 checkpoint: " + path);
  }
  std::uint32_t version = 0, k = 0, d = 0, count = 0;
  if (!read_u32(in, version)) throw CorruptTensor("truncated header");
  if (version != kVersion) {
    throw VersionMismatch("checkpoint version " + std::to_string(version) + " unsupported");
  }
  if (!read_u32(in, k) || !read_u32(in, d) || !read_u32(in, count)) {
    throw CorruptTensor("truncated header");
  }

  ModelConfig cfg;
  cfg.k = static_cast<int>(k);
  cfg.d = static_cast<int>(d);
  Rng rng = Rng::seeded(0);
  Checkpoint ckpt{make_flow_model(cfg, rng), std::nullopt};

  std::map<std::string, Tensor> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name;
    Tensor t;
    if (!read_tensor(in, name, t)) throw CorruptTensor("truncated tensor section");
    loaded.emplace(std::move(name), std::move(t));
  }
  for_each_tensor(ckpt.model, [&](const std::string& name, Tensor& t) {
    auto it = loaded.find(name);
    if (it == loaded.end()) throw CorruptTensor("missing tensor " + name);
    if (it->second.dims != t.dims) throw CorruptTensor("shape mismatch for " + name);
    t = std::move(it->second);
  });

  std::uint32_t opt_count = 0;
  if (read_u32(in, opt_count)) {
    std::map<std::string, Tensor> opt_loaded;
    for (std::uint32_t i = 0; i < opt_count; ++i) {
      std::string name;
      Tensor t;
      if (!read_tensor(in, name, t)) throw CorruptTensor("truncated optimizer section");
      opt_loaded.emplace(std::move(name), std::move(t));
    }
    AdamState state = make_adam_state(ckpt.model);
    std::size_t ti = 0;
    for_each_tensor(ckpt.model, [&](const std::string& name, Tensor& t) {
      auto fetch = [&](const std::string& full) -> Tensor {
        auto it = opt_loaded.find(full);
        if (it == opt_loaded.end()) throw CorruptTensor("missing tensor " + full);
        if (it->second.dims != t.dims) throw CorruptTensor("shape mismatch for " + full);
        return std::move(it->second);
      };
      state.m[ti] = fetch("opt.m." + name);
      state.v[ti] = fetch("opt.v." + name);
      ++ti;
    });
    if (!read_u64(in, state.step)) throw CorruptTensor("missing optimizer step counter");
    ckpt.opt_state = std::move(state);
  }
  return ckpt;
}

}  // namespace raypath
