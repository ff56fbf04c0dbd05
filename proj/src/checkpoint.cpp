#include "hcd/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace hcd {

namespace {

constexpr char kMagic[8] = {'H', 'C', 'D', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ValueError("checkpoint truncated");
  return v;
}

void put_array(std::ofstream& os, const std::string& name, const std::vector<double>& data) {
  put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint64_t>(os, data.size());
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
}

std::pair<std::string, std::vector<double>> take_array(std::ifstream& is) {
  std::uint16_t len = take<std::uint16_t>(is);
  std::string name(len, '\0');
  is.read(name.data(), len);
  std::uint64_t count = take<std::uint64_t>(is);
  std::vector<double> data(count);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw ValueError("checkpoint truncated");
  return {std::move(name), std::move(data)};
}

}  // namespace

void save_checkpoint(const std::string& path, HcdModel& model, const AdamState& opt,
                     const CheckpointMeta& meta) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ValueError("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, meta.epoch);
  put<std::uint64_t>(os, meta.rng_state);
  put<std::uint64_t>(os, meta.global_step);
  put<std::uint64_t>(os, opt.step_count);

  auto params = model.parameters();
  auto names = model.parameter_names();
  std::uint32_t extra = model.cfg.use_gate ? 2 : 0;
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size() * 3 + extra));
  for (std::size_t i = 0; i < params.size(); ++i) {
    put_array(os, names[i], params[i]->values());
    put_array(os, "adam.m." + names[i], opt.m[i]);
    put_array(os, "adam.v." + names[i], opt.v[i]);
  }
  if (model.cfg.use_gate) {
    put_array(os, "gate.bn.running_mean", model.gate.bn.running_mean);
    put_array(os, "gate.bn.running_var", model.gate.bn.running_var);
  }
  if (!os) throw ValueError("failed writing " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, HcdModel& model, AdamState& opt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValueError("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw ValueError(path + " is not a checkpoint (bad magic)");
  }
  std::uint32_t version = take<std::uint32_t>(is);
  if (version != kVersion) {
    throw ValueError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointMeta meta;
  meta.epoch = take<std::uint64_t>(is);
  meta.rng_state = take<std::uint64_t>(is);
  meta.global_step = take<std::uint64_t>(is);
  opt.step_count = take<std::uint64_t>(is);

  auto params = model.parameters();
  auto names = model.parameter_names();
  std::uint32_t count = take<std::uint32_t>(is);
  for (std::uint32_t k = 0; k < count; ++k) {
    auto [name, data] = take_array(is);
    bool matched = false;
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::vector<double>* dst = nullptr;
      if (name == names[i]) dst = &params[i]->mut_values();
      else if (name == "adam.m." + names[i]) dst = &opt.m[i];
      else if (name == "adam.v." + names[i]) dst = &opt.v[i];
      if (dst) {
        if (dst->size() != data.size()) {
          throw ShapeError("checkpoint array " + name + " has " + std::to_string(data.size()) +
                           " values, model expects " + std::to_string(dst->size()));
        }
        *dst = std::move(data);
        matched = true;
        break;
      }
    }
    if (!matched) {
      if (name == "gate.bn.running_mean" && model.cfg.use_gate) {
        model.gate.bn.running_mean = std::move(data);
      } else if (name == "gate.bn.running_var" && model.cfg.use_gate) {
        model.gate.bn.running_var = std::move(data);
      } else {
        throw ValueError("checkpoint array '" + name + "' does not match the model");
      }
    }
  }
  return meta;
}

}  // namespace hcd
