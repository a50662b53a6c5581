#include "cord/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cord/common/error.hpp"

namespace cord::model {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'O', 'R', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated checkpoint", path);
  return v;
}

}  // namespace

template <typename Real>
void save_checkpoint(const ModelParams<Real>& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing", path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, sizeof(Real));
  const auto tensors = params.named();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->shape.size()));
    for (std::size_t dim : t->shape) put<std::uint64_t>(out, dim);
    out.write(reinterpret_cast<const char*>(t->data.data()),
              static_cast<std::streamsize>(t->data.size() * sizeof(Real)));
  }
  out.flush();
  if (!out) throw IoError("write failure", path.string());
}

template <typename Real>
void load_checkpoint(ModelParams<Real>& params, const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint", p);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError("not a CORDCKPT file: " + p);
  }
  const auto version = get<std::uint32_t>(in, p);
  if (version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(version) + ": " + p);
  }
  const auto precision = get<std::uint32_t>(in, p);
  if (precision != sizeof(Real)) {
    throw ConfigError("checkpoint precision f" + std::to_string(precision * 8) +
                      " does not match requested f" + std::to_string(sizeof(Real) * 8));
  }
  auto tensors = params.named();
  const auto count = get<std::uint32_t>(in, p);
  if (count != tensors.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(tensors.size()));
  }
  for (auto& ref : tensors) {
    const auto name_len = get<std::uint32_t>(in, p);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("truncated checkpoint", p);
    if (name != ref.name) throw ConfigError("checkpoint tensor '" + name + "' where '" + ref.name + "' expected");
    const auto rank = get<std::uint32_t>(in, p);
    ad::Shape shape(rank);
    for (auto& dim : shape) dim = static_cast<std::size_t>(get<std::uint64_t>(in, p));
    if (shape != ref.value->shape) {
      throw ConfigError("shape mismatch for '" + name + "': checkpoint " + ad::shape_string(shape) +
                        ", model " + ad::shape_string(ref.value->shape));
    }
    in.read(reinterpret_cast<char*>(ref.value->data.data()),
            static_cast<std::streamsize>(ref.value->data.size() * sizeof(Real)));
    if (!in) throw IoError("truncated checkpoint", p);
  }
}

template void save_checkpoint<float>(const ModelParams<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const ModelParams<double>&, const std::filesystem::path&);
template void load_checkpoint<float>(ModelParams<float>&, const std::filesystem::path&);
template void load_checkpoint<double>(ModelParams<double>&, const std::filesystem::path&);

}  // namespace cord::model
