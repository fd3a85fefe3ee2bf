#include "sluxfer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "sluxfer/error.hpp"

namespace sluxfer {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'L', 'U', 'X', 'C', 'K', 'P', 'T'};

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const std::filesystem::path& file) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError(file.string(), 0, "truncated checkpoint");
  return v;
}

}  // namespace

void Checkpoint::put(const ConstTensorList& list, const std::string& prefix) {
  for (const auto& t : list) tensors[join_name(prefix, t.name)] = *t.value;
}

void Checkpoint::get(const TensorList& list, const std::string& prefix) const {
  for (const auto& t : list) {
    const Matrix& stored = tensor(join_name(prefix, t.name));
    if (stored.rows() != t.value->rows() || stored.cols() != t.value->cols()) {
      throw ShapeError("checkpoint tensor '" + join_name(prefix, t.name) + "' is " + std::to_string(stored.rows()) +
                       "x" + std::to_string(stored.cols()) + ", model expects " + std::to_string(t.value->rows()) +
                       "x" + std::to_string(t.value->cols()));
    }
    *t.value = stored;
  }
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ValidationError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

void write_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write checkpoint " + file.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, Checkpoint::kVersion);
  const std::string header = ckpt.header.dump();
  write_pod<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_pod<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& [name, m] : ckpt.tensors) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw ValidationError("failed writing checkpoint " + file.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError(file.string(), 0, "cannot open checkpoint");
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(file.string(), 0, "not a checkpoint (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(in, file);
  if (version != Checkpoint::kVersion) {
    throw FormatError(file.string(), 0, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto header_len = read_pod<std::uint64_t>(in, file);
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) throw FormatError(file.string(), 0, "truncated header");
  try {
    ckpt.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file.string(), 0, std::string("bad checkpoint header: ") + e.what());
  }
  const auto count = read_pod<std::uint64_t>(in, file);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, file);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw FormatError(file.string(), 0, "truncated tensor name");
    const auto rows = read_pod<std::uint64_t>(in, file);
    const auto cols = read_pod<std::uint64_t>(in, file);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(rows * cols * sizeof(double)))) {
      throw FormatError(file.string(), 0, "truncated tensor '" + name + "'");
    }
    ckpt.tensors.emplace(std::move(name), std::move(m));
  }
  return ckpt;
}

}  // namespace sluxfer
