#include "biomass/tensor_file.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace biomass {

namespace {

constexpr std::array<char, 4> kMagic{'B', 'I', 'O', 'M'};

template <typename U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw InputError(std::string("tensor file truncated while reading ") + what);
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tensor_file(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  std::set<std::string> names;
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kTensorFileVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.size() > 0xFFFF) throw InputError("tensor name length out of range");
    if (!names.insert(name).second) throw InputError("duplicate tensor name '" + name + "'");
    if (t.rank() == 0 || t.rank() > 0xFF) throw InputError("tensor '" + name + "' has unsupported rank");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) {
      if (d > 0xFFFFFFFFu) throw InputError("tensor '" + name + "' dimension exceeds u32");
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    for (float v : t.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw InputError("failed writing tensor file");
}

std::vector<NamedTensor> read_tensor_file(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw InputError("not a tensor file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kTensorFileVersion) {
    throw InputError("unsupported tensor file version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in, "tensor count");
  std::vector<NamedTensor> out;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    if (len == 0 || !in.read(name.data(), len)) throw InputError("tensor file: bad tensor name");
    if (!names.insert(name).second) throw InputError("tensor file: duplicate name '" + name + "'");
    const auto rank = get_le<std::uint8_t>(in, "rank");
    if (rank == 0) throw InputError("tensor file: '" + name + "' has rank 0");
    Shape shape;
    for (std::uint8_t r = 0; r < rank; ++r) {
      const auto d = get_le<std::uint32_t>(in, "dimension");
      if (d == 0) throw InputError("tensor file: '" + name + "' has a zero dimension");
      shape.push_back(d);
    }
    const auto n = shape_size(shape);
    // Guard against absurd sizes from corrupt headers before allocating.
    if (n > (std::size_t{1} << 34)) throw InputError("tensor file: '" + name + "' is implausibly large");
    std::vector<float> data(n);
    std::vector<unsigned char> raw(n * 4);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
      throw InputError("tensor file truncated in data of '" + name + "'");
    }
    for (std::size_t k = 0; k < n; ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(raw[4 * k + b]) << (8 * b);
      data[k] = std::bit_cast<float>(bits);
    }
    out.push_back({std::move(name), Tensor<float>(std::move(shape), std::move(data))});
  }
  if (in.peek() != std::char_traits<char>::eof()) throw InputError("tensor file has trailing bytes");
  return out;
}

void save_tensor_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_tensor_file(out, tensors);
}

std::vector<NamedTensor> load_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open tensor file: " + path.string());
  return read_tensor_file(in);
}

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

}  // namespace biomass
