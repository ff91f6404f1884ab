#include <cstring>
#include <fstream>

#include "radon/model.hpp"

namespace radon {

// RDNW container, version 1, little-endian:
//   "RDNW" | u32 version | u32 tensor_count
//   per tensor: u16 name_len | name | u8 dtype(0=f32) | u8 rank
//               | rank * u32 dims | row-major f32 payload

namespace {

constexpr char kMagic[4] = {'R', 'D', 'N', 'W'};
constexpr uint32_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n, const char* what) {
    if (pos + n > buf.size()) {
      throw IoError(detail::msg("weight file ", path, " truncated while reading ", what));
    }
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<uint8_t>(buf[pos++]);
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint8_t>(buf[pos]) | (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
};

}  // namespace

void WeightContainer::add(std::string name, Tensor t) {
  if (name.empty()) throw ValidationError("weight container: empty tensor name");
  if (index_.count(name)) {
    throw ValidationError(detail::msg("weight container: duplicate tensor name '", name, "'"));
  }
  index_[name] = tensors_.size();
  tensors_.push_back({std::move(name), std::move(t)});
}

bool WeightContainer::contains(const std::string& name) const { return index_.count(name) > 0; }

const Tensor* WeightContainer::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &tensors_[it->second].tensor;
}

void WeightContainer::save(const std::string& path) const {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(tensors_.size()));
  for (const auto& [name, t] : tensors_) {
    if (name.size() > 0xffff) throw ValidationError("tensor name too long for container");
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.append(name);
    out.push_back(0);  // dtype f32
    out.push_back(static_cast<char>(t.shape().size()));
    for (int d : t.shape()) put_u32(out, static_cast<uint32_t>(d));
    const auto v = t.values();
    static_assert(sizeof(float) == 4);
    const size_t off = out.size();
    out.resize(off + v.size() * 4);
    std::memcpy(out.data() + off, v.data(), v.size() * 4);  // host is little-endian
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(detail::msg("cannot write weight file ", path));
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(detail::msg("short write on weight file ", path));
}

WeightContainer WeightContainer::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(detail::msg("cannot open weight file ", path));
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf, 0, path};
  r.need(4, "magic");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw IoError(detail::msg("weight file ", path, " has bad magic (not an RDNW container)"));
  }
  r.pos = 4;
  const uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw IoError(detail::msg("weight file ", path, " has unsupported version ", version));
  }
  const uint32_t count = r.u32("tensor count");

  WeightContainer out;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16("name length");
    r.need(name_len, "tensor name");
    std::string name = buf.substr(r.pos, name_len);
    r.pos += name_len;
    const uint8_t dtype = r.u8("dtype");
    if (dtype != 0) {
      throw IoError(detail::msg("weight file tensor '", name, "' has unsupported dtype ",
                                static_cast<int>(dtype)));
    }
    const uint8_t rank = r.u8("rank");
    Shape shape(rank);
    size_t numel = 1;
    for (int d = 0; d < rank; ++d) {
      const uint32_t dim = r.u32("dimension");
      if (dim == 0 || dim > 0x7fffffffu) {
        throw IoError(detail::msg("weight file tensor '", name, "' has invalid dimension ", dim));
      }
      shape[d] = static_cast<int>(dim);
      numel *= dim;
    }
    r.need(numel * 4, "tensor payload");
    std::vector<float> data(numel);
    std::memcpy(data.data(), buf.data() + r.pos, numel * 4);
    r.pos += numel * 4;
    out.add(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  if (r.pos != buf.size()) {
    throw IoError(detail::msg("weight file ", path, " has ", buf.size() - r.pos,
                              " trailing bytes"));
  }
  return out;
}

}  // namespace radon
