#include "dopt/message.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dopt {

namespace {

constexpr char kMagic[4] = {'D', 'O', 'P', 'T'};
constexpr uint8_t kVersion = 1;

void put_u8(std::vector<uint8_t>& out, uint8_t v) { out.push_back(v); }

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<uint8_t>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos;

  void need(size_t n) const {
    if (pos + n > buf.size())
      throw std::runtime_error("truncated message frame");
  }
  uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(buf[pos]) |
                 static_cast<uint16_t>(buf[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
};

void validate_tensor(const Tensor& t) {
  if (t.rank() > 2) throw std::invalid_argument("tensor rank exceeds 2");
  uint64_t n = 1;
  for (uint32_t d : t.dims) n *= d;
  if (static_cast<uint64_t>(t.data.size()) != n)
    throw std::invalid_argument("tensor data length disagrees with dims");
}

}  // namespace

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data = Eigen::VectorXd::Constant(1, v);
  return t;
}

Tensor Tensor::vector(const Eigen::VectorXd& v) {
  Tensor t;
  t.dims = {static_cast<uint32_t>(v.size())};
  t.data = v;
  return t;
}

Tensor Tensor::matrix(const Eigen::MatrixXd& m) {
  Tensor t;
  t.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  t.data.resize(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      t.data(i * m.cols() + j) = m(i, j);
  return t;
}

double Tensor::as_scalar() const {
  if (rank() != 0 && data.size() != 1)
    throw std::invalid_argument("tensor is not a scalar");
  return data(0);
}

Eigen::VectorXd Tensor::as_vector() const {
  if (rank() > 1) throw std::invalid_argument("tensor is not a vector");
  return data;
}

Eigen::MatrixXd Tensor::as_matrix() const {
  if (rank() != 2) throw std::invalid_argument("tensor is not a matrix");
  Eigen::MatrixXd m(dims[0], dims[1]);
  for (uint32_t i = 0; i < dims[0]; ++i)
    for (uint32_t j = 0; j < dims[1]; ++j) m(i, j) = data(i * dims[1] + j);
  return m;
}

bool Tensor::operator==(const Tensor& other) const {
  if (dims != other.dims || data.size() != other.data.size()) return false;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    uint64_t a, b;
    std::memcpy(&a, &data(i), sizeof(a));
    std::memcpy(&b, &other.data(i), sizeof(b));
    if (a != b) return false;
  }
  return true;
}

void validate_message(const Message& m) {
  for (const auto& t : m.payload) validate_tensor(t);
  size_t n = m.payload.size();
  switch (m.kind) {
    case MessageKind::hello:
    case MessageKind::barrier:
      if (n != 0)
        throw std::invalid_argument("control messages carry no tensors");
      break;
    case MessageKind::state:
    case MessageKind::basis:
    case MessageKind::multiplier:
      if (n < 1)
        throw std::invalid_argument("data messages carry at least one tensor");
      break;
    default:
      throw std::invalid_argument("unknown message kind");
  }
}

std::vector<uint8_t> encode_message(const Message& m) {
  validate_message(m);
  std::vector<uint8_t> body;
  body.insert(body.end(), kMagic, kMagic + 4);
  put_u8(body, kVersion);
  put_u8(body, static_cast<uint8_t>(m.kind));
  put_u32(body, m.sender);
  put_u64(body, m.round);
  put_u16(body, static_cast<uint16_t>(m.payload.size()));
  for (const auto& t : m.payload) {
    put_u8(body, static_cast<uint8_t>(t.rank()));
    for (uint32_t d : t.dims) put_u32(body, d);
    for (Eigen::Index i = 0; i < t.data.size(); ++i) put_f64(body, t.data(i));
  }
  std::vector<uint8_t> out;
  put_u32(out, static_cast<uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Message decode_message(const std::vector<uint8_t>& buf, size_t& offset) {
  Reader r{buf, offset};
  uint32_t len = r.u32();
  size_t body_start = r.pos;
  r.need(len);
  char magic[4];
  for (int i = 0; i < 4; ++i) magic[i] = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad frame magic");
  uint8_t version = r.u8();
  if (version != kVersion)
    throw std::runtime_error("unsupported frame version " +
                             std::to_string(version));
  Message m;
  m.kind = static_cast<MessageKind>(r.u8());
  m.sender = r.u32();
  m.round = r.u64();
  uint16_t count = r.u16();
  m.payload.resize(count);
  for (auto& t : m.payload) {
    uint8_t rank = r.u8();
    if (rank > 2) throw std::runtime_error("bad tensor rank");
    t.dims.resize(rank);
    uint64_t n = 1;
    for (auto& d : t.dims) {
      d = r.u32();
      n *= d;
    }
    t.data.resize(static_cast<Eigen::Index>(n));
    for (uint64_t i = 0; i < n; ++i) t.data(static_cast<Eigen::Index>(i)) = r.f64();
  }
  if (r.pos != body_start + len)
    throw std::runtime_error("frame length disagrees with contents");
  validate_message(m);
  offset = r.pos;
  return m;
}

Message decode_message(const std::vector<uint8_t>& buf) {
  size_t offset = 0;
  Message m = decode_message(buf, offset);
  if (offset != buf.size())
    throw std::runtime_error("trailing bytes after frame");
  return m;
}

void write_tensor_archive(
    const std::string& path,
    const std::vector<std::pair<std::string, Tensor>>& entries) {
  std::vector<uint8_t> out;
  put_u32(out, static_cast<uint32_t>(entries.size()));
  for (const auto& [name, tensor] : entries) {
    validate_tensor(tensor);
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u8(out, static_cast<uint8_t>(tensor.rank()));
    for (uint32_t d : tensor.dims) put_u32(out, d);
    for (Eigen::Index i = 0; i < tensor.data.size(); ++i)
      put_f64(out, tensor.data(i));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

std::vector<std::pair<std::string, Tensor>> read_tensor_archive(
    const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  Reader r{buf, 0};
  uint32_t count = r.u32();
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.reserve(count);
  for (uint32_t k = 0; k < count; ++k) {
    uint16_t len = r.u16();
    r.need(len);
    std::string name(buf.begin() + static_cast<long>(r.pos),
                     buf.begin() + static_cast<long>(r.pos + len));
    r.pos += len;
    Tensor t;
    uint8_t rank = r.u8();
    if (rank > 2) throw std::runtime_error("bad tensor rank in archive");
    t.dims.resize(rank);
    uint64_t n = 1;
    for (auto& d : t.dims) {
      d = r.u32();
      n *= d;
    }
    t.data.resize(static_cast<Eigen::Index>(n));
    for (uint64_t i = 0; i < n; ++i)
      t.data(static_cast<Eigen::Index>(i)) = r.f64();
    entries.emplace_back(std::move(name), std::move(t));
  }
  if (r.pos != buf.size())
    throw std::runtime_error("trailing bytes in archive " + path);
  return entries;
}

}  // namespace dopt
