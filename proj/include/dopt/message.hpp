#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dopt {

// Dense real tensor of rank 0, 1 or 2; rank-2 data is flattened row-major.
struct Tensor {
  std::vector<uint32_t> dims;
  Eigen::VectorXd data;

  static Tensor scalar(double v);
  static Tensor vector(const Eigen::VectorXd& v);
  static Tensor matrix(const Eigen::MatrixXd& m);

  int rank() const { return static_cast<int>(dims.size()); }
  double as_scalar() const;
  Eigen::VectorXd as_vector() const;
  Eigen::MatrixXd as_matrix() const;

  bool operator==(const Tensor& other) const;
};

enum class MessageKind : uint8_t {
  hello = 0,
  barrier = 1,
  state = 2,
  basis = 3,
  multiplier = 4,
};

struct Message {
  uint32_t sender = 0;
  uint64_t round = 0;
  MessageKind kind = MessageKind::state;
  std::vector<Tensor> payload;
};

// Payload schema per kind: inclusive bounds on the tensor count. Structural
// tensor invariants (rank <= 2, dims consistent with data length) always hold.
void validate_message(const Message& m);

// Little-endian frame: u32 length of everything after the prefix, then
// magic "DOPT", version u8 = 1, kind u8, sender u32, round u64, tensor
// count u16, and per tensor rank u8, dims u32 each, values f64 row-major.
std::vector<uint8_t> encode_message(const Message& m);

// Decodes one frame starting at `offset`; advances `offset` past it.
Message decode_message(const std::vector<uint8_t>& buf, size_t& offset);
Message decode_message(const std::vector<uint8_t>& buf);

// Named-tensor archives reuse the tensor encoding; used for problem
// instance files and per-agent history shards.
void write_tensor_archive(const std::string& path,
                          const std::vector<std::pair<std::string, Tensor>>& entries);
std::vector<std::pair<std::string, Tensor>> read_tensor_archive(
    const std::string& path);

}  // namespace dopt
