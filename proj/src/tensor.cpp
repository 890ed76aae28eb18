#include "azarnet/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gemm.hpp"

namespace azarnet {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

void check_extents(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("zero extent in shape " + shape_to_string(shape));
  }
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_to_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape new_shape) const& {
  BasicTensor copy = *this;
  return std::move(copy).reshaped(std::move(new_shape));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape new_shape) && {
  check_extents(new_shape);
  if (shape_size(new_shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " +
                         shape_to_string(new_shape));
  }
  BasicTensor out;
  out.shape_ = std::move(new_shape);
  out.data_ = std::move(data_);
  shape_.clear();
  return out;
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template class BasicTensor<float>;
template class BasicTensor<double>;

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul shape mismatch: " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  BasicTensor<T> c({a.dim(0), b.dim(1)});
  detail::gemm<T>(false, false, a.dim(0), b.dim(1), a.dim(1), a.data(), b.data(), c.data(),
                  false);
  return c;
}

template Tensor matmul(const Tensor&, const Tensor&);
template TensorD matmul(const TensorD&, const TensorD&);

template <typename T>
bool all_finite(const BasicTensor<T>& t) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template bool all_finite(const Tensor&);
template bool all_finite(const TensorD&);

// ---- binary encoding ----

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 + 4 * t.rank() + 4 * t.size());
  out.insert(out.end(), kTensorMagic, kTensorMagic + 8);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw CorruptFileError("tensor block truncated in header");
  if (std::memcmp(bytes.data(), kTensorMagic, 8) != 0) {
    throw CorruptFileError("bad tensor magic (expected AZTN0001)");
  }
  const std::uint32_t rank = get_u32(bytes.data() + 8);
  if (rank == 0 || rank > 16) throw CorruptFileError("implausible tensor rank " + std::to_string(rank));
  if (bytes.size() < 12 + 4 * std::size_t(rank)) throw CorruptFileError("tensor block truncated in dims");
  Shape shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) shape[i] = get_u32(bytes.data() + 12 + 4 * i);
  for (std::size_t d : shape) {
    if (d == 0) throw CorruptFileError("zero extent in encoded tensor");
  }
  const std::size_t n = shape_size(shape);
  const std::size_t header = 12 + 4 * std::size_t(rank);
  if (bytes.size() != header + 4 * n) {
    throw CorruptFileError("tensor payload size mismatch: expected " + std::to_string(4 * n) +
                           " bytes, got " + std::to_string(bytes.size() - header));
  }
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes.data() + header + 4 * i));
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(std::ostream& out, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_tensor(std::istream& in) {
  std::vector<std::uint8_t> head(12);
  if (!in.read(reinterpret_cast<char*>(head.data()), 12)) {
    throw CorruptFileError("tensor block truncated in header");
  }
  if (std::memcmp(head.data(), kTensorMagic, 8) != 0) {
    throw CorruptFileError("bad tensor magic (expected AZTN0001)");
  }
  const std::uint32_t rank = get_u32(head.data() + 8);
  if (rank == 0 || rank > 16) throw CorruptFileError("implausible tensor rank " + std::to_string(rank));
  std::vector<std::uint8_t> dims(4 * std::size_t(rank));
  if (!in.read(reinterpret_cast<char*>(dims.data()), static_cast<std::streamsize>(dims.size()))) {
    throw CorruptFileError("tensor block truncated in dims");
  }
  std::size_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) n *= get_u32(dims.data() + 4 * i);
  std::vector<std::uint8_t> all = head;
  all.insert(all.end(), dims.begin(), dims.end());
  const std::size_t header = all.size();
  all.resize(header + 4 * n);
  if (!in.read(reinterpret_cast<char*>(all.data() + header), static_cast<std::streamsize>(4 * n))) {
    throw CorruptFileError("tensor payload truncated");
  }
  return decode_tensor(all);
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_tensor(out, t);
  if (!out) throw IoError("write failed for '" + path + "'");
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const CorruptFileError& e) {
    throw CorruptFileError(path + ": " + e.what());
  }
}

}  // namespace azarnet
