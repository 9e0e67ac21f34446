#ifndef GCPA_CORE_TENSOR_HPP
#define GCPA_CORE_TENSOR_HPP

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcpa {

// Dense row-major tensor. Rank-4 [n, c, h, w] for feature maps, rank-2 for
// fully connected activations, rank-1 for per-channel vectors.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
        for (long d : shape_) {
            if (d < 1) throw std::invalid_argument("tensor dims must be >= 1, got " + shape_str());
        }
        buf_.assign(static_cast<size_t>(numel_of(shape_)), T(0));
    }

    Tensor(std::vector<long> shape, std::vector<T> data) : shape_(std::move(shape)), buf_(std::move(data)) {
        if (static_cast<long>(buf_.size()) != numel_of(shape_))
            throw std::invalid_argument("tensor data size does not match shape " + shape_str());
    }

    static Tensor full(std::vector<long> shape, T v) {
        Tensor t(std::move(shape));
        std::fill(t.buf_.begin(), t.buf_.end(), v);
        return t;
    }

    static long numel_of(const std::vector<long>& shape) {
        long n = 1;
        for (long d : shape) n *= d;
        return n;
    }

    const std::vector<long>& shape() const { return shape_; }
    long dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    long numel() const { return static_cast<long>(buf_.size()); }
    bool empty() const { return buf_.empty(); }

    T* data() { return buf_.data(); }
    const T* data() const { return buf_.data(); }

    T& operator[](long i) { return buf_[static_cast<size_t>(i)]; }
    const T& operator[](long i) const { return buf_[static_cast<size_t>(i)]; }

    // 4-d accessor [n, c, h, w]
    T& at(long n, long c, long h, long w) {
        return buf_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    const T& at(long n, long c, long h, long w) const {
        return buf_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }

    // 2-d accessor [r, c]
    T& at(long r, long c) { return buf_[static_cast<size_t>(r * shape_[1] + c)]; }
    const T& at(long r, long c) const { return buf_[static_cast<size_t>(r * shape_[1] + c)]; }

    void fill(T v) { std::fill(buf_.begin(), buf_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (size_t i = 0; i < shape_.size(); ++i) os << shape_[i] << (i + 1 < shape_.size() ? "," : "");
        os << ']';
        return os.str();
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.reshape_raw(shape_);
        for (long i = 0; i < numel(); ++i) out[i] = static_cast<U>(buf_[static_cast<size_t>(i)]);
        return out;
    }

    // internal: set shape + allocate without the dim>=1 check (used by cast)
    void reshape_raw(const std::vector<long>& shape) {
        shape_ = shape;
        buf_.assign(static_cast<size_t>(numel_of(shape_)), T(0));
    }

private:
    std::vector<long> shape_;
    std::vector<T> buf_;
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const std::vector<long>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) os << shape[i] << (i + 1 < shape.size() ? "," : "");
    os << ']';
    return os.str();
}

// Throws ShapeError naming the offending tensor when shapes differ.
template <typename T>
void require_shape(const Tensor<T>& t, const std::vector<long>& expect, const std::string& name) {
    if (t.shape() != expect)
        throw ShapeError(name + " has shape " + t.shape_str() + ", expected " + shape_str(expect));
}

template <typename T>
void require_rank(const Tensor<T>& t, int rank, const std::string& name) {
    if (t.rank() != rank)
        throw ShapeError(name + " has rank " + std::to_string(t.rank()) + ", expected " + std::to_string(rank));
}

}  // namespace gcpa

#endif
