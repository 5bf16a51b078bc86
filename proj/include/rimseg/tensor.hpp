// Copyright 2026 The rimseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense channel-last tensors and a define-by-run gradient tape.
//
// A Tensor is a shared handle to a TensorStorage. Leaves (parameters, fixed
// inputs) live outside any tape; every op executed while a Tape is active and
// at least one input requires a gradient appends an entry holding the inputs,
// the output and a backward closure. Tape::backward replays the closures in
// reverse recording order. Ops run with no active tape compute values only.

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rimseg {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Storage starts on a 64-byte boundary, so vectorized loops split every buffer
// into the same scalar and packet parts and results depend on the shape alone.
inline constexpr std::size_t kStorageAlignment = 64;

template <typename T>
struct AlignedAllocator {
  using value_type = T;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kStorageAlignment}));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t{kStorageAlignment});
  }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct TensorStorage {
  Shape shape;
  AlignedVector<T> data;
  AlignedVector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // 0 for leaves

  // Returns the gradient buffer, allocating it zero-filled on first use.
  AlignedVector<T>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, const std::vector<T>& data, bool requires_grad = false)
      : Tensor(std::move(shape), AlignedVector<T>(data.begin(), data.end()), requires_grad) {}

  Tensor(Shape shape, std::initializer_list<T> data, bool requires_grad = false)
      : Tensor(std::move(shape), AlignedVector<T>(data), requires_grad) {}

  Tensor(Shape shape, AlignedVector<T> data, bool requires_grad = false)
      : storage_(std::make_shared<TensorStorage<T>>()) {
    if (shape_size(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_string(shape));
    }
    storage_->shape = std::move(shape);
    storage_->data = std::move(data);
    storage_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), AlignedVector<T>(n, T(0)), requires_grad);
  }

  static Tensor full(Shape shape, T value) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), AlignedVector<T>(n, value));
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{}, AlignedVector<T>{value}, requires_grad);
  }

  bool defined() const { return storage_ != nullptr; }

  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return storage_->shape.at(axis); }
  std::size_t size() const { return storage_->data.size(); }

  std::span<const T> data() const { return storage_->data; }
  std::span<T> mutable_data() { return storage_->data; }
  std::vector<T> values() const { return {storage_->data.begin(), storage_->data.end()}; }

  T item() const {
    if (size() != 1) {
      throw ShapeError("item() on tensor of shape " + shape_string(shape()));
    }
    return storage_->data[0];
  }

  bool requires_grad() const { return storage_->requires_grad; }
  void set_requires_grad(bool on) { storage_->requires_grad = on; }

  bool has_grad() const { return storage_->grad.size() == storage_->data.size(); }
  std::span<const T> grad() const { return storage_->grad; }
  std::span<T> mutable_grad() { return storage_->ensure_grad(); }
  void zero_grad() { storage_->grad.assign(storage_->data.size(), T(0)); }
  void clear_grad() { storage_->grad.clear(); }

  std::uint64_t tape_id() const { return storage_->tape_id; }
  bool is_leaf() const { return storage_->tape_id == 0; }

  const std::shared_ptr<TensorStorage<T>>& storage() const { return storage_; }

  // Deep copy with no tape linkage and no gradient.
  Tensor detach() const { return Tensor(shape(), storage_->data, false); }

 private:
  std::shared_ptr<TensorStorage<T>> storage_;
};

namespace detail {
inline std::uint64_t next_tape_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}
}  // namespace detail

template <typename T>
class Tape {
 public:
  using StoragePtr = std::shared_ptr<TensorStorage<T>>;

  struct Entry {
    std::vector<StoragePtr> inputs;
    StoragePtr output;
    std::function<void()> backward;
  };

  // Makes a tape the target of op recording on the current thread for the
  // lifetime of the scope. Scopes nest; the previous tape is restored.
  class Scope {
   public:
    explicit Scope(Tape& tape) : previous_(active_slot()) { active_slot() = &tape; }
    ~Scope() { active_slot() = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  Tape() : id_(detail::next_tape_id()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_slot(); }

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  void record(std::vector<StoragePtr> inputs, StoragePtr output,
              std::function<void()> backward) {
    output->requires_grad = true;
    output->tape_id = id_;
    entries_.push_back({std::move(inputs), std::move(output), std::move(backward)});
  }

  // Drops every recorded entry. Outputs still referenced elsewhere keep their
  // values but no longer belong to this tape.
  void clear() {
    for (auto& e : entries_) e.output->tape_id = 0;
    entries_.clear();
  }

  // Seeds d(loss)/d(loss) = 1 and replays backward rules in reverse order.
  // Intermediate gradients are reset first; leaf gradients accumulate.
  void backward(const Tensor<T>& loss) {
    if (loss.size() != 1) {
      throw ShapeError("backward() needs a scalar loss, got shape " +
                       shape_string(loss.shape()));
    }
    if (loss.tape_id() != id_) {
      throw std::invalid_argument("backward(): loss was not recorded on this tape");
    }
    for (auto& e : entries_) e.output->grad.assign(e.output->data.size(), T(0));
    loss.storage()->grad.assign(1, T(1));
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward();
  }

 private:
  static Tape*& active_slot() {
    thread_local Tape* slot = nullptr;
    return slot;
  }

  std::uint64_t id_;
  std::vector<Entry> entries_;
};

}  // namespace rimseg
