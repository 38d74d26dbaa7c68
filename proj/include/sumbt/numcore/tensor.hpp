#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sumbt/errors.hpp"

namespace sumbt::numcore {

template <typename T>
class Tape;

namespace detail {
template <typename T>
Tape<T>*& active_tape_slot() {
    thread_local Tape<T>* slot = nullptr;
    return slot;
}
}  // namespace detail

template <typename T>
struct TensorNode {
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until first touched by backward
    bool requires_grad = false;

    std::size_t numel() const { return value.size(); }

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), T(0));
    }
};

// Dense row-major tensor of rank 1 or 2; a cheap shared handle. Values are
// immutable once an op has consumed them (only grad accumulates), which makes
// read-only sharing across evaluation workers safe.
template <typename T>
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape) {
        return from(std::move(shape), {});
    }

    static Tensor from(std::vector<int> shape, std::vector<T> data) {
        auto node = std::make_shared<TensorNode<T>>();
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ShapeError("tensor dimension must be positive");
            n *= static_cast<std::size_t>(d);
        }
        if (shape.empty() || shape.size() > 2)
            throw ShapeError("tensor rank must be 1 or 2");
        if (data.empty()) data.assign(n, T(0));
        if (data.size() != n)
            throw ShapeError("tensor data length does not match shape");
        node->shape = std::move(shape);
        node->value = std::move(data);
        return Tensor(std::move(node));
    }

    static Tensor scalar(T v) { return from({1}, {v}); }

    // Trainable leaf.
    static Tensor param(std::vector<int> shape, std::vector<T> data = {}) {
        Tensor t = from(std::move(shape), std::move(data));
        t.node_->requires_grad = true;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::size_t numel() const { return node_->numel(); }
    int rows() const { return rank() == 2 ? node_->shape[0] : 1; }
    int cols() const {
        return rank() == 2 ? node_->shape[1] : node_->shape[0];
    }

    std::span<T> data() { return node_->value; }
    std::span<const T> data() const { return node_->value; }
    std::span<const T> grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }

    T& at(int i) { return node_->value[static_cast<std::size_t>(i)]; }
    T at(int i) const { return node_->value[static_cast<std::size_t>(i)]; }
    T& at(int r, int c) {
        return node_->value[static_cast<std::size_t>(r) * cols() + c];
    }
    T at(int r, int c) const {
        return node_->value[static_cast<std::size_t>(r) * cols() + c];
    }

    T item() const {
        if (numel() != 1) throw ShapeError("item() requires a scalar tensor");
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    void zero_grad() {
        if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), T(0));
    }

    // Fresh storage, no grad, no tape linkage; requires_grad carried over.
    Tensor deep_copy() const {
        auto node = std::make_shared<TensorNode<T>>();
        node->shape = node_->shape;
        node->value = node_->value;
        node->requires_grad = node_->requires_grad;
        return Tensor(std::move(node));
    }

    std::shared_ptr<TensorNode<T>> node() const { return node_; }

  private:
    explicit Tensor(std::shared_ptr<TensorNode<T>> node)
        : node_(std::move(node)) {}

    std::shared_ptr<TensorNode<T>> node_;

    friend class Tape<T>;
};

// Reverse-mode tape: an ordered list of backward closures. One tape per
// training driver; a tape must not be driven from two threads at once (each
// evaluation worker installs its own via Scope, which is thread-local).
template <typename T>
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return detail::active_tape_slot<T>(); }

    // RAII activation of a tape on the current thread.
    class Scope {
      public:
        explicit Scope(Tape& t) : prev_(detail::active_tape_slot<T>()) {
            detail::active_tape_slot<T>() = &t;
        }
        ~Scope() { detail::active_tape_slot<T>() = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

      private:
        Tape* prev_;
    };

    void record(std::shared_ptr<TensorNode<T>> out,
                std::function<void()> backward) {
        records_.push_back({std::move(out), std::move(backward)});
    }

    std::size_t size() const { return records_.size(); }

    void clear() { records_.clear(); }

    // Seeds d(loss)/d(loss) = 1 and replays records in reverse. Leaf grads
    // accumulate across calls; intermediate grads are dropped afterwards so a
    // repeated call yields exactly one more accumulation.
    void backward(const Tensor<T>& loss) {
        if (loss.numel() != 1)
            throw ShapeError("backward requires a scalar loss");
        auto out = loss.node();
        out->ensure_grad();
        out->grad[0] += T(1);
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
            if (!it->out->grad.empty()) it->backward();
        }
        for (auto& r : records_) r.out->grad.clear();
    }

  private:
    struct Record {
        std::shared_ptr<TensorNode<T>> out;
        std::function<void()> backward;
    };
    std::vector<Record> records_;
};

template <typename T>
void backward(const Tensor<T>& loss, Tape<T>& tape) {
    tape.backward(loss);
}

}  // namespace sumbt::numcore
